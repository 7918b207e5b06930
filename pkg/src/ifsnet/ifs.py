"""Intuitionistic fuzzy encoding of grayscale images.

A crisp intensity image is lifted to a triplet of planes (mu, nu, pi):

    mu  -- membership degree in [0, 1], from a membership function
    nu  -- non-membership degree, from a parametric fuzzy negation of mu
    pi  -- hesitation degree, pi = 1 - mu - nu

Membership functions:

    min-max    mu = (x - min) / (max - min)
    gaussian   mu = exp(-(x - c)^2 / (2 sigma^2))
    sigmoid    mu = 1 / (1 + exp(-slope * (x - c)))

Negations:

    sugeno     nu = (1 - mu) / (1 + lambda * mu),      lambda > 0
    yager      nu = (1 - mu^alpha)^(1/alpha),          0 < alpha < 1

Both negations satisfy mu + nu <= 1 on [0, 1], so pi >= 0 everywhere.
As lambda -> 0+ (or alpha -> 1-) nu -> 1 - mu and the hesitation plane
collapses to zero, recovering an ordinary fuzzy set.

All arithmetic is double precision; EPS = 1e-9 bounds the tolerated
floating-point excursion outside the unit interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantImageError,
    ConstraintViolationError,
    InvalidBinsError,
    InvalidConfigError,
    InvalidImageError,
    ShapeMismatchError,
)

EPS = 1e-9

MEMBERSHIP_KINDS = ("minmax", "gaussian", "sigmoid")
NEGATION_KINDS = ("sugeno", "yager")
CONSTANT_POLICIES = ("error", "zero", "half")


@dataclass
class MembershipConfig:
    """Choice of membership function plus its parameters.

    center and slope follow the sigmoid convention mu(center) = 0.5 with
    steepness slope; center/sigma parameterize the gaussian. min-max is
    parameter-free. Irrelevant fields are ignored.
    """

    kind: str = "minmax"
    center: float | None = None
    sigma: float | None = None
    slope: float | None = None

    def validate(self) -> None:
        if self.kind not in MEMBERSHIP_KINDS:
            raise InvalidConfigError(f"unknown membership kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.center is None:
                raise InvalidConfigError("gaussian membership requires center")
            if self.sigma is None or not self.sigma > 0:
                raise InvalidConfigError("gaussian membership requires sigma > 0")
        if self.kind == "sigmoid":
            if self.center is None:
                raise InvalidConfigError("sigmoid membership requires center")
            if self.slope is None:
                raise InvalidConfigError("sigmoid membership requires slope")


@dataclass
class NegationConfig:
    """Choice of fuzzy negation plus its parameter."""

    kind: str = "sugeno"
    lam: float = 1.0
    alpha: float = 0.5

    def validate(self) -> None:
        if self.kind not in NEGATION_KINDS:
            raise InvalidConfigError(f"unknown negation kind {self.kind!r}")
        if self.kind == "sugeno" and not self.lam > 0:
            raise InvalidConfigError(f"sugeno negation requires lambda > 0, got {self.lam}")
        if self.kind == "yager" and not 0 < self.alpha < 1:
            raise InvalidConfigError(f"yager negation requires 0 < alpha < 1, got {self.alpha}")


@dataclass
class IfsImage:
    """Triplet representation of an image: one plane per degree.

    Invariants (enforced by encode): every value of mu and nu in [0, 1],
    mu + nu <= 1 + EPS, and pi = 1 - mu - nu clamped to be non-negative.
    """

    mu: np.ndarray
    nu: np.ndarray
    pi: np.ndarray

    @property
    def height(self) -> int:
        return self.mu.shape[0]

    @property
    def width(self) -> int:
        return self.mu.shape[1]

    def as_channels(self) -> np.ndarray:
        """Stack the planes as a (3, H, W) array, channel order (mu, nu, pi)."""
        return np.stack([self.mu, self.nu, self.pi], axis=0)


@dataclass
class Histogram:
    """Counts of plane values over uniform bins spanning [0, 1]."""

    edges: np.ndarray   # bins + 1 boundaries
    counts: np.ndarray  # per-bin pixel counts

    @property
    def bins(self) -> int:
        return len(self.counts)


def _as_image(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidImageError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidImageError("image contains NaN or Inf")
    return arr


def _clamp_unit(plane: np.ndarray, what: str) -> np.ndarray:
    # Only floating error may push values outside [0, 1]; anything larger is a bug.
    if plane.size == 0:
        raise InvalidImageError(f"{what}: empty plane")
    excursion = max(0.0 - float(plane.min()), float(plane.max()) - 1.0)
    if not excursion <= EPS:  # catches NaN too
        raise ConstraintViolationError(f"{what} leaves [0, 1] by {excursion:.3e} (> {EPS})")
    return np.clip(plane, 0.0, 1.0)


def membership(img, cfg: MembershipConfig, constant_policy: str = "error") -> np.ndarray:
    """Compute the membership plane of an intensity image.

    constant_policy controls min-max on a constant image (max == min), where
    the normalization is undefined: "error" raises ConstantImageError,
    "zero" / "half" map every pixel to 0.0 / 0.5.
    """
    arr = _as_image(img)
    cfg.validate()
    if constant_policy not in CONSTANT_POLICIES:
        raise InvalidConfigError(f"unknown constant policy {constant_policy!r}")

    if cfg.kind == "minmax":
        lo, hi = float(arr.min()), float(arr.max())
        if hi == lo:
            if constant_policy == "error":
                raise ConstantImageError(f"min-max undefined: image is constant at {lo}")
            return np.full_like(arr, 0.0 if constant_policy == "zero" else 0.5)
        mu = (arr - lo) / (hi - lo)
    elif cfg.kind == "gaussian":
        z = (arr - cfg.center) / cfg.sigma
        mu = np.exp(-0.5 * z * z)
    else:  # sigmoid
        mu = 1.0 / (1.0 + np.exp(-cfg.slope * (arr - cfg.center)))
    return _clamp_unit(mu, "membership")


def negation(mu, cfg: NegationConfig) -> np.ndarray:
    """Apply the configured fuzzy negation elementwise to a membership plane."""
    cfg.validate()
    mu = np.asarray(mu, dtype=np.float64)
    _clamp_unit(mu, "negation input")
    if cfg.kind == "sugeno":
        nu = (1.0 - mu) / (1.0 + cfg.lam * mu)
    else:
        nu = (1.0 - mu ** cfg.alpha) ** (1.0 / cfg.alpha)
    return _clamp_unit(nu, "negation output")


def hesitation(mu, nu) -> np.ndarray:
    """Hesitation plane pi = 1 - mu - nu.

    Values in [-EPS, 0) are rounded up to 0 (floating error); mu + nu
    exceeding 1 + EPS anywhere raises, reporting the worst pixel.
    """
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if mu.shape != nu.shape:
        raise ShapeMismatchError(f"mu shape {mu.shape} != nu shape {nu.shape}")
    mu = _clamp_unit(mu, "hesitation mu input")
    nu = _clamp_unit(nu, "hesitation nu input")
    pi = 1.0 - mu - nu
    worst = int(np.argmin(pi))
    if pi.flat[worst] < -EPS:
        idx = tuple(int(v) for v in np.unravel_index(worst, pi.shape))
        raise ConstraintViolationError(
            f"mu + nu = {mu[idx] + nu[idx]:.12f} > 1 + {EPS} at pixel {idx}"
        )
    return np.maximum(pi, 0.0)


def encode(img, m: MembershipConfig, n: NegationConfig,
           constant_policy: str = "error") -> IfsImage:
    """Lift an intensity image to its (mu, nu, pi) triplet representation."""
    mu = membership(img, m, constant_policy)
    nu = negation(mu, n)
    pi = hesitation(mu, nu)
    return IfsImage(mu=mu, nu=nu, pi=pi)


def plane_histogram(plane, bins: int = 64) -> Histogram:
    """Histogram a plane of unit-interval values over uniform bins.

    Bins are half-open [lo, hi) except the last, which also includes 1.0,
    so counts always sum to the pixel count.
    """
    if bins < 1:
        raise InvalidBinsError(f"bins must be >= 1, got {bins}")
    plane = np.asarray(plane, dtype=np.float64)
    _clamp_unit(plane, "histogram input")
    counts, edges = np.histogram(plane, bins=bins, range=(0.0, 1.0))
    return Histogram(edges=edges, counts=counts)
