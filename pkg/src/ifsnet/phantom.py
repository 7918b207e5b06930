"""Synthetic 2-D brain-like phantoms with ground-truth masks.

Each phantom is three nested tissue blobs over background (outer CSF ring,
GM annulus, WM core), with boundaries perturbed by low-order random
harmonics so no two look alike. The crisp label mask is rendered to
intensities by compositing per-class means, multiplying a smooth bias
field, Gaussian-blurring (the partial-volume ambiguity: labels stay crisp,
intensities mix at boundaries), and adding Gaussian noise. Everything is a
pure function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import InvalidSpecError
from .training import Sample

NUM_CLASSES = 4
CLASS_NAMES = ("BG", "CSF", "GM", "WM")

# Base radii as fractions of image size, innermost first; harmonic wobble
# amplitudes are capped so rings can never cross (worst-case extremes of
# adjacent rings stay disjoint).
_RADIUS_RANGES = ((0.14, 0.18), (0.25, 0.29), (0.37, 0.41))
_WOBBLE = (0.08, 0.08, 0.08)
_HARMONICS = (3, 4, 5, 6)
_CENTER_JITTER = 0.03


@dataclass
class PhantomSpec:
    size: int = 64
    tissue_means: tuple[float, float, float, float] = (10.0, 60.0, 120.0, 200.0)
    noise_sigma: float = 8.0
    pv_blur_sigma: float = 1.5
    bias_amplitude: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.size < 8:
            raise InvalidSpecError(f"size must be >= 8, got {self.size}")
        if len(self.tissue_means) != NUM_CLASSES:
            raise InvalidSpecError(f"need {NUM_CLASSES} tissue means")
        if not all(a < b for a, b in zip(self.tissue_means, self.tissue_means[1:])):
            raise InvalidSpecError(f"tissue means must be strictly increasing: "
                                   f"{self.tissue_means}")
        if self.noise_sigma < 0 or self.pv_blur_sigma < 0 or self.bias_amplitude < 0:
            raise InvalidSpecError("noise_sigma, pv_blur_sigma, bias_amplitude must be >= 0")


def _wobbly_radius(rng: np.random.Generator, lo: float, hi: float, amp: float,
                   theta: np.ndarray, size: int) -> np.ndarray:
    base = rng.uniform(lo, hi) * size
    weights = rng.uniform(0.2, 1.0, size=len(_HARMONICS))
    weights *= amp / weights.sum()
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(_HARMONICS))
    wobble = np.zeros_like(theta)
    for k, w, phi in zip(_HARMONICS, weights, phases):
        wobble += w * np.cos(k * theta + phi)
    return base * (1.0 + wobble)


def _bias_field(rng: np.random.Generator, size: int, amplitude: float) -> np.ndarray:
    if amplitude == 0.0:
        return np.ones((size, size))
    yy, xx = np.mgrid[0:size, 0:size] / size
    field = np.zeros((size, size))
    for _ in range(3):
        u, v = rng.integers(-2, 3, size=2)
        psi = rng.uniform(0.0, 2.0 * np.pi)
        field += rng.uniform(0.3, 1.0) * np.cos(2.0 * np.pi * (u * xx + v * yy) + psi)
    field /= np.abs(field).max()
    return 1.0 + amplitude * field


def _one_phantom(spec: PhantomSpec, index: int) -> Sample:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.seed, index])))
    size = spec.size
    cy, cx = size / 2.0 + rng.uniform(-_CENTER_JITTER, _CENTER_JITTER, size=2) * size
    yy, xx = np.mgrid[0:size, 0:size]
    r = np.hypot(yy - cy, xx - cx)
    theta = np.arctan2(yy - cy, xx - cx)

    radii = [_wobbly_radius(rng, lo, hi, amp, theta, size)
             for (lo, hi), amp in zip(_RADIUS_RANGES, _WOBBLE)]
    label = np.zeros((size, size), dtype=np.uint8)          # BG
    label[r < radii[2]] = 1                                 # CSF ring
    label[r < radii[1]] = 2                                 # GM annulus
    label[r < radii[0]] = 3                                 # WM core

    image = np.asarray(spec.tissue_means, dtype=np.float64)[label]
    image = image * _bias_field(rng, size, spec.bias_amplitude)
    image = gaussian_filter(image, spec.pv_blur_sigma)
    image = image + rng.normal(0.0, spec.noise_sigma, size=image.shape)
    return Sample(image=image, label=label, id=f"{index:05d}")


def generate(spec: PhantomSpec, count: int) -> list[Sample]:
    """Generate `count` phantoms, deterministically from spec.seed."""
    spec.validate()
    if count < 1:
        raise InvalidSpecError(f"count must be >= 1, got {count}")
    return [_one_phantom(spec, i) for i in range(count)]


def boundary_band(label, radius: int) -> np.ndarray:
    """Pixels within Chebyshev distance `radius` of any class transition.

    A pixel is in the band iff some pixel with a different label lies in its
    (2*radius+1)^2 neighborhood.
    """
    label = np.asarray(label)
    band = np.zeros(label.shape, dtype=bool)
    h, w = label.shape
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy == 0 and dx == 0:
                continue
            ys = slice(max(0, dy), min(h, h + dy))
            xs = slice(max(0, dx), min(w, w + dx))
            ys0 = slice(max(0, -dy), min(h, h - dy))
            xs0 = slice(max(0, -dx), min(w, w - dx))
            band[ys0, xs0] |= label[ys0, xs0] != label[ys, xs]
    return band
