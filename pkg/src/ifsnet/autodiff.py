"""Minimal dense tensor engine with reverse-mode automatic differentiation.

Covers exactly the primitives the segmentation networks need: 3x3
same-padding convolution (im2col + one GEMM), 1x1 convolution heads, ReLU,
2x2 max pooling, 2x nearest-neighbor upsampling, channel concatenation,
batch norm, inverted dropout, pixelwise softmax cross-entropy, and a few
elementwise helpers used by tests.

Each op returns a new Tensor whose backward closure pushes gradients to its
parents; backward(loss) walks the recorded graph once in reverse
topological order. Gradients accumulate into leaf .grad buffers, so calling
backward on several losses (or twice on one) sums their contributions.

Network math is ordinarily single precision; every op is dtype-generic, and
the gradient-check tests run the same code in double precision.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    InvalidPError,
    NotScalarError,
    OddSpatialDimError,
    ShapeMismatchError,
)

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
LOG_FLOOR = 1e-12


class Tensor:
    """Dense N-d array, optionally participating in the gradient tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _result(data, parents, backward_fn) -> Tensor:
    """Wrap an op result, recording parents only when something is tracked."""
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into .grad for every tracked leaf.

    loss must be scalar. Revisiting the same graph accumulates on top of
    existing leaf gradients; reset with zero_grad between optimizer steps.
    """
    if loss.data.size != 1:
        raise NotScalarError(f"backward needs a scalar, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return

    # Iterative post-order DFS; every node enters `order` exactly once.
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        gout = grads.pop(id(node), None)
        if gout is None:
            continue
        if node._backward is None:
            # Leaf: expose (and accumulate) the gradient.
            node.grad = gout if node.grad is None else node.grad + gout
            continue
        for parent, g in zip(node._parents, node._backward(gout)):
            if g is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = g if key not in grads else grads[key] + g


def zero_grad(params) -> None:
    for p in (params.values() if isinstance(params, dict) else params):
        p.grad = None


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _im2col3(x: np.ndarray) -> np.ndarray:
    """(N,C,H,W) -> (N, C*9, H*W) patch matrix for a 3x3 zero-padded conv."""
    n, c, h, w = x.shape
    xp = np.zeros((n, c, h + 2, w + 2), dtype=x.dtype)
    xp[:, :, 1:h + 1, 1:w + 1] = x
    cols = np.empty((n, c, 3, 3, h, w), dtype=x.dtype)
    for ki in range(3):
        for kj in range(3):
            cols[:, :, ki, kj] = xp[:, :, ki:ki + h, kj:kj + w]
    return cols.reshape(n, c * 9, h * w)


def _col2im3(dcols: np.ndarray, shape) -> np.ndarray:
    """Adjoint of _im2col3: scatter-add patch gradients back onto the image."""
    n, c, h, w = shape
    d6 = dcols.reshape(n, c, 3, 3, h, w)
    dxp = np.zeros((n, c, h + 2, w + 2), dtype=dcols.dtype)
    for ki in range(3):
        for kj in range(3):
            dxp[:, :, ki:ki + h, kj:kj + w] += d6[:, :, ki, kj]
    return dxp[:, :, 1:h + 1, 1:w + 1]


def conv2d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """3x3 cross-correlation with same zero padding.

    x (N,Cin,H,W) * weight (Cout,Cin,3,3) + bias (Cout,) -> (N,Cout,H,W).
    """
    xd, wd, bd = x.data, weight.data, bias.data
    if xd.ndim != 4 or wd.ndim != 4 or wd.shape[2:] != (3, 3):
        raise ShapeMismatchError(f"conv2d expects NCHW input and (Cout,Cin,3,3) weight, "
                                 f"got {xd.shape} and {wd.shape}")
    n, cin, h, w = xd.shape
    cout = wd.shape[0]
    if wd.shape[1] != cin or bd.shape != (cout,):
        raise ShapeMismatchError(f"conv2d channel mismatch: x {xd.shape}, weight {wd.shape}, "
                                 f"bias {bd.shape}")

    cols = _im2col3(xd)                       # (N, Cin*9, H*W)
    wmat = wd.reshape(cout, cin * 9)
    out = (np.matmul(wmat, cols) + bd[:, None]).reshape(n, cout, h, w)

    def backward_fn(gout):
        g2 = gout.reshape(n, cout, h * w)
        gx = _col2im3(np.matmul(wmat.T, g2), xd.shape) if x.requires_grad else None
        gw = (np.matmul(g2, cols.swapaxes(1, 2)).sum(axis=0).reshape(wd.shape)
              if weight.requires_grad else None)
        gb = g2.sum(axis=(0, 2)) if bias.requires_grad else None
        return gx, gw, gb

    return _result(out, (x, weight, bias), backward_fn)


def conv1x1(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Pointwise convolution: weight (Cout,Cin) mixing channels per pixel."""
    xd, wd, bd = x.data, weight.data, bias.data
    if xd.ndim != 4 or wd.ndim != 2 or wd.shape[1] != xd.shape[1] or bd.shape != (wd.shape[0],):
        raise ShapeMismatchError(f"conv1x1 shapes: x {xd.shape}, weight {wd.shape}, bias {bd.shape}")
    out = np.tensordot(wd, xd, axes=([1], [1])).transpose(1, 0, 2, 3) \
        + bd[:, None, None]

    def backward_fn(gout):
        gx = np.tensordot(wd.T, gout, axes=([1], [1])).transpose(1, 0, 2, 3) \
            if x.requires_grad else None
        gw = np.tensordot(gout, xd, axes=([0, 2, 3], [0, 2, 3])) if weight.requires_grad else None
        gb = gout.sum(axis=(0, 2, 3)) if bias.requires_grad else None
        return (np.ascontiguousarray(gx) if gx is not None else None), gw, gb

    return _result(np.ascontiguousarray(out), (x, weight, bias), backward_fn)


# ---------------------------------------------------------------------------
# spatial ops
# ---------------------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0)

    def backward_fn(gout):
        return (gout * (x.data > 0),)

    return _result(out, (x,), backward_fn)


def max_pool2x2(x: Tensor) -> Tensor:
    """Halve H and W by taking the max of each 2x2 window (first max wins ties)."""
    n, c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise OddSpatialDimError(f"max_pool2x2 needs even spatial dims, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    windows = np.ascontiguousarray(
        x.data.reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5)
    ).reshape(n, c, h2, w2, 4)
    idx = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]

    def backward_fn(gout):
        gwin = np.zeros_like(windows)
        np.put_along_axis(gwin, idx[..., None], gout[..., None], axis=-1)
        gx = gwin.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
        return (np.ascontiguousarray(gx),)

    return _result(out, (x,), backward_fn)


def upsample2x(x: Tensor) -> Tensor:
    """Double H and W by 2x2 nearest-neighbor replication."""
    if x.data.ndim != 4:
        raise ShapeMismatchError(f"upsample2x expects NCHW, got {x.data.shape}")
    n, c, h, w = x.data.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)

    def backward_fn(gout):
        return (gout.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)

    return _result(out, (x,), backward_fn)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 4 or b.data.ndim != 4 or a.data.shape[0] != b.data.shape[0] \
            or a.data.shape[2:] != b.data.shape[2:]:
        raise ShapeMismatchError(f"concat_channels: {a.data.shape} vs {b.data.shape}")
    ca = a.data.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)

    def backward_fn(gout):
        return gout[:, :ca], gout[:, ca:]

    return _result(out, (a, b), backward_fn)


# ---------------------------------------------------------------------------
# normalization / regularization
# ---------------------------------------------------------------------------

def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor,
               running_mean: np.ndarray, running_var: np.ndarray,
               mode: str = "train") -> Tensor:
    """Per-channel batch normalization with affine parameters.

    Train mode normalizes by the batch's biased statistics and folds them
    into the running buffers (momentum 0.1, in place); eval mode normalizes
    by the running buffers.
    """
    xd = x.data
    c = xd.shape[1]
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise ShapeMismatchError(f"batch_norm affine params must have shape ({c},)")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be train or eval, got {mode!r}")

    if mode == "train":
        mean = xd.mean(axis=(0, 2, 3))
        var = xd.var(axis=(0, 2, 3))
        running_mean *= 1.0 - BN_MOMENTUM
        running_mean += BN_MOMENTUM * mean.astype(running_mean.dtype)
        running_var *= 1.0 - BN_MOMENTUM
        running_var += BN_MOMENTUM * var.astype(running_var.dtype)
    else:
        mean = running_mean.astype(xd.dtype)
        var = running_var.astype(xd.dtype)

    inv_std = 1.0 / np.sqrt(var + np.asarray(BN_EPS, dtype=xd.dtype))
    xhat = (xd - mean[:, None, None]) * inv_std[:, None, None]
    out = gamma.data[:, None, None] * xhat + beta.data[:, None, None]

    def backward_fn(gout):
        ggamma = (gout * xhat).sum(axis=(0, 2, 3)) if gamma.requires_grad else None
        gbeta = gout.sum(axis=(0, 2, 3)) if beta.requires_grad else None
        if not x.requires_grad:
            return None, ggamma, gbeta
        gxhat = gout * gamma.data[:, None, None]
        if mode == "eval":
            return gxhat * inv_std[:, None, None], ggamma, gbeta
        m = xd.shape[0] * xd.shape[2] * xd.shape[3]
        sum_g = gxhat.sum(axis=(0, 2, 3), keepdims=True)
        sum_gx = (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
        gx = (inv_std[:, None, None] / m) * (m * gxhat - sum_g - xhat * sum_gx)
        return gx, ggamma, gbeta

    return _result(out, (x, gamma, beta), backward_fn)


def dropout(x: Tensor, p: float, mode: str = "train", rng_seed: int = 0) -> Tensor:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    The mask is a pure function of rng_seed; eval mode (or p = 0) is identity.
    """
    if not 0.0 <= p < 1.0:
        raise InvalidPError(f"dropout p must be in [0, 1), got {p}")
    if mode == "eval" or p == 0.0:
        def backward_id(gout):
            return (gout,)
        return _result(x.data, (x,), backward_id)

    rng = np.random.Generator(np.random.PCG64(rng_seed))
    keep = rng.random(x.data.shape) >= p
    scaled_mask = keep.astype(x.data.dtype) / np.asarray(1.0 - p, dtype=x.data.dtype)
    out = x.data * scaled_mask

    def backward_fn(gout):
        return (gout * scaled_mask,)

    return _result(out, (x,), backward_fn)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def softmax_cross_entropy(logits: Tensor, onehot: Tensor) -> Tensor:
    """Mean per-pixel categorical cross-entropy over a (N,K,H,W) logit map.

    Softmax over the class axis with max-subtraction; log probabilities are
    floored at log(1e-12).
    """
    zd, td = logits.data, onehot.data
    if zd.shape != td.shape or zd.ndim != 4:
        raise ShapeMismatchError(f"softmax_cross_entropy: logits {zd.shape} vs targets {td.shape}")
    n, _, h, w = zd.shape
    m = n * h * w
    zmax = zd.max(axis=1, keepdims=True)
    ez = np.exp(zd - zmax)
    denom = ez.sum(axis=1, keepdims=True)
    prob = ez / denom
    logp = np.maximum((zd - zmax) - np.log(denom), np.log(LOG_FLOOR))
    loss = np.asarray(-(td * logp).sum() / m, dtype=zd.dtype)

    def backward_fn(gout):
        gz = (prob - td) * (gout / m) if logits.requires_grad else None
        gt = -logp * (gout / m) if onehot.requires_grad else None
        return gz, gt

    return _result(loss, (logits, onehot), backward_fn)


def softmax(logits: Tensor) -> np.ndarray:
    """Class probabilities of a logit map (plain array, no tape)."""
    zd = logits.data
    ez = np.exp(zd - zd.max(axis=1, keepdims=True))
    return ez / ez.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# elementwise helpers
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError(f"add: {a.data.shape} vs {b.data.shape}")

    def backward_fn(gout):
        return gout, gout

    return _result(a.data + b.data, (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError(f"mul: {a.data.shape} vs {b.data.shape}")

    def backward_fn(gout):
        return gout * b.data, gout * a.data

    return _result(a.data * b.data, (a, b), backward_fn)


def scale(x: Tensor, c: float) -> Tensor:
    def backward_fn(gout):
        return (gout * c,)

    return _result(x.data * c, (x,), backward_fn)


def sum_all(x: Tensor) -> Tensor:
    def backward_fn(gout):
        return (np.broadcast_to(gout, x.data.shape).astype(x.data.dtype),)

    return _result(np.asarray(x.data.sum(), dtype=x.data.dtype), (x,), backward_fn)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class AdamState:
    """Per-parameter first/second moment buffers plus the shared step count."""

    def __init__(self):
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t: int = 0


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: AdamState,
              lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One Adam update with bias correction; parameters with zero gradient stay put.

    Writes fresh arrays into each Tensor's .data rather than mutating in
    place, so arrays captured by an existing tape stay valid.
    """
    state.t += 1
    t = state.t
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
