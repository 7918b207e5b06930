"""U-Net and U-Net++ graphs over the autodiff engine.

Both families share the conv block [3x3 conv -> batch norm -> ReLU]; U-Net++
adds dropout after each activation. Decoder upsampling is 2x nearest-neighbor
replication followed by a learned 3x3 conv that halves the channel count
(avoids checkerboard artifacts of strided transposed convs).

U-Net (depth d): encoder levels 0..d-1 with channels base*2^i, a bottleneck
at base*2^d, then a mirrored decoder whose level-i block consumes the
upsampled deeper feature concatenated with the level-i skip. Final 1x1 conv
maps to num_classes logits.

U-Net++ (depth d): backbone nodes X[i][0] (i = 0..d-1, d-1 poolings) plus
nested nodes X[i][j] for i+j <= d-1. Node X[i][j] receives the upsampled
X[i+1][j-1] concatenated with every X[i][0..j-1] (dense skips). With deep
supervision a 1x1 head hangs off every X[0][j], j = 1..d-1; the deepest head
is the inference output.

Parameters are drawn from independent per-name RNG streams, so two builds
with the same seed that differ only in in_channels share every parameter
except the first conv.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InvalidConfigError, ShapeMismatchError

FAMILIES = ("unet", "unetpp")


@dataclass
class ArchConfig:
    family: str = "unet"
    depth: int = 4
    base_filters: int = 32
    in_channels: int = 1
    num_classes: int = 4
    dropout_p: float = 0.2        # unetpp only; unet never applies dropout
    deep_supervision: bool = True  # unetpp only

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise InvalidConfigError(f"unknown family {self.family!r}")
        if self.depth < 2:
            raise InvalidConfigError(f"depth must be >= 2, got {self.depth}")
        if self.base_filters < 1:
            raise InvalidConfigError(f"base_filters must be >= 1, got {self.base_filters}")
        if self.in_channels not in (1, 3):
            raise InvalidConfigError(f"in_channels must be 1 or 3, got {self.in_channels}")
        if self.num_classes < 2:
            raise InvalidConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")


def _param_rng(seed: int, name: str) -> np.random.Generator:
    # Independent stream per parameter name: shapes of other parameters
    # cannot shift this one's draw.
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed, zlib.crc32(name.encode())])))


class _DropoutSeeder:
    """Deterministic per-site dropout seeds derived from one forward seed."""

    def __init__(self, seed: int):
        self._ss = np.random.SeedSequence(seed)

    def next(self) -> int:
        # spawn() advances the sequence's spawn key, so successive calls
        # yield distinct, reproducible children.
        return int(self._ss.spawn(1)[0].generate_state(1)[0])


class ModelGraph:
    """Built network: named parameters, batch-norm buffers, forward pass."""

    def __init__(self, config: ArchConfig, seed: int, dtype=np.float32):
        config.validate()
        self.config = config
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.params: dict[str, Tensor] = {}
        self.bn_stats: dict[str, np.ndarray] = {}
        if config.family == "unet":
            self._build_unet()
        else:
            self._build_unetpp()

    # -- construction -------------------------------------------------------

    def _he_conv(self, name: str, cout: int, cin: int, k: int = 3) -> None:
        rng = _param_rng(self.seed, name + ".weight")
        fan_in = cin * k * k
        shape = (cout, cin, k, k) if k == 3 else (cout, cin)
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape).astype(self.dtype)
        self.params[name + ".weight"] = Tensor(w, requires_grad=True)
        self.params[name + ".bias"] = Tensor(np.zeros(cout, dtype=self.dtype),
                                             requires_grad=True)

    def _bn(self, name: str, c: int) -> None:
        self.params[name + ".gamma"] = Tensor(np.ones(c, dtype=self.dtype), requires_grad=True)
        self.params[name + ".beta"] = Tensor(np.zeros(c, dtype=self.dtype), requires_grad=True)
        self.bn_stats[name + ".running_mean"] = np.zeros(c, dtype=self.dtype)
        self.bn_stats[name + ".running_var"] = np.ones(c, dtype=self.dtype)

    def _block(self, name: str, cin: int, cout: int) -> None:
        self._he_conv(name + ".conv1", cout, cin)
        self._bn(name + ".bn1", cout)
        self._he_conv(name + ".conv2", cout, cout)
        self._bn(name + ".bn2", cout)

    def _build_unet(self) -> None:
        cfg = self.config
        chan = [cfg.base_filters * 2 ** i for i in range(cfg.depth + 1)]
        prev = cfg.in_channels
        for i in range(cfg.depth):
            self._block(f"enc{i}", prev, chan[i])
            prev = chan[i]
        self._block("bottleneck", chan[cfg.depth - 1], chan[cfg.depth])
        for i in reversed(range(cfg.depth)):
            self._he_conv(f"dec{i}.up", chan[i], chan[i + 1])
            # decoder block input = upsampled (chan[i]) + skip (chan[i])
            self._block(f"dec{i}", 2 * chan[i], chan[i])
        self._he_conv("head", cfg.num_classes, chan[0], k=1)

    def _build_unetpp(self) -> None:
        cfg = self.config
        chan = [cfg.base_filters * 2 ** i for i in range(cfg.depth)]
        prev = cfg.in_channels
        for i in range(cfg.depth):
            self._block(f"x{i}0", prev, chan[i])
            prev = chan[i]
        for j in range(1, cfg.depth):
            for i in range(cfg.depth - j):
                self._he_conv(f"up{i}{j}", chan[i], chan[i + 1])
                # dense input: X[i][0..j-1] (j * chan[i]) + upsampled (chan[i])
                self._block(f"x{i}{j}", (j + 1) * chan[i], chan[i])
        head_js = range(1, cfg.depth) if cfg.deep_supervision else [cfg.depth - 1]
        for j in head_js:
            self._he_conv(f"head{j}", cfg.num_classes, chan[0], k=1)

    # -- forward ------------------------------------------------------------

    def _run_conv(self, name: str, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.params[name + ".weight"], self.params[name + ".bias"])

    def _run_bn(self, name: str, x: Tensor, mode: str) -> Tensor:
        return ad.batch_norm(x, self.params[name + ".gamma"], self.params[name + ".beta"],
                             self.bn_stats[name + ".running_mean"],
                             self.bn_stats[name + ".running_var"], mode)

    def _run_block(self, name: str, x: Tensor, mode: str,
                   seeder: _DropoutSeeder | None) -> Tensor:
        for sub in ("1", "2"):
            x = self._run_conv(name + ".conv" + sub, x)
            x = self._run_bn(name + ".bn" + sub, x, mode)
            x = ad.relu(x)
            if seeder is not None:
                x = ad.dropout(x, self.config.dropout_p, mode, seeder.next())
        return x

    def forward(self, x: Tensor, mode: str = "train",
                dropout_seed: int = 0) -> tuple[Tensor, list[Tensor]]:
        """Run the network; returns (logits, supervision_heads).

        For U-Net and non-supervised U-Net++ the head list is empty. With
        deep supervision it holds one logit map per X[0][j], j = 1..depth-1,
        the last of which is the returned logits.
        """
        cfg = self.config
        xd = x.data
        if xd.ndim != 4 or xd.shape[1] != cfg.in_channels:
            raise ShapeMismatchError(
                f"expected (N, {cfg.in_channels}, H, W) input, got {xd.shape}")
        if xd.shape[2] % 2 ** cfg.depth or xd.shape[3] % 2 ** cfg.depth:
            raise ShapeMismatchError(
                f"H, W must be divisible by {2 ** cfg.depth}, got {xd.shape[2:]}")
        if cfg.family == "unet":
            return self._forward_unet(x, mode)
        return self._forward_unetpp(x, mode, dropout_seed)

    def _forward_unet(self, x: Tensor, mode: str) -> tuple[Tensor, list[Tensor]]:
        cfg = self.config
        skips = []
        h = x
        for i in range(cfg.depth):
            h = self._run_block(f"enc{i}", h, mode, None)
            skips.append(h)
            h = ad.max_pool2x2(h)
        h = self._run_block("bottleneck", h, mode, None)
        for i in reversed(range(cfg.depth)):
            h = self._run_conv(f"dec{i}.up", ad.upsample2x(h))
            h = self._run_block(f"dec{i}", ad.concat_channels(h, skips[i]), mode, None)
        logits = ad.conv1x1(h, self.params["head.weight"], self.params["head.bias"])
        return logits, []

    def _forward_unetpp(self, x: Tensor, mode: str,
                        dropout_seed: int) -> tuple[Tensor, list[Tensor]]:
        cfg = self.config
        seeder = _DropoutSeeder(dropout_seed) if cfg.dropout_p > 0 else None
        nodes: dict[tuple[int, int], Tensor] = {}
        h = x
        for i in range(cfg.depth):
            if i > 0:
                h = ad.max_pool2x2(h)
            h = self._run_block(f"x{i}0", h, mode, seeder)
            nodes[(i, 0)] = h
        for j in range(1, cfg.depth):
            for i in range(cfg.depth - j):
                up = self._run_conv(f"up{i}{j}", ad.upsample2x(nodes[(i + 1, j - 1)]))
                merged = nodes[(i, 0)]
                for jj in range(1, j):
                    merged = ad.concat_channels(merged, nodes[(i, jj)])
                merged = ad.concat_channels(merged, up)
                nodes[(i, j)] = self._run_block(f"x{i}{j}", merged, mode, seeder)

        def head(j: int) -> Tensor:
            return ad.conv1x1(nodes[(0, j)], self.params[f"head{j}.weight"],
                              self.params[f"head{j}.bias"])

        if cfg.deep_supervision:
            heads = [head(j) for j in range(1, cfg.depth)]
            return heads[-1], heads
        return head(cfg.depth - 1), []

    # -- bookkeeping --------------------------------------------------------

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        """All named arrays defining the model state (params + BN buffers)."""
        out = {name: p.data for name, p in self.params.items()}
        out.update(self.bn_stats)
        return out

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.state_arrays().items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            p.data = snap[name].copy()
        for name in self.bn_stats:
            self.bn_stats[name][...] = snap[name]


def build(cfg: ArchConfig, seed: int = 0, dtype=np.float32) -> ModelGraph:
    """Initialize a model: He-normal conv weights, zero biases, identity BN."""
    return ModelGraph(cfg, seed, dtype)
