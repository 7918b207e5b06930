"""Dataset handling, train/test splitting, and the Adam training loop.

Inputs reach the network one of two ways. With an encode config, each image
is lifted to its (mu, nu, pi) triplet and fed as 3 channels; without one,
the raw image is min-max normalized and fed as 1 channel, so baseline and
encoded runs differ only in the input transform and first-layer width.

Dataset directory format:

    images/<id>.png   16-bit grayscale intensities
    labels/<id>.png   8-bit, pixel value = class id
    dataset.json      {"ids": [...], "num_classes": K}

Epoch log CSV columns: epoch,train_loss,val_loss,val_ac,val_dc,val_iou.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import ifs
from .autodiff import AdamState, Tensor
from .errors import EmptyDatasetError, IfsnetError, InvalidLabelError, ShapeMismatchError
from .metrics import MetricsReport, evaluate
from .nets import ModelGraph


@dataclass
class Sample:
    image: np.ndarray  # 2-D intensities
    label: np.ndarray  # 2-D class ids
    id: str

    def check(self, num_classes: int) -> None:
        if self.image.shape != self.label.shape:
            raise ShapeMismatchError(
                f"sample {self.id}: image {self.image.shape} vs label {self.label.shape}")
        if self.label.min() < 0 or self.label.max() >= num_classes:
            raise InvalidLabelError(
                f"sample {self.id}: label ids outside 0..{num_classes - 1}")


@dataclass
class TrainConfig:
    epochs: int = 100
    early_stop: bool = False
    patience: int = 10
    min_delta: float = 1e-4
    batch_size: int = 2
    lr: float = 1e-3
    split_fraction: float = 0.8
    seed: int = 0
    encode: tuple[ifs.MembershipConfig, ifs.NegationConfig] | None = None


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_ac: float
    val_dc: float
    val_iou: float


def split(dataset: list[Sample], fraction: float, seed: int) -> tuple[list[Sample], list[Sample]]:
    """Deterministic shuffled split; train size = round(fraction * n)."""
    if not dataset:
        raise EmptyDatasetError("cannot split an empty dataset")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    order = np.random.Generator(np.random.PCG64(seed)).permutation(len(dataset))
    n_train = int(round(fraction * len(dataset)))
    train = [dataset[i] for i in order[:n_train]]
    test = [dataset[i] for i in order[n_train:]]
    return train, test


def sample_input(image, encode: tuple | None, constant_policy: str = "error") -> np.ndarray:
    """Network input for one image: (3,H,W) triplet or (1,H,W) normalized raw."""
    if encode is not None:
        m_cfg, n_cfg = encode
        return ifs.encode(image, m_cfg, n_cfg, constant_policy).as_channels().astype(np.float32)
    mu = ifs.membership(image, ifs.MembershipConfig(kind="minmax"), constant_policy)
    return mu[None].astype(np.float32)


def one_hot(label: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((num_classes,) + label.shape, dtype=np.float32)
    for k in range(num_classes):
        out[k][label == k] = 1.0
    return out


def _seed_int(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _combined_loss(model: ModelGraph, x: Tensor, target: Tensor, mode: str,
                   dropout_seed: int) -> Tensor:
    """Cross-entropy of the network output; with deep supervision, the
    unweighted mean over every head's loss."""
    logits, heads = model.forward(x, mode, dropout_seed)
    if not heads:
        return ad.softmax_cross_entropy(logits, target)
    total = ad.softmax_cross_entropy(heads[0], target)
    for h in heads[1:]:
        total = ad.add(total, ad.softmax_cross_entropy(h, target))
    return ad.scale(total, 1.0 / len(heads))


def _batches(n: int, batch_size: int, order=None):
    idx = np.arange(n) if order is None else order
    for start in range(0, n, batch_size):
        yield idx[start:start + batch_size]


def train(model: ModelGraph, train_set: list[Sample], val_set: list[Sample],
          cfg: TrainConfig, adam: AdamState | None = None,
          ) -> tuple[ModelGraph, list[EpochRecord]]:
    """Mini-batch Adam training with optional early stopping.

    Early stopping watches val_loss: no improvement over the best by at
    least min_delta for `patience` consecutive epochs halts training, and
    the best-val-loss parameters are restored either way. The epoch log is
    fully determined by (cfg, data, model seed).
    """
    if not train_set or not val_set:
        raise EmptyDatasetError("train and validation sets must be nonempty")
    k = model.config.num_classes
    for s in train_set + val_set:
        s.check(k)

    shape = train_set[0].image.shape
    if any(s.image.shape != shape for s in train_set + val_set):
        raise ShapeMismatchError("all samples must share one image shape")

    tr_x = np.stack([sample_input(s.image, cfg.encode) for s in train_set])
    tr_t = np.stack([one_hot(s.label, k) for s in train_set])
    va_x = np.stack([sample_input(s.image, cfg.encode) for s in val_set])
    va_t = np.stack([one_hot(s.label, k) for s in val_set])
    va_labels = np.stack([s.label for s in val_set])

    adam = adam if adam is not None else AdamState()
    log: list[EpochRecord] = []
    best_loss = np.inf
    best_snap = model.snapshot()
    stale = 0

    for epoch in range(1, cfg.epochs + 1):
        order = np.random.Generator(
            np.random.PCG64(_seed_int(cfg.seed, epoch))).permutation(len(train_set))
        loss_sum = 0.0
        for step, batch in enumerate(_batches(len(train_set), cfg.batch_size, order)):
            x = Tensor(tr_x[batch])
            t = Tensor(tr_t[batch])
            loss = _combined_loss(model, x, t, "train", _seed_int(cfg.seed, epoch, step))
            ad.zero_grad(model.params)
            ad.backward(loss)
            grads = {name: p.grad for name, p in model.params.items() if p.grad is not None}
            ad.adam_step(model.params, grads, adam, lr=cfg.lr)
            loss_sum += float(loss.data) * len(batch)
        train_loss = loss_sum / len(train_set)

        val_loss, val_pred = _validate(model, va_x, va_t, cfg.batch_size)
        report = evaluate(val_pred, va_labels, k)
        record = EpochRecord(epoch, train_loss, val_loss,
                             report.ac, report.dc, report.iou)
        if not all(np.isfinite(v) for v in
                   (record.train_loss, record.val_loss, record.val_ac,
                    record.val_dc, record.val_iou)):
            raise IfsnetError(f"non-finite value in epoch {epoch} log: {record}")
        log.append(record)

        if val_loss < best_loss - cfg.min_delta:
            best_loss = val_loss
            best_snap = model.snapshot()
            stale = 0
        else:
            stale += 1
            if cfg.early_stop and stale >= cfg.patience:
                break

    if cfg.early_stop:
        model.restore(best_snap)
    return model, log


def _validate(model: ModelGraph, va_x: np.ndarray, va_t: np.ndarray,
              batch_size: int) -> tuple[float, np.ndarray]:
    loss_sum = 0.0
    preds = []
    for batch in _batches(len(va_x), batch_size):
        x = Tensor(va_x[batch])
        t = Tensor(va_t[batch])
        logits, heads = model.forward(x, "eval")
        if heads:
            losses = [float(ad.softmax_cross_entropy(h, t).data) for h in heads]
            loss_sum += float(np.mean(losses)) * len(batch)
        else:
            loss_sum += float(ad.softmax_cross_entropy(logits, t).data) * len(batch)
        preds.append(np.argmax(logits.data, axis=1))
    return loss_sum / len(va_x), np.concatenate(preds)


def predict(model: ModelGraph, image, encode: tuple | None = None) -> np.ndarray:
    """Per-pixel argmax class mask; ties break toward the lower class index."""
    x = Tensor(sample_input(image, encode)[None])
    logits, _ = model.forward(x, "eval")
    return np.argmax(logits.data, axis=1)[0].astype(np.uint8)


def evaluate_model(model: ModelGraph, samples: list[Sample],
                   encode: tuple | None = None, batch_size: int = 8) -> MetricsReport:
    """Pooled metrics of the model over a sample list."""
    if not samples:
        raise EmptyDatasetError("no samples to evaluate")
    k = model.config.num_classes
    for s in samples:
        s.check(k)
    xs = np.stack([sample_input(s.image, encode) for s in samples])
    labels = np.stack([s.label for s in samples])
    preds = []
    for batch in _batches(len(samples), batch_size):
        logits, _ = model.forward(Tensor(xs[batch]), "eval")
        preds.append(np.argmax(logits.data, axis=1))
    return evaluate(np.concatenate(preds), labels, k)


# ---------------------------------------------------------------------------
# dataset directory I/O
# ---------------------------------------------------------------------------

def save_dataset(root, samples: list[Sample], num_classes: int) -> None:
    from . import imgio

    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(parents=True, exist_ok=True)
    for s in samples:
        s.check(num_classes)
        imgio.write_intensity_png(root / "images" / f"{s.id}.png", s.image)
        imgio.write_label_png(root / "labels" / f"{s.id}.png", s.label)
    with open(root / "dataset.json", "w") as fh:
        json.dump({"ids": [s.id for s in samples], "num_classes": num_classes}, fh, indent=2)


def load_dataset(root) -> tuple[list[Sample], int]:
    from . import imgio

    root = Path(root)
    with open(root / "dataset.json") as fh:
        meta = json.load(fh)
    samples = []
    for sid in meta["ids"]:
        image = imgio.read_gray(root / "images" / f"{sid}.png")
        label = imgio.read_gray(root / "labels" / f"{sid}.png").astype(np.int64)
        samples.append(Sample(image=image, label=label, id=sid))
    return samples, int(meta["num_classes"])


def write_epoch_log(path, log: list[EpochRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_ac", "val_dc", "val_iou"])
        for r in log:
            writer.writerow([r.epoch] + [repr(float(v)) for v in
                                         (r.train_loss, r.val_loss, r.val_ac,
                                          r.val_dc, r.val_iou)])


def read_epoch_log(path) -> list[EpochRecord]:
    with open(path, newline="") as fh:
        return [EpochRecord(int(r["epoch"]), float(r["train_loss"]), float(r["val_loss"]),
                            float(r["val_ac"]), float(r["val_dc"]), float(r["val_iou"]))
                for r in csv.DictReader(fh)]
