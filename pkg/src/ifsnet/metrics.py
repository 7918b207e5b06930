"""Segmentation quality metrics: pixel accuracy, Dice coefficient, IoU.

Per class k over predicted mask P and truth mask T:

    Dice_k = 2 |P_k ∩ T_k| / (|P_k| + |T_k|)
    IoU_k  =   |P_k ∩ T_k| / |P_k ∪ T_k|

Aggregates are macro means over the classes present in either mask; a class
absent from both is skipped rather than scored 1, so slices missing a tissue
do not inflate the average. Because scores on brain-like data are dominated
by background, the report also carries foreground-only aggregates (class 0
excluded) for comparison.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidLabelError, ShapeMismatchError


@dataclass
class ClassScore:
    class_id: int
    dice: float
    iou: float
    support: int  # truth pixel count


@dataclass
class MetricsReport:
    ac: float
    dc: float
    iou: float
    fg_dc: float
    fg_iou: float
    per_class: list[ClassScore]

    def to_csv_row(self) -> str:
        return ",".join(repr(v) for v in (self.ac, self.dc, self.iou, self.fg_dc, self.fg_iou))

    @staticmethod
    def csv_header() -> str:
        return "ac,dc,iou,fg_dc,fg_iou"

    def to_json(self) -> str:
        return json.dumps({
            "ac": self.ac,
            "dc": self.dc,
            "iou": self.iou,
            "foreground_only": {"dc": self.fg_dc, "iou": self.fg_iou},
            "per_class": [
                {"class": c.class_id, "dice": c.dice, "iou": c.iou, "support": c.support}
                for c in self.per_class
            ],
        }, indent=2)


def evaluate(pred, truth, num_classes: int) -> MetricsReport:
    """Score a predicted label mask against ground truth."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ShapeMismatchError(f"pred shape {pred.shape} != truth shape {truth.shape}")
    for name, mask in (("pred", pred), ("truth", truth)):
        if mask.min() < 0 or mask.max() >= num_classes:
            raise InvalidLabelError(
                f"{name} contains ids outside 0..{num_classes - 1}: "
                f"range [{mask.min()}, {mask.max()}]")

    confusion = np.bincount(
        truth.ravel().astype(np.int64) * num_classes + pred.ravel().astype(np.int64),
        minlength=num_classes * num_classes,
    ).reshape(num_classes, num_classes)

    ac = float(np.trace(confusion)) / pred.size
    per_class: list[ClassScore] = []
    for k in range(num_classes):
        tp = int(confusion[k, k])
        t_k = int(confusion[k, :].sum())
        p_k = int(confusion[:, k].sum())
        union = t_k + p_k - tp
        if union == 0:  # class absent from both masks: contributes nothing
            continue
        dice = 2.0 * tp / (t_k + p_k)
        iou = tp / union
        per_class.append(ClassScore(class_id=k, dice=dice, iou=iou, support=t_k))

    def macro(scores):
        return float(np.mean(scores)) if scores else 0.0

    fg = [c for c in per_class if c.class_id != 0]
    return MetricsReport(
        ac=ac,
        dc=macro([c.dice for c in per_class]),
        iou=macro([c.iou for c in per_class]),
        fg_dc=macro([c.dice for c in fg]),
        fg_iou=macro([c.iou for c in fg]),
        per_class=per_class,
    )


def dice_iou_identity_check(report: MetricsReport, tol: float = 1e-9) -> bool:
    """Verify Dice = 2*IoU / (1 + IoU) per class within tol."""
    return all(abs(c.dice - 2.0 * c.iou / (1.0 + c.iou)) <= tol for c in report.per_class)
