"""Intuitionistic fuzzy image encoding + from-scratch U-Net / U-Net++.

Lift a grayscale image to (membership, non-membership, hesitation) planes
via Sugeno or Yager negations, feed the triplet to small encoder-decoder
segmentation networks built on a minimal reverse-mode autodiff engine, and
measure whether the encoding helps on boundary-ambiguous images.
"""

from .errors import (
    ConstantImageError,
    ConstraintViolationError,
    EmptyDatasetError,
    IfsnetError,
    InvalidBinsError,
    InvalidConfigError,
    InvalidImageError,
    InvalidLabelError,
    InvalidPError,
    InvalidSpecError,
    NotScalarError,
    OddSpatialDimError,
    ShapeMismatchError,
)
from .ifs import (
    EPS,
    Histogram,
    IfsImage,
    MembershipConfig,
    NegationConfig,
    encode,
    hesitation,
    membership,
    negation,
    plane_histogram,
)
from .autodiff import AdamState, Tensor, adam_step, backward, zero_grad
from .nets import ArchConfig, ModelGraph, build
from .metrics import MetricsReport, dice_iou_identity_check, evaluate
from .phantom import NUM_CLASSES, PhantomSpec, boundary_band, generate
from .training import (
    EpochRecord,
    Sample,
    TrainConfig,
    evaluate_model,
    load_dataset,
    predict,
    save_dataset,
    split,
    train,
)
from .checkpoint import load_checkpoint, load_model, save_checkpoint, save_model

__version__ = "0.1.0"
