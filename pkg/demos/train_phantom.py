"""Train a small IFS U-Net on phantoms and compare against the raw baseline.

Desk-scale version of the main experiment: same data, same seeds, the only
difference between the two runs is the input representation (1-channel
min-max vs 3-channel triplet). Takes a few minutes on CPU.

Run:  python3 demos/train_phantom.py
"""

import time

import numpy as np

from ifsnet import MembershipConfig, NegationConfig
from ifsnet.nets import ArchConfig, build
from ifsnet.phantom import PhantomSpec, generate
from ifsnet.training import TrainConfig, evaluate_model, split, train

data = generate(PhantomSpec(size=64, pv_blur_sigma=2.0, noise_sigma=12.0, seed=99), 80)
train_set, test_set = split(data, 0.8, seed=0)
print(f"{len(train_set)} train / {len(test_set)} test phantoms")

encodings = {
    "baseline (raw)": None,
    "IFS sugeno lam=2.0": (MembershipConfig(kind="minmax"),
                           NegationConfig(kind="sugeno", lam=2.0)),
}

for name, encode in encodings.items():
    arch = ArchConfig(family="unet", depth=3, base_filters=16,
                      in_channels=1 if encode is None else 3, num_classes=4)
    cfg = TrainConfig(epochs=12, batch_size=8, lr=1e-3, seed=0, encode=encode)
    t0 = time.time()
    model, log = train(build(arch, seed=0), train_set, test_set, cfg)
    report = evaluate_model(model, test_set, encode=encode)
    print(f"{name:22s} dice={report.dc:.4f} iou={report.iou:.4f} "
          f"ac={report.ac:.4f} ({time.time() - t0:.0f}s, "
          f"final val loss {log[-1].val_loss:.4f})")
