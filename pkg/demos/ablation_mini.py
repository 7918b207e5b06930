"""Miniature parameter sweep: a few lambda/alpha values, tiny phantoms.

Produces the same artifacts as the full `ifsnet ablate` command (results
CSV, summary CSV, bar-chart SVGs) in about a minute, and prints the best
cell next to the corresponding published reference scores.

Run:  python3 demos/ablation_mini.py
"""

from ifsnet.ablation import (
    AblationPlan,
    best_published_cell,
    best_summary_cell,
    load_published,
    run_ablation,
    summarize,
)
from ifsnet.nets import ArchConfig
from ifsnet.phantom import PhantomSpec, generate
from ifsnet.training import TrainConfig, split

data = generate(PhantomSpec(size=32, pv_blur_sigma=1.0, noise_sigma=8.0, seed=5), 40)
train_set, test_set = split(data, 0.8, seed=0)

plan = AblationPlan(
    families=("unet",),
    sugeno_lambdas=(0.5, 2.0),
    yager_alphas=(0.4,),
    repeats=2,
    train_cfg=TrainConfig(epochs=10, batch_size=8, lr=1e-3, seed=0),
    arch=ArchConfig(family="unet", depth=3, base_filters=8, num_classes=4),
)

rows, failures = run_ablation(plan, train_set, test_set, "ablation_mini_out")
print(f"{len(rows)} runs, {len(failures)} failures -> ablation_mini_out/")

summary = summarize(rows)
for entry in summary:
    tag = f"{entry['negation']} {entry['param']}".strip() or "baseline"
    print(f"  {tag:14s} dice = {entry['dc_mean']:.4f} +/- {entry['dc_std']:.4f}")

best = best_summary_cell(summary, "unet", "dc")
print(f"best local cell: {best['negation']} {best['param']} "
      f"(dice {best['dc_mean']:.4f})")

published = load_published("sugeno_unet")
param, value = best_published_cell(published, "IBSR", "ac")
print(f"best published sugeno U-Net cell on IBSR: lambda={param} (AC {value})")
