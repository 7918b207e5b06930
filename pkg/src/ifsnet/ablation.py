"""Ablation sweeps over the negation parameter grids, plus chart output.

A sweep trains, per family, an un-encoded baseline and one encoded run per
grid point (lambda for sugeno, alpha for yager), each repeated with
different training seeds, then scores the held-out set. Results go to CSV
(one row per run), a mean +/- std summary, and one grouped bar chart SVG
per (family, negation, metric). Failed cells are logged to failures.csv and
do not abort the sweep.

The published/ data files carry previously reported reference scores
(transcribed verbatim, not produced by this code; internally inconsistent
cells are flagged suspect). They exist for comparison plotting and for the
best-cell extraction check.
"""

from __future__ import annotations

import csv
import importlib.resources
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .ifs import MembershipConfig, NegationConfig
from .nets import ArchConfig, build
from .training import Sample, TrainConfig, evaluate_model, train

DEFAULT_LAMBDAS = (0.5, 0.8, 0.9, 1.0, 1.2, 1.4, 1.5, 2.0, 2.5)
DEFAULT_ALPHAS = (0.1, 0.2, 0.4, 0.6, 0.8, 0.9)

RESULT_COLUMNS = ("family", "negation", "param", "repeat", "ac", "dc", "iou")


@dataclass
class AblationPlan:
    families: tuple[str, ...] = ("unet", "unetpp")
    baselines: bool = True
    sugeno_lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    yager_alphas: tuple[float, ...] = DEFAULT_ALPHAS
    repeats: int = 3
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)
    membership: MembershipConfig = field(default_factory=MembershipConfig)

    def cells(self) -> list[tuple[str, NegationConfig | None]]:
        out: list[tuple[str, NegationConfig | None]] = []
        for family in self.families:
            if self.baselines:
                out.append((family, None))
            for lam in self.sugeno_lambdas:
                out.append((family, NegationConfig(kind="sugeno", lam=lam)))
            for alpha in self.yager_alphas:
                out.append((family, NegationConfig(kind="yager", alpha=alpha)))
        return out


@dataclass
class AblationRow:
    family: str
    negation: str  # "sugeno" / "yager" / "" for baseline
    param: str     # lambda or alpha as text, "" for baseline
    repeat: int
    ac: float
    dc: float
    iou: float


def _seed_int(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def run_cell(train_set: list[Sample], test_set: list[Sample], family: str,
             negation: NegationConfig | None, plan: AblationPlan,
             repeat: int) -> AblationRow:
    """Train one configuration with the repeat's seed and score the test set."""
    encode = None if negation is None else (plan.membership, negation)
    arch = replace(plan.arch, family=family,
                   in_channels=1 if encode is None else 3)
    run_seed = _seed_int(plan.train_cfg.seed, repeat)
    cfg = replace(plan.train_cfg, seed=run_seed, encode=encode)
    model = build(arch, seed=run_seed)
    model, _ = train(model, train_set, test_set, cfg)
    report = evaluate_model(model, test_set, encode=encode)
    return AblationRow(
        family=family,
        negation="" if negation is None else negation.kind,
        param="" if negation is None else repr(
            negation.lam if negation.kind == "sugeno" else negation.alpha),
        repeat=repeat,
        ac=report.ac, dc=report.dc, iou=report.iou,
    )


def _run_cell_args(args):
    return run_cell(*args)


def run_ablation(plan: AblationPlan, train_set: list[Sample], test_set: list[Sample],
                 out_dir, jobs: int = 1) -> tuple[list[AblationRow], list[tuple]]:
    """Run the full sweep; returns (rows, failures) and writes all artifacts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(train_set, test_set, family, negation, plan, repeat)
             for family, negation in plan.cells()
             for repeat in range(plan.repeats)]

    rows: list[AblationRow] = []
    failures: list[tuple] = []

    def keep(task, outcome):
        _, _, family, negation, _, repeat = task
        if isinstance(outcome, Exception):
            failures.append((family,
                             "" if negation is None else negation.kind,
                             "" if negation is None else repr(
                                 negation.lam if negation.kind == "sugeno" else negation.alpha),
                             repeat, f"{type(outcome).__name__}: {outcome}"))
        else:
            rows.append(outcome)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_cell_args, t) for t in tasks]
            for task, fut in zip(tasks, futures):
                try:
                    keep(task, fut.result())
                except Exception as exc:  # noqa: BLE001 - cell isolation
                    keep(task, exc)
    else:
        for task in tasks:
            try:
                keep(task, _run_cell_args(task))
            except Exception as exc:  # noqa: BLE001 - cell isolation
                keep(task, exc)

    write_results_csv(out_dir / "results.csv", rows)
    write_summary_csv(out_dir / "summary.csv", summarize(rows))
    if failures:
        with open(out_dir / "failures.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["family", "negation", "param", "repeat", "error"])
            writer.writerows(failures)
    write_charts(rows, out_dir)
    return rows, failures


# ---------------------------------------------------------------------------
# CSV round-trip
# ---------------------------------------------------------------------------

def write_results_csv(path, rows: list[AblationRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for r in rows:
            writer.writerow([r.family, r.negation, r.param, r.repeat,
                             repr(r.ac), repr(r.dc), repr(r.iou)])


def read_results_csv(path) -> list[AblationRow]:
    with open(path, newline="") as fh:
        return [AblationRow(r["family"], r["negation"], r["param"], int(r["repeat"]),
                            float(r["ac"]), float(r["dc"]), float(r["iou"]))
                for r in csv.DictReader(fh)]


def summarize(rows: list[AblationRow]) -> list[dict]:
    """Mean +/- std per (family, negation, param) cell, in first-seen order."""
    groups: dict[tuple, list[AblationRow]] = {}
    for r in rows:
        groups.setdefault((r.family, r.negation, r.param), []).append(r)
    out = []
    for (family, negation, param), members in groups.items():
        entry = {"family": family, "negation": negation, "param": param,
                 "n": len(members)}
        for metric in ("ac", "dc", "iou"):
            vals = np.array([getattr(m, metric) for m in members], dtype=np.float64)
            entry[f"{metric}_mean"] = float(vals.mean())
            entry[f"{metric}_std"] = float(vals.std(ddof=0))
        out.append(entry)
    return out


SUMMARY_COLUMNS = ("family", "negation", "param", "n",
                   "ac_mean", "ac_std", "dc_mean", "dc_std", "iou_mean", "iou_std")


def write_summary_csv(path, summary: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for entry in summary:
            writer.writerow([entry[c] if c in ("family", "negation", "param", "n")
                             else repr(entry[c]) for c in SUMMARY_COLUMNS])


def read_summary_csv(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            entry = {"family": r["family"], "negation": r["negation"],
                     "param": r["param"], "n": int(r["n"])}
            for c in SUMMARY_COLUMNS[4:]:
                entry[c] = float(r[c])
            out.append(entry)
    return out


def best_summary_cell(summary: list[dict], family: str, metric: str) -> dict:
    """Highest-mean encoded cell for a family; invariant under row order."""
    candidates = [e for e in summary if e["family"] == family and e["negation"]]
    if not candidates:
        raise ValueError(f"no encoded cells for family {family!r}")
    return max(candidates, key=lambda e: (e[f"{metric}_mean"], -float(e["param"])))


# ---------------------------------------------------------------------------
# published reference tables
# ---------------------------------------------------------------------------

@dataclass
class PublishedRow:
    dataset: str
    family: str
    negation: str
    param: str
    metric: str
    value: float
    suspect: bool


def load_published(name: str) -> list[PublishedRow]:
    """Load one of the bundled reference tables:
    sugeno_unet, sugeno_unetpp, yager_unet, yager_unetpp."""
    resource = importlib.resources.files("ifsnet.published").joinpath(f"{name}.csv")
    with resource.open(newline="") as fh:
        return [PublishedRow(r["dataset"], r["family"], r["negation"], r["param"],
                             r["metric"], float(r["value"]), r["suspect"] == "1")
                for r in csv.DictReader(fh)]


def best_published_cell(rows: list[PublishedRow], dataset: str,
                        metric: str) -> tuple[str, float]:
    """(param, value) of the best encoded cell for a dataset and metric."""
    cells = [r for r in rows if r.dataset == dataset and r.metric == metric and r.negation]
    if not cells:
        raise ValueError(f"no encoded cells for dataset {dataset!r} metric {metric!r}")
    best = max(cells, key=lambda r: r.value)
    return best.param, best.value


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

def write_charts(rows: list[AblationRow], out_dir,
                 reference: list[PublishedRow] | None = None,
                 reference_dataset: str = "IBSR") -> list[Path]:
    """One grouped bar chart per (family, negation, metric).

    Bars are cell means with std error bars; the family baseline appears as
    the leftmost bar. With a reference table, its values are drawn as
    hatched side bars.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = summarize(rows)
    written = []
    families = sorted({e["family"] for e in summary})
    for family in families:
        baseline = next((e for e in summary
                         if e["family"] == family and not e["negation"]), None)
        for negation in ("sugeno", "yager"):
            cells = [e for e in summary
                     if e["family"] == family and e["negation"] == negation]
            if not cells:
                continue
            cells.sort(key=lambda e: float(e["param"]))
            for metric in ("ac", "dc", "iou"):
                labels = ["baseline"] if baseline else []
                means = [baseline[f"{metric}_mean"]] if baseline else []
                stds = [baseline[f"{metric}_std"]] if baseline else []
                labels += [e["param"] for e in cells]
                means += [e[f"{metric}_mean"] for e in cells]
                stds += [e[f"{metric}_std"] for e in cells]

                fig, ax = plt.subplots(figsize=(1.2 + 0.7 * len(labels), 3.2))
                pos = np.arange(len(labels), dtype=np.float64)
                width = 0.8
                if reference is not None:
                    width = 0.4
                    ref = {r.param: r.value for r in reference
                           if r.dataset == reference_dataset and r.family == family
                           and r.metric == metric and r.negation == negation}
                    ref_base = [r.value for r in reference
                                if r.dataset == reference_dataset and r.family == family
                                and r.metric == metric and not r.negation]
                    ref_vals = ([ref_base[0]] if (baseline and ref_base) else
                                [np.nan] if baseline else [])
                    ref_vals += [ref.get(e["param"], np.nan) for e in cells]
                    ax.bar(pos + width / 2, ref_vals, width, hatch="//",
                           color="lightgray", edgecolor="gray", label="published")
                    pos = pos - width / 2
                ax.bar(pos, means, width, yerr=stds, capsize=2,
                       color="steelblue", label="this run")
                ax.set_xticks(np.arange(len(labels)))
                ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
                param_name = "lambda" if negation == "sugeno" else "alpha"
                ax.set_xlabel(param_name)
                ax.set_ylabel(metric.upper())
                ax.set_title(f"{family} / {negation}")
                lo = min(v for v in means + ([v for v in (ref_vals if reference else [])
                                              if np.isfinite(v)]) if np.isfinite(v))
                ax.set_ylim(max(0.0, lo - 0.05), 1.0)
                ax.legend(fontsize=7)
                fig.tight_layout()
                path = out_dir / f"chart_{family}_{negation}_{metric}.svg"
                fig.savefig(path)
                plt.close(fig)
                written.append(path)
    return written
