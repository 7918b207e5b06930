"""Command-line front end.

Subcommands: encode, phantom-gen, train, eval, ablate, plot. Global flags
--seed, --jobs, --out, and --config (a JSON file whose keys mirror flag
names with underscores; explicit flags win over the file).

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import ablation, ifs, imgio
from .checkpoint import load_model, save_model
from .errors import IfsnetError, InvalidLabelError
from .nets import ArchConfig, build
from .training import TrainConfig, evaluate_model, load_dataset, split, train, write_epoch_log


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _open_unit_float(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {value}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _float_list(text: str) -> tuple[float, ...]:
    # empty string = empty grid (skips that negation family)
    return tuple(float(v) for v in text.split(",") if v.strip())


def _add_global_flags(sp: argparse.ArgumentParser, out_default: str) -> None:
    sp.add_argument("--seed", type=int, default=0, help="master RNG seed")
    sp.add_argument("--jobs", type=_positive_int, default=1,
                    help="parallel workers for sweep cells")
    sp.add_argument("--out", default=out_default, help="output directory")
    sp.add_argument("--config", default=None,
                    help="JSON file of flag defaults (flags override it)")


def _add_encoding_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--membership", choices=ifs.MEMBERSHIP_KINDS, default="minmax")
    sp.add_argument("--center", type=float, default=None,
                    help="gaussian/sigmoid center")
    sp.add_argument("--sigma", type=_positive_float, default=None,
                    help="gaussian spread")
    sp.add_argument("--slope", type=float, default=None, help="sigmoid slope")
    sp.add_argument("--negation", choices=ifs.NEGATION_KINDS, default="sugeno")
    sp.add_argument("--lam", "--lambda", dest="lam", type=_positive_float, default=1.0,
                    help="sugeno lambda (> 0)")
    sp.add_argument("--alpha", type=_open_unit_float, default=0.5,
                    help="yager alpha in (0, 1)")
    sp.add_argument("--constant-policy", choices=ifs.CONSTANT_POLICIES, default="error",
                    help="min-max behavior on a constant image")


def _add_arch_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--family", choices=("unet", "unetpp"), default="unet")
    sp.add_argument("--depth", type=_positive_int, default=4)
    sp.add_argument("--base-filters", type=_positive_int, default=32)
    sp.add_argument("--dropout-p", type=float, default=0.2)
    sp.add_argument("--no-deep-supervision", action="store_true")


def _add_train_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--epochs", type=_positive_int, default=100)
    sp.add_argument("--batch-size", type=_positive_int, default=2)
    sp.add_argument("--lr", type=_positive_float, default=1e-3)
    sp.add_argument("--early-stop", action="store_true")
    sp.add_argument("--patience", type=_positive_int, default=10)
    sp.add_argument("--min-delta", type=_nonneg_float, default=1e-4)
    sp.add_argument("--split-fraction", type=_open_unit_float, default=0.8)


def _build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="ifsnet",
        description="Intuitionistic fuzzy encoding + U-Net/U-Net++ segmentation")
    subs = parser.add_subparsers(dest="command", required=True)
    by_name = {}

    sp = subs.add_parser("encode", help="encode an image to mu/nu/pi planes")
    sp.add_argument("input", help="grayscale image (PNG or binary PGM)")
    _add_encoding_flags(sp)
    sp.add_argument("--bins", type=_positive_int, default=64, help="histogram bins")
    _add_global_flags(sp, "encode_out")
    by_name["encode"] = sp

    sp = subs.add_parser("phantom-gen", help="generate a synthetic phantom dataset")
    sp.add_argument("--size", type=_positive_int, default=64)
    sp.add_argument("--count", type=_positive_int, default=16)
    sp.add_argument("--tissue-means", type=float, nargs=4,
                    default=(10.0, 60.0, 120.0, 200.0), metavar="MEAN")
    sp.add_argument("--noise-sigma", type=_nonneg_float, default=8.0)
    sp.add_argument("--pv-blur-sigma", type=_nonneg_float, default=1.5)
    sp.add_argument("--bias-amplitude", type=_nonneg_float, default=0.1)
    _add_global_flags(sp, "phantom_data")
    by_name["phantom-gen"] = sp

    sp = subs.add_parser("train", help="train a model on a dataset directory")
    sp.add_argument("dataset", help="dataset directory")
    sp.add_argument("--encode", action="store_true",
                    help="feed the IFS triplet instead of raw intensities")
    _add_encoding_flags(sp)
    _add_arch_flags(sp)
    _add_train_flags(sp)
    _add_global_flags(sp, "train_out")
    by_name["train"] = sp

    sp = subs.add_parser("eval", help="evaluate a checkpoint on a dataset directory")
    sp.add_argument("dataset", help="dataset directory")
    sp.add_argument("--model", required=True, help="checkpoint path")
    sp.add_argument("--split", choices=("all", "test"), default="all",
                    help="score the whole dataset or only its test split")
    sp.add_argument("--split-fraction", type=_open_unit_float, default=0.8)
    _add_global_flags(sp, "eval_out")
    by_name["eval"] = sp

    sp = subs.add_parser("ablate", help="sweep negation parameters vs baselines")
    sp.add_argument("dataset", help="dataset directory")
    sp.add_argument("--families", type=lambda s: tuple(s.split(",")),
                    default=("unet", "unetpp"),
                    help="comma-separated subset of unet,unetpp")
    sp.add_argument("--no-baselines", action="store_true")
    sp.add_argument("--baselines-only", action="store_true")
    sp.add_argument("--lambdas", type=_float_list, default=ablation.DEFAULT_LAMBDAS,
                    help="comma-separated sugeno lambdas")
    sp.add_argument("--alphas", type=_float_list, default=ablation.DEFAULT_ALPHAS,
                    help="comma-separated yager alphas")
    sp.add_argument("--repeats", type=_positive_int, default=3)
    sp.add_argument("--membership", choices=ifs.MEMBERSHIP_KINDS, default="minmax")
    sp.add_argument("--center", type=float, default=None)
    sp.add_argument("--sigma", type=_positive_float, default=None)
    sp.add_argument("--slope", type=float, default=None)
    _add_arch_flags(sp)
    _add_train_flags(sp)
    _add_global_flags(sp, "ablation_out")
    by_name["ablate"] = sp

    sp = subs.add_parser("plot", help="bar charts from an ablation results CSV")
    sp.add_argument("results", help="results.csv from an ablate run")
    sp.add_argument("--reference", default=None,
                    choices=("sugeno_unet", "sugeno_unetpp", "yager_unet", "yager_unetpp"),
                    help="overlay a bundled published reference table")
    sp.add_argument("--reference-dataset", choices=("IBSR", "OASIS"), default="IBSR")
    _add_global_flags(sp, "plots")
    by_name["plot"] = sp

    return parser, by_name


def _apply_config_file(args: argparse.Namespace, argv: list[str],
                       sp: argparse.ArgumentParser) -> None:
    """Overlay config-file values onto flags the user did not pass."""
    with open(args.config) as fh:
        config = json.load(fh)
    for action in sp._actions:  # noqa: SLF001 - argparse has no public action list
        if not action.option_strings or action.dest not in config:
            continue
        passed = any(a == opt or a.startswith(opt + "=")
                     for a in argv for opt in action.option_strings)
        if not passed:
            setattr(args, action.dest, config[action.dest])


def _membership_config(args) -> ifs.MembershipConfig:
    return ifs.MembershipConfig(kind=args.membership, center=args.center,
                                sigma=args.sigma, slope=args.slope)


def _negation_config(args) -> ifs.NegationConfig:
    return ifs.NegationConfig(kind=args.negation, lam=args.lam, alpha=args.alpha)


def _train_config(args, encode) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, early_stop=args.early_stop,
                       patience=args.patience, min_delta=args.min_delta,
                       batch_size=args.batch_size, lr=args.lr,
                       split_fraction=args.split_fraction, seed=args.seed,
                       encode=encode)


def _arch_config(args, in_channels: int, num_classes: int) -> ArchConfig:
    return ArchConfig(family=args.family, depth=args.depth,
                      base_filters=args.base_filters, in_channels=in_channels,
                      num_classes=num_classes, dropout_p=args.dropout_p,
                      deep_supervision=not args.no_deep_supervision)


# ---------------------------------------------------------------------------
# command handlers
# ---------------------------------------------------------------------------

def _cmd_encode(args) -> int:
    image = imgio.read_gray(args.input)
    encoded = ifs.encode(image, _membership_config(args), _negation_config(args),
                         constant_policy=args.constant_policy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, plane in (("mu", encoded.mu), ("nu", encoded.nu), ("pi", encoded.pi)):
        imgio.write_plane_png(out / f"{name}.png", plane)
        imgio.write_histogram_csv(out / f"{name}_hist.csv",
                                  ifs.plane_histogram(plane, args.bins))
    print(f"wrote mu/nu/pi planes and histograms to {out}")
    return 0


def _cmd_phantom_gen(args) -> int:
    from . import phantom
    from .training import save_dataset

    spec = phantom.PhantomSpec(size=args.size, tissue_means=tuple(args.tissue_means),
                               noise_sigma=args.noise_sigma,
                               pv_blur_sigma=args.pv_blur_sigma,
                               bias_amplitude=args.bias_amplitude, seed=args.seed)
    samples = phantom.generate(spec, args.count)
    save_dataset(args.out, samples, phantom.NUM_CLASSES)
    print(f"wrote {len(samples)} phantoms to {args.out}")
    return 0


def _cmd_train(args) -> int:
    samples, num_classes = load_dataset(args.dataset)
    train_set, test_set = split(samples, args.split_fraction, args.seed)
    encode = (_membership_config(args), _negation_config(args)) if args.encode else None
    cfg = _train_config(args, encode)
    model = build(_arch_config(args, 3 if encode else 1, num_classes), seed=args.seed)
    model, log = train(model, train_set, test_set, cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(out / "model.ckpt", model, encode)
    write_epoch_log(out / "epochs.csv", log)
    last = log[-1]
    print(f"epoch {last.epoch}: val_loss={last.val_loss:.6f} "
          f"ac={last.val_ac:.4f} dc={last.val_dc:.4f} iou={last.val_iou:.4f}")
    return 0


def _cmd_eval(args) -> int:
    samples, num_classes = load_dataset(args.dataset)
    if args.split == "test":
        _, samples = split(samples, args.split_fraction, args.seed)
    model, encode = load_model(args.model)
    if model.config.num_classes != num_classes:
        raise InvalidLabelError(
            f"model expects {model.config.num_classes} classes, dataset declares {num_classes}")
    report = evaluate_model(model, samples, encode=encode)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.csv_header() + "\n" + report.to_csv_row() + "\n")
    print(f"AC={report.ac:.4f} DC={report.dc:.4f} IoU={report.iou:.4f} "
          f"(foreground DC={report.fg_dc:.4f} IoU={report.fg_iou:.4f})")
    return 0


def _cmd_ablate(args) -> int:
    samples, num_classes = load_dataset(args.dataset)
    train_set, test_set = split(samples, args.split_fraction, args.seed)
    plan = ablation.AblationPlan(
        families=args.families,
        baselines=not args.no_baselines,
        sugeno_lambdas=() if args.baselines_only else args.lambdas,
        yager_alphas=() if args.baselines_only else args.alphas,
        repeats=args.repeats,
        train_cfg=_train_config(args, None),
        arch=_arch_config(args, 1, num_classes),
        membership=_membership_config(args),
    )
    for family in plan.families:
        if family not in ("unet", "unetpp"):
            raise IfsnetError(f"unknown family {family!r}")
    rows, failures = ablation.run_ablation(plan, train_set, test_set, args.out,
                                           jobs=args.jobs)
    print(f"{len(rows)} runs -> {Path(args.out) / 'results.csv'}"
          + (f" ({len(failures)} failed cells)" if failures else ""))
    return 0


def _cmd_plot(args) -> int:
    rows = ablation.read_results_csv(args.results)
    reference = ablation.load_published(args.reference) if args.reference else None
    written = ablation.write_charts(rows, args.out, reference, args.reference_dataset)
    print(f"wrote {len(written)} charts to {args.out}")
    return 0


_HANDLERS = {
    "encode": _cmd_encode,
    "phantom-gen": _cmd_phantom_gen,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "plot": _cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, by_name = _build_parser()
    args = parser.parse_args(argv)
    if args.config:
        _apply_config_file(args, argv, by_name[args.command])
    try:
        return _HANDLERS[args.command](args)
    except (IfsnetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
