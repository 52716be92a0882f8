"""Command-line entry points: generate, train, predict, evaluate, export, run.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 training
divergence.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .datasets import compute_case, load_dataset, load_preset, save_dataset
from .errors import (
    ConfigError,
    DegenerateFieldError,
    DivergedLossError,
    NnlciError,
    NonPhysicalStateError,
    VacuumFormationError,
)
from .grids import load_snapshot, save_snapshot
from .harness import (
    build_dataset,
    evaluate_model,
    export_contour,
    export_cross_section,
    predict_field,
    relative_l2,
    run_experiment,
    train_model,
    write_error_table,
)
from .nn import load_model, save_model


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nnlci",
        description="Train and evaluate local-converging-input networks "
        "for 1D/2D Euler problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="run config file")
        p.add_argument(
            "--set", dest="overrides", action="append", default=[],
            metavar="SECTION.KEY=VALUE", help="override a config entry",
        )

    p = sub.add_parser("generate", help="build and save a training dataset")
    add_common(p)
    p.add_argument("--out", required=True, help="dataset output path (.nlds)")

    p = sub.add_parser("train", help="train a model on a dataset")
    add_common(p)
    p.add_argument("--seed", type=int, required=True, help="training seed")
    p.add_argument("--data", help="dataset file; generated from config when omitted")
    p.add_argument("--out", required=True, help="model output path (.nnlc)")

    p = sub.add_parser("predict", help="predict a full field for one perturbation")
    add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--out", required=True, help="snapshot output path (.nlfs)")
    p.add_argument("--csv", help="also dump the field as CSV")

    p = sub.add_parser("evaluate", help="error table over the evaluation perturbations")
    add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="error table path (.csv)")

    p = sub.add_parser("export", help="export plot-ready CSV from a snapshot file")
    p.add_argument("what", choices=["cross-section", "contour"])
    p.add_argument("--field", required=True, help="snapshot file (.nlfs)")
    p.add_argument("--y", type=float, help="cross-section line (2D)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="full pipeline: generate, train, evaluate, export")
    add_common(p)
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out-dir", help="overrides the config output directory")
    p.add_argument("--dry-run", action="store_true", help="validate config and exit")

    return parser


def _cmd_generate(args) -> int:
    cfg = load_config(args.config, args.overrides)
    ds = build_dataset(cfg)
    save_dataset(args.out, ds)
    print(f"wrote {ds.n} samples ({ds.inputs.shape[1]} inputs) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = load_config(args.config, args.overrides)
    cfg.seed = args.seed
    ds = load_dataset(args.data) if args.data else build_dataset(cfg)
    model, info = train_model(cfg, ds)
    save_model(args.out, model)
    print(
        f"trained {info['layer_sizes']} to loss {info['lbfgs_final_loss']:.3e} "
        f"({info['lbfgs_stop']}); wrote {args.out}"
    )
    return 0


def _cmd_predict(args) -> int:
    cfg = load_config(args.config, args.overrides)
    model = load_model(args.model)
    preset = load_preset(cfg.preset)
    case = compute_case(
        preset, args.delta, cfg.variant, cfg.coarse_cells,
        cfl=cfg.cfl, cfl_margin=cfg.cfl_margin, alpha_factor=cfg.alpha_factor,
        input_solver=cfg.input_solver, reference_cells=cfg.reference_cells,
        reference_flux=cfg.reference_flux, diffusion_ratio=cfg.diffusion_ratio,
    )
    pred = predict_field(model, case)
    save_snapshot(args.out, pred, scheme=f"prediction:{cfg.variant}")
    if args.csv:
        export_contour(pred, args.csv)
    err = relative_l2(pred, case.reference)
    print(f"delta {args.delta:+g}: relative l2 {err.aggregate:.6e}; wrote {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = load_config(args.config, args.overrides)
    model = load_model(args.model)
    rows = [row for row, _, _ in evaluate_model(cfg, model)]
    write_error_table(rows, args.out)
    for row in rows:
        print(f"{row['label']:>9}: pred {row['err_pred']:.6e}  "
              f"inputs {row['err_input_a']:.6e} / {row['err_input_b']:.6e}")
    print(f"wrote {args.out}")
    return 0


def _cmd_export(args) -> int:
    field = load_snapshot(args.field)
    if args.what == "cross-section":
        if args.y is None:
            raise ConfigError("cross-section export needs --y")
        snapped = export_cross_section(field, args.y, args.out)
        print(f"wrote {args.out} (snapped to y = {snapped:g})")
    else:
        export_contour(field, args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_run(args) -> int:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"training.seed={args.seed}")
    if args.out_dir is not None:
        overrides.append(f"output.dir={args.out_dir}")
    cfg = load_config(args.config, overrides)
    report = run_experiment(cfg, dry_run=args.dry_run)
    if args.dry_run:
        print("config ok")
        return 0
    for row in report.rows:
        print(f"{row['label']:>9}: pred {row['err_pred']:.6e}  "
              f"inputs {row['err_input_a']:.6e} / {row['err_input_b']:.6e}")
    print(f"outputs in {report.out_dir}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "export": _cmd_export,
    "run": _cmd_run,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (NonPhysicalStateError, VacuumFormationError, DegenerateFieldError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 3
    except DivergedLossError as err:
        print(f"training divergence: {err}", file=sys.stderr)
        return 4
    except NnlciError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
