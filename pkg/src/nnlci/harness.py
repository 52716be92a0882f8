"""End-to-end pipeline: full-field prediction, error evaluation, exports.

`run_experiment` drives the whole chain for one config: generate training
data over the training perturbations, train the network, predict full fields
for each evaluation perturbation, and write a relative-l2 error table beside
the model, dataset, and provenance files.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig, default_architecture, default_eval_deltas, validate_config
from .datasets import (
    CaseSolution,
    Dataset,
    compute_case,
    generate_cross_training_set,
    generate_training_set,
    load_preset,
    save_dataset,
)
from .errors import (
    ConfigError,
    GridMismatchError,
    NonPhysicalStateError,
    VariantMismatchError,
)
from .grids import FieldSnapshot
from .nn import (
    MlpModel,
    TrainConfig,
    fit_norm_stats,
    forward,
    init_model,
    save_model,
    train_adam,
    train_lbfgs,
)
from .stencils import assemble_batch

_FMT = "{:.17e}"  # round-trippable float formatting for deterministic tables


def predict_field(model: MlpModel, case: CaseSolution) -> FieldSnapshot:
    """Predict (rho, u[, v], p) at every interior node of the case grid.

    Boundary-ring nodes copy the low-cost solution on the prediction grid.
    """
    if model.variant and model.variant != case.variant:
        raise VariantMismatchError(
            f"model was trained for {model.variant!r}, snapshots are {case.variant!r}"
        )
    dt = case.dt if case.dt_in_input else None
    inputs, locations = assemble_batch(
        case.pair_a, case.pair_b, case.stride_a, case.stride_b, dt=dt
    )
    out = np.empty((inputs.shape[0], model.d_out))
    chunk = 65536
    for k in range(0, inputs.shape[0], chunk):
        out[k : k + chunk] = forward(model, inputs[k : k + chunk])
    bad = ~np.isfinite(out).all(axis=1)
    if bad.any():
        k = int(np.argmax(bad))
        raise NonPhysicalStateError(
            f"non-finite prediction at node {tuple(np.atleast_1d(locations[k]))}"
        )
    base = _format_grid_snapshot(case)
    nodal = base.nodal().copy()
    if case.grid.dim == 1:
        nodal[:, locations] = out.T
    else:
        nodal[:, locations[:, 0], locations[:, 1]] = out.T
    return FieldSnapshot.from_nodal(case.grid, nodal, base.time_index, case.system)


def _format_grid_snapshot(case: CaseSolution) -> FieldSnapshot:
    """The low-cost final-time snapshot living on the prediction grid."""
    for pair in (case.pair_a, case.pair_b):
        if pair[1].grid.nx == case.grid.nx:
            return pair[1]
    raise ConfigError("no input half lives on the prediction grid")


def input_on_prediction_grid(case: CaseSolution, half: str) -> FieldSnapshot:
    """An input half's final snapshot sampled at the prediction-grid nodes."""
    pair = case.pair_a if half == "a" else case.pair_b
    snap = pair[1]
    r = snap.grid.nx // case.grid.nx
    if r == 1:
        return FieldSnapshot.from_nodal(case.grid, snap.nodal(), snap.time_index)
    vals = snap.nodal()[:, ::r] if case.grid.dim == 1 else snap.nodal()[:, ::r, ::r]
    return FieldSnapshot.from_nodal(case.grid, vals, snap.time_index // r)


@dataclass
class RelL2:
    aggregate: float
    per_variable: dict


def relative_l2(pred: FieldSnapshot, ref: FieldSnapshot, var_names=None) -> RelL2:
    """Relative l2 error over interior nodes.

    The aggregate concatenates all variables after dividing each by the
    reference field's per-variable scale (std, clamped to 1 when degenerate);
    the per-variable entries are plain unweighted ratios.
    """
    if pred.grid != ref.grid:
        raise GridMismatchError("prediction and reference grids differ")
    if pred.ncomp != ref.ncomp:
        raise GridMismatchError("prediction and reference variable counts differ")
    if pred.grid.dim == 1:
        P = pred.nodal()[:, 1:-1]
        R = ref.nodal()[:, 1:-1]
    else:
        P = pred.nodal()[:, 1:-1, 1:-1]
        R = ref.nodal()[:, 1:-1, 1:-1]
    P = P.reshape(P.shape[0], -1)
    R = R.reshape(R.shape[0], -1)
    diff = P - R
    if var_names is None:
        var_names = ("rho", "u", "p") if pred.ncomp == 3 else ("rho", "u", "v", "p")

    per = {}
    for k, name in enumerate(var_names):
        den = float(np.linalg.norm(R[k]))
        num = float(np.linalg.norm(diff[k]))
        per[name] = num / den if den > 0.0 else (0.0 if num == 0.0 else np.inf)

    scale = R.std(axis=1)
    scale = np.where(scale < 1e-12, 1.0, scale)
    num = float(np.linalg.norm(diff / scale[:, None]))
    den = float(np.linalg.norm(R / scale[:, None]))
    return RelL2(aggregate=num / den, per_variable=per)


def export_cross_section(field: FieldSnapshot, y_value: float, path) -> float:
    """Write one CSV row per x node along the grid row nearest to y_value.

    Ties snap toward the lower index. Returns the snapped coordinate.
    """
    g = field.grid
    if g.dim != 2:
        raise ConfigError("cross-sections are defined for 2D fields")
    ys = g.node_ys()
    if not (ys[0] - 1e-12 <= y_value <= ys[-1] + 1e-12):
        from .errors import OutOfRangeError

        raise OutOfRangeError(f"y = {y_value} outside [{ys[0]}, {ys[-1]}]")
    j = int(np.argmin(np.abs(ys - y_value)))
    snapped = float(ys[j])
    vals = field.nodal()[:, :, j]
    xs = g.node_xs()
    names = ("rho", "u", "v", "p")[: field.ncomp]
    with open(path, "w", newline="") as fh:
        fh.write(f"# cross-section at y = {_FMT.format(snapped)}\n")
        fh.write("x," + ",".join(names) + "\n")
        for i in range(xs.size):
            row = [_FMT.format(xs[i])] + [_FMT.format(vals[k, i]) for k in range(field.ncomp)]
            fh.write(",".join(row) + "\n")
    return snapped


def export_contour(field: FieldSnapshot, path) -> None:
    """Row-major (x outer, y inner) CSV dump of all node values."""
    g = field.grid
    xs = g.node_xs()
    nodal = field.nodal()
    names = ("rho", "u", "p") if field.ncomp == 3 else ("rho", "u", "v", "p")
    with open(path, "w", newline="") as fh:
        if g.dim == 1:
            fh.write("x," + ",".join(names) + "\n")
            for i in range(xs.size):
                fh.write(
                    ",".join([_FMT.format(xs[i])] + [_FMT.format(nodal[k, i]) for k in range(field.ncomp)])
                    + "\n"
                )
            return
        ys = g.node_ys()
        fh.write("x,y," + ",".join(names) + "\n")
        for i in range(xs.size):
            for j in range(ys.size):
                row = [_FMT.format(xs[i]), _FMT.format(ys[j])]
                row += [_FMT.format(nodal[k, i, j]) for k in range(field.ncomp)]
                fh.write(",".join(row) + "\n")


def _delta_label(delta: float) -> str:
    if delta == 0.0:
        return "original"
    return f"{delta * 100:+g}%"


@dataclass
class ExperimentReport:
    rows: list
    out_dir: Path
    table_path: Path
    model_path: Path
    dataset_path: Path
    seconds: dict


def _case_kwargs(cfg: RunConfig) -> dict:
    return dict(
        cfl=cfg.cfl,
        cfl_margin=cfg.cfl_margin,
        alpha_factor=cfg.alpha_factor,
        input_solver=cfg.input_solver,
        reference_cells=cfg.reference_cells,
        reference_flux=cfg.reference_flux,
        diffusion_ratio=cfg.diffusion_ratio,
    )


def build_dataset(cfg: RunConfig) -> Dataset:
    if cfg.cross_presets:
        presets = [load_preset(name) for name in cfg.cross_presets]
        return generate_cross_training_set(
            presets,
            cfg.train_deltas,
            cfg.coarse_cells,
            dt_in_input=(cfg.variant == "cg1d_dt"),
            intermediate_dt=cfg.intermediate_dt,
            cfl=cfg.cfl,
            cfl_margin=cfg.cfl_margin,
            input_solver=cfg.input_solver,
            alpha_factor=cfg.alpha_factor,
            reference_cells=cfg.reference_cells,
            reference_flux=cfg.reference_flux,
        )
    preset = load_preset(cfg.preset)
    return generate_training_set(
        preset, cfg.train_deltas, cfg.variant, cfg.coarse_cells, **_case_kwargs(cfg)
    )


def train_model(cfg: RunConfig, dataset: Dataset) -> tuple[MlpModel, dict]:
    """Architecture defaults, normalization, Adam then L-BFGS."""
    if cfg.seed is None:
        raise ConfigError("training requires a seed")
    preset_names = dataset.provenance.get("presets", [cfg.preset])
    dim = 1 if dataset.targets.shape[1] == 3 else 2
    n_hidden, width = default_architecture(
        dim, preset_names, dt_in_input=(cfg.variant == "cg1d_dt")
    )
    if cfg.hidden_layers is not None:
        n_hidden = cfg.hidden_layers
    if cfg.width is not None:
        width = cfg.width
    sizes = (dataset.inputs.shape[1],) + (width,) * n_hidden + (dataset.targets.shape[1],)
    norm = fit_norm_stats(dataset.inputs, dataset.targets)
    model = init_model(sizes, cfg.activation, cfg.seed, norm, variant=cfg.variant)
    tc = TrainConfig(
        adam_iters=cfg.adam_iters,
        lbfgs_iters=cfg.lbfgs_iters,
        adam_lr=cfg.adam_lr,
        seed=cfg.seed,
        tolerance=cfg.tolerance,
        dtype=cfg.dtype,
    )
    data = (dataset.inputs, dataset.targets)
    res_adam = train_adam(model, data, tc)
    res_lbfgs = train_lbfgs(res_adam.model, data, tc)
    info = {
        "layer_sizes": sizes,
        "adam_final_loss": float(res_adam.trace[-1]),
        "lbfgs_final_loss": float(res_lbfgs.trace[-1]),
        "lbfgs_stop": res_lbfgs.stop_reason,
        "line_search_failed": res_lbfgs.line_search_failed,
        "adam_trace": res_adam.trace,
        "lbfgs_trace": res_lbfgs.trace,
    }
    return res_lbfgs.model, info


def evaluate_model(cfg: RunConfig, model: MlpModel, preset=None) -> list:
    """Error-table rows for every evaluation perturbation."""
    preset = preset if preset is not None else load_preset(cfg.preset)
    eval_deltas = cfg.eval_deltas or default_eval_deltas(preset.dim)
    overlap = set(eval_deltas) & set(cfg.train_deltas)
    if overlap:
        raise ConfigError(f"evaluation deltas overlap training deltas: {sorted(overlap)}")
    rows = []
    for delta in eval_deltas:
        case = compute_case(preset, delta, cfg.variant, cfg.coarse_cells, **_case_kwargs(cfg))
        pred = predict_field(model, case)
        err_pred = relative_l2(pred, case.reference)
        err_a = relative_l2(input_on_prediction_grid(case, "a"), case.reference)
        err_b = relative_l2(input_on_prediction_grid(case, "b"), case.reference)
        row = {
            "label": _delta_label(delta),
            "delta": delta,
            "err_pred": err_pred.aggregate,
            "err_input_a": err_a.aggregate,
            "err_input_b": err_b.aggregate,
        }
        for name, value in err_pred.per_variable.items():
            row[f"err_pred_{name}"] = value
        rows.append((row, case, pred))
    return rows


def write_error_table(rows, path) -> None:
    keys = [k for k in rows[0].keys() if k != "delta"]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            cells = [
                row["label"] if k == "label" else _FMT.format(row[k]) for k in keys
            ]
            fh.write(",".join(cells) + "\n")


def run_experiment(cfg: RunConfig, dry_run: bool = False) -> ExperimentReport | None:
    """Full pipeline: generate, train, evaluate, export.

    The error table is bitwise-reproducible for a fixed config and seed; wall
    times and other non-deterministic provenance go to a separate file.
    """
    validate_config(cfg)
    preset = load_preset(cfg.cross_presets[0] if cfg.cross_presets else cfg.preset)
    eval_deltas = cfg.eval_deltas or default_eval_deltas(preset.dim)
    overlap = set(eval_deltas) & set(cfg.train_deltas)
    if overlap:
        raise ConfigError(f"evaluation deltas overlap training deltas: {sorted(overlap)}")
    if dry_run:
        return None

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seconds = {}

    t0 = time.perf_counter()
    dataset = build_dataset(cfg)
    seconds["generate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    model, train_info = train_model(cfg, dataset)
    seconds["train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    evaluated = evaluate_model(cfg, model, preset=preset)
    seconds["evaluate"] = time.perf_counter() - t0

    rows = [row for row, _, _ in evaluated]
    table_path = out_dir / "errors.csv"
    write_error_table(rows, table_path)
    model_path = out_dir / "model.nnlc"
    save_model(model_path, model)
    dataset_path = out_dir / "dataset.nlds"
    save_dataset(dataset_path, dataset)
    np.savetxt(
        out_dir / "loss_trace.csv",
        np.concatenate([train_info["adam_trace"], train_info["lbfgs_trace"]]),
        header="loss", comments="", fmt="%.17e",
    )
    for row, case, pred in evaluated:
        if case.grid.dim == 2 and cfg.cross_sections:
            for y in cfg.cross_sections:
                tag = row["label"].replace("%", "pct").replace("+", "p").replace("-", "m")
                export_cross_section(pred, y, out_dir / f"cross_y{y:g}_{tag}.csv")

    with open(out_dir / "provenance.txt", "w") as fh:
        fh.write(f"preset: {preset.name}\n")
        fh.write(f"variant: {cfg.variant}\n")
        fh.write(f"seed: {cfg.seed}\n")
        fh.write(f"layer_sizes: {train_info['layer_sizes']}\n")
        fh.write(f"adam_final_loss: {train_info['adam_final_loss']:.6e}\n")
        fh.write(f"lbfgs_final_loss: {train_info['lbfgs_final_loss']:.6e}\n")
        fh.write(f"lbfgs_stop: {train_info['lbfgs_stop']}\n")
        fh.write(f"scheme_ids: {dataset.provenance.get('scheme_ids', [])}\n")
        for stage, secs in seconds.items():
            fh.write(f"wall_{stage}_s: {secs:.3f}\n")

    return ExperimentReport(
        rows=rows,
        out_dir=out_dir,
        table_path=table_path,
        model_path=model_path,
        dataset_path=dataset_path,
        seconds=seconds,
    )
