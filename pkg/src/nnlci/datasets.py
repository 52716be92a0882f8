"""Initial-condition presets, perturbations, and training-set construction.

A preset is a piecewise-constant initial condition over axis-aligned regions,
read from a plain-text file. Perturbed copies scale every nonzero primitive
constant by (1 + delta). `compute_case` runs the low-cost input solvers and
the high-resolution reference for one initial condition and packages the
snapshot pairs a stencil variant samples; `generate_training_set` loops that
over the training perturbations and assembles the sample arrays.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, CorruptDatasetFileError
from .euler import GasModel
from .grids import FieldSnapshot, GridSpec, cfl_timestep, fitted_step, refine
from .reference import cell_avg_to_point, reference_solve
from .schemes import SchemeConfig, dual_diffusion_evolve, evolve
from .stencils import StencilSample, assemble_batch
from .systems import EulerSystem

TRAIN_DELTAS = (0.02, -0.02, 0.04, -0.04, 0.06, -0.06, 0.08, -0.08, 0.10, -0.10)
EVAL_DELTAS_1D = (0.0, 0.03, -0.03, 0.05, -0.05, 0.07, -0.07)
EVAL_DELTAS_2D = (0.0, 0.03, -0.03, 0.05, -0.05)


@dataclass(frozen=True)
class Region:
    """Axis-aligned box holding one constant primitive state."""

    rho: float
    u: float
    p: float
    v: float = 0.0
    x_lo: float = -np.inf
    x_hi: float = np.inf
    y_lo: float = -np.inf
    y_hi: float = np.inf

    def contains(self, x, y=0.0):
        return (self.x_lo <= x < self.x_hi) and (self.y_lo <= y < self.y_hi)


@dataclass(frozen=True)
class ICPreset:
    """Named piecewise-constant initial condition with domain and final time."""

    name: str
    dim: int
    x_lo: float
    x_hi: float
    t_final: float
    boundary: str
    regions: tuple
    y_lo: float = 0.0
    y_hi: float = 0.0

    def state_at(self, x, y=0.0):
        # half-open region logic; nudge domain-edge points inward so the
        # closing boundary node still matches a region
        x = min(x, np.nextafter(self.x_hi, -np.inf))
        if self.dim == 2:
            y = min(y, np.nextafter(self.y_hi, -np.inf))
        for r in self.regions:
            if r.contains(x, y):
                return r
        raise ConfigError(f"preset {self.name}: no region covers ({x}, {y})")


def parse_preset(text: str, name_hint: str = "") -> ICPreset:
    """Parse the plain-text key-value preset format with region blocks."""
    header: dict = {}
    regions: list[dict] = []
    current = header
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "region:":
            regions.append({})
            current = regions[-1]
            continue
        if "=" not in line:
            raise ConfigError(f"preset line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        current[key] = value
    try:
        dim = int(header["dim"])
        preset = ICPreset(
            name=header.get("name", name_hint),
            dim=dim,
            x_lo=float(header["x_lo"]),
            x_hi=float(header["x_hi"]),
            y_lo=float(header.get("y_lo", 0.0)),
            y_hi=float(header.get("y_hi", 0.0)),
            t_final=float(header["t_final"]),
            boundary=header.get("boundary", "outflow"),
            regions=tuple(_parse_region(r, header, dim) for r in regions),
        )
    except KeyError as err:
        raise ConfigError(f"preset is missing key {err}") from err
    if not preset.regions:
        raise ConfigError("preset declares no regions")
    return preset


def _parse_region(r: dict, header: dict, dim: int) -> Region:
    if dim == 1:
        y_lo, y_hi = -np.inf, np.inf  # y is vacuous in 1D
    else:
        y_lo = float(r.get("y_lo", header["y_lo"]))
        y_hi = float(r.get("y_hi", header["y_hi"]))
    return Region(
        rho=float(r["rho"]),
        u=float(r["u"]),
        v=float(r.get("v", 0.0)),
        p=float(r["p"]),
        x_lo=float(r.get("x_lo", header["x_lo"])),
        x_hi=float(r.get("x_hi", header["x_hi"])),
        y_lo=y_lo,
        y_hi=y_hi,
    )


def load_preset(source) -> ICPreset:
    """Load a preset from a file path or a built-in name (e.g. 'sod', 'config6')."""
    path = Path(source)
    if path.suffix == ".preset" and path.exists():
        return parse_preset(path.read_text(), name_hint=path.stem)
    ref = resources.files("nnlci.presets").joinpath(f"{source}.preset")
    if not ref.is_file():
        raise ConfigError(f"unknown preset {source!r}")
    return parse_preset(ref.read_text(), name_hint=str(source))


def builtin_preset_names() -> tuple:
    names = []
    for ref in resources.files("nnlci.presets").iterdir():
        if ref.name.endswith(".preset"):
            names.append(ref.name[: -len(".preset")])
    return tuple(sorted(names))


def perturb_ic(p: ICPreset, delta: float) -> ICPreset:
    """Scale every nonzero primitive constant in every region by (1 + delta)."""
    if not abs(delta) < 0.5:
        raise ValueError(f"perturbation fraction {delta} out of range")
    scale = 1.0 + delta
    regions = tuple(
        replace(r, rho=r.rho * scale, u=r.u * scale, v=r.v * scale, p=r.p * scale)
        for r in p.regions
    )
    return replace(p, regions=regions)


def ic_nodal(preset: ICPreset, grid: GridSpec, system: EulerSystem) -> FieldSnapshot:
    """Point values of the preset at every node (snapshot at level 0)."""
    xs = grid.node_xs()
    if grid.dim == 1:
        vals = np.empty((system.ncomp, xs.size))
        for k, x in enumerate(xs):
            r = preset.state_at(x)
            vals[:, k] = (r.rho, r.u, r.p)
    else:
        ys = grid.node_ys()
        vals = np.empty((system.ncomp, xs.size, ys.size))
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                r = preset.state_at(x, y)
                vals[:, i, j] = (r.rho, r.u, r.v, r.p)
    return FieldSnapshot.from_nodal(grid, vals, 0, system)


def ic_cell_averages(preset: ICPreset, grid: GridSpec, system: EulerSystem) -> np.ndarray:
    """Exact cell averages (regions are boxes, so overlap fractions are products)."""
    def overlap(lo, hi, a, b):
        return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)

    xs_lo = grid.x_lo + np.arange(grid.nx) * grid.dx
    if grid.dim == 1:
        vals = np.zeros((system.ncomp, grid.nx))
        for r in preset.regions:
            frac = overlap(r.x_lo, r.x_hi, xs_lo, xs_lo + grid.dx) / grid.dx
            vals += frac * np.array([r.rho, r.u, r.p])[:, None]
        return vals
    ys_lo = grid.y_lo + np.arange(grid.ny) * grid.dy
    vals = np.zeros((system.ncomp, grid.nx, grid.ny))
    for r in preset.regions:
        fx = overlap(r.x_lo, r.x_hi, xs_lo, xs_lo + grid.dx) / grid.dx
        fy = overlap(r.y_lo, r.y_hi, ys_lo, ys_lo + grid.dy) / grid.dy
        frac = fx[:, None] * fy[None, :]
        vals += frac * np.array([r.rho, r.u, r.v, r.p])[:, None, None]
    return vals


@dataclass
class CaseSolution:
    """Everything one initial condition contributes: input pairs plus reference."""

    variant: str
    system: EulerSystem
    grid: GridSpec  # prediction/formatting grid with the fitted dt
    pair_a: tuple
    pair_b: tuple
    stride_a: int
    stride_b: int
    reference: FieldSnapshot  # nodal reference on `grid` at t_final
    dt: float
    dt_in_input: bool
    scheme_ids: tuple = ()


def default_reference_cells(dim: int, coarse_cells: int) -> int:
    """Reference resolution: 4x the coarse input grid in 1D, 2x in 2D."""
    return coarse_cells * (4 if dim == 1 else 2)


def compute_case(
    preset: ICPreset,
    delta: float,
    variant: str,
    coarse_cells: int,
    *,
    gas: GasModel | None = None,
    cfl: float = 0.4,
    cfl_margin: float = 1.0,
    alpha_factor: float = 1.0,
    input_solver: str = "leapfrog_diffusion",
    reference_cells: int | None = None,
    reference_flux: str = "hll",
    diffusion_ratio: float = 4.0,
    dt_override: float | None = None,
) -> CaseSolution:
    """Run the input solvers and the reference for one (preset, delta) case."""
    system = EulerSystem(preset.dim, gas)
    case_preset = perturb_ic(preset, delta) if delta != 0.0 else preset
    t_final = preset.t_final
    grid0 = _make_grid(preset, coarse_cells, dt=1.0)
    ic0 = ic_nodal(case_preset, grid0, system)
    dt_raw = dt_override if dt_override is not None else (
        cfl_timestep(ic0, cfl, system) * cfl_margin
    )
    dt, _ = fitted_step(dt_raw, t_final)
    grid = replace(grid0, dt=dt)
    ic = FieldSnapshot.from_nodal(grid, ic0.nodal(), 0, system)

    if reference_cells is None:
        reference_cells = default_reference_cells(preset.dim, coarse_cells)
    scheme_ids = []

    if variant in ("cg1d", "cg1d_dt", "cg2d"):
        pair_a, id_a = _input_pair(
            case_preset, grid, t_final, system, input_solver, alpha_factor,
            prev_lag=1, reference_flux=reference_flux,
        )
        fine = refine(grid)
        pair_b, id_b = _input_pair(
            case_preset, fine, t_final, system, input_solver, alpha_factor,
            prev_lag=2, reference_flux=reference_flux,
        )
        stride_a, stride_b = 1, 2
        scheme_ids += [id_a, id_b]
    elif variant == "dc2d":
        if preset.dim != 2:
            raise ConfigError("the dc2d variant needs a 2D preset")
        pair_a, pair_b = dual_diffusion_evolve(ic, grid, diffusion_ratio, t_final, system)
        stride_a = stride_b = 1
        scheme_ids += [
            "leapfrog_diffusion(alpha=dx)",
            f"leapfrog_diffusion(alpha={diffusion_ratio}dx)",
        ]
    elif variant == "mixed":
        if preset.dim == 1:
            pair_a, id_a = _input_pair(
                case_preset, grid, t_final, system, "rusanov", alpha_factor, prev_lag=1,
            )
            stride_a = 1
        else:
            fine = refine(grid)
            pair_a, id_a = _input_pair(
                case_preset, fine, t_final, system, "leapfrog_diffusion",
                alpha_factor, prev_lag=2,
            )
            stride_a = 2
        pair_b, id_b = _input_pair(
            case_preset, grid, t_final, system, "reference", alpha_factor,
            prev_lag=1, reference_flux=reference_flux,
        )
        stride_b = 1
        scheme_ids += [id_a, id_b]
    else:
        raise ConfigError(f"unknown variant {variant!r}")

    ref_grid = _make_grid(preset, reference_cells, dt=dt)
    ref_cells = reference_solve(
        ic_cell_averages(case_preset, ref_grid, system), ref_grid, t_final, system,
        flux=reference_flux,
    )
    final_level = int(round(t_final / grid.dt))
    reference = cell_avg_to_point(ref_cells, grid, time_index=final_level)
    scheme_ids.append(ref_cells.scheme)

    return CaseSolution(
        variant=variant,
        system=system,
        grid=grid,
        pair_a=pair_a,
        pair_b=pair_b,
        stride_a=stride_a,
        stride_b=stride_b,
        reference=reference,
        dt=dt,
        dt_in_input=(variant == "cg1d_dt"),
        scheme_ids=tuple(scheme_ids),
    )


def _make_grid(preset: ICPreset, cells: int, dt: float) -> GridSpec:
    if preset.dim == 1:
        return GridSpec(
            dim=1, x_lo=preset.x_lo, x_hi=preset.x_hi, nx=cells, dt=dt,
            boundary=preset.boundary,
        )
    return GridSpec(
        dim=2, x_lo=preset.x_lo, x_hi=preset.x_hi, nx=cells, dt=dt,
        boundary=preset.boundary, y_lo=preset.y_lo, y_hi=preset.y_hi, ny=cells,
    )


def _input_pair(preset, grid, t_final, system, solver, alpha_factor, prev_lag,
                reference_flux="hll"):
    """One (prev, curr) snapshot pair for an input half, by the chosen solver."""
    if solver == "reference":
        n_levels = int(round(t_final / grid.dt))
        t_prev = t_final - prev_lag * grid.dt
        ic_cells = ic_cell_averages(preset, grid, system)
        prev_field = reference_solve(ic_cells, grid, t_prev, system, flux=reference_flux)
        curr_field = reference_solve(ic_cells, grid, t_final, system, flux=reference_flux)
        pair = (
            cell_avg_to_point(prev_field, grid, time_index=n_levels - prev_lag),
            cell_avg_to_point(curr_field, grid, time_index=n_levels),
        )
        return pair, curr_field.scheme
    ic = ic_nodal(preset, grid, system)
    cfg = SchemeConfig(kind=solver, alpha_factor=alpha_factor)
    pair = evolve(ic, grid, cfg, t_final, system, prev_lag=prev_lag)
    tag = f"{solver}(alpha={alpha_factor}dx)" if solver == "leapfrog_diffusion" else solver
    return pair, tag


@dataclass
class Dataset:
    """Sample arrays plus the provenance needed to reproduce them."""

    inputs: np.ndarray
    targets: np.ndarray
    locations: np.ndarray
    variant: str
    provenance: dict

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    def sample(self, k: int) -> StencilSample:
        loc = self.locations[k]
        return StencilSample(
            input=self.inputs[k],
            target=self.targets[k],
            location=tuple(np.atleast_1d(loc).tolist()),
            variant=self.variant,
        )


def case_samples(case: CaseSolution):
    """(inputs, targets, locations) for every interior node of the case grid."""
    dt = case.dt if case.dt_in_input else None
    inputs, locations = assemble_batch(
        case.pair_a, case.pair_b, case.stride_a, case.stride_b, dt=dt
    )
    ref = case.reference.nodal()
    if case.grid.dim == 1:
        targets = ref[:, locations].T
    else:
        targets = ref[:, locations[:, 0], locations[:, 1]].T
    if not np.all(np.isfinite(inputs)) or not np.all(np.isfinite(targets)):
        raise ConfigError("case produced non-finite samples")
    return inputs, targets, locations


def generate_training_set(
    preset: ICPreset, deltas, variant: str, coarse_cells: int, **case_kwargs
) -> Dataset:
    """Training set over perturbations of one preset; all interior nodes per delta."""
    deltas = tuple(deltas)
    if not deltas:
        raise ConfigError("need at least one training perturbation")
    blocks = []
    for delta in deltas:
        case = compute_case(preset, delta, variant, coarse_cells, **case_kwargs)
        blocks.append(case_samples(case))
    inputs = np.concatenate([b[0] for b in blocks])
    targets = np.concatenate([b[1] for b in blocks])
    locations = np.concatenate([b[2] for b in blocks])
    provenance = {
        "presets": [preset.name],
        "deltas": list(deltas),
        "variant": variant,
        "coarse_cells": coarse_cells,
        "scheme_ids": list(case.scheme_ids),
        "grid": {"dim": preset.dim, "t_final": preset.t_final},
    }
    provenance.update({k: v for k, v in case_kwargs.items() if _is_jsonable(v)})
    return Dataset(inputs, targets, locations, variant, provenance)


def generate_cross_training_set(
    presets, deltas, coarse_cells, *, dt_in_input: bool,
    intermediate_dt: int = 0, cfl: float = 0.4, cfl_margin: float = 1.0,
    **case_kwargs,
) -> Dataset:
    """Merged training set over several presets (e.g. Lax + Sod).

    With dt_in_input=False every preset is run at one shared time step (the
    smallest CFL step among them). With dt_in_input=True each preset keeps
    its own step, optionally plus `intermediate_dt` evenly spaced steps
    between the presets' extremes, and dt is appended to every input.
    """
    presets = list(presets)
    t_final = presets[0].t_final
    for p in presets:
        if abs(p.t_final - t_final) > 1e-14:
            raise ConfigError("cross-training presets must share t_final")
        if p.dim != 1:
            raise ConfigError("cross-training is defined for 1D presets")
    system = EulerSystem(1)
    own_dt = []
    for p in presets:
        g = _make_grid(p, coarse_cells, dt=1.0)
        dt_raw = cfl_timestep(ic_nodal(p, g, system), cfl, system) * cfl_margin
        own_dt.append(fitted_step(dt_raw, t_final)[0])

    variant = "cg1d_dt" if dt_in_input else "cg1d"
    runs = []  # (preset, dt_override)
    if dt_in_input:
        dt_values = sorted(own_dt)
        if intermediate_dt and len(presets) > 1:
            lo, hi = min(own_dt), max(own_dt)
            for k in range(1, intermediate_dt + 1):
                dt_values.append(lo + k * (hi - lo) / (intermediate_dt + 1))
        for p in presets:
            for dt in sorted(dt_values):
                runs.append((p, fitted_step(dt, t_final)[0]))
    else:
        shared = min(own_dt)
        runs = [(p, shared) for p in presets]

    blocks = []
    for p, dt in runs:
        for delta in deltas:
            case = compute_case(
                p, delta, variant, coarse_cells, cfl=cfl, cfl_margin=cfl_margin,
                dt_override=dt, **case_kwargs,
            )
            blocks.append(case_samples(case))
    inputs = np.concatenate([b[0] for b in blocks])
    targets = np.concatenate([b[1] for b in blocks])
    locations = np.concatenate([b[2] for b in blocks])
    provenance = {
        "presets": [p.name for p in presets],
        "deltas": list(deltas),
        "variant": variant,
        "coarse_cells": coarse_cells,
        "dt_values": sorted({dt for _, dt in runs}),
        "intermediate_dt": intermediate_dt,
    }
    return Dataset(inputs, targets, locations, variant, provenance)


def expected_sample_count(grid: GridSpec) -> int:
    """Interior-node count: boundary ring excluded."""
    if grid.dim == 1:
        return grid.nx - 1
    return (grid.nx - 1) * (grid.ny - 1)


def _is_jsonable(v) -> bool:
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


_DATASET_MAGIC = b"NLDS"


def save_dataset(path, ds: Dataset) -> None:
    """Binary dataset file: magic, version, provenance text, counts, f64 payload."""
    meta = dict(ds.provenance)
    meta["variant"] = ds.variant
    meta["loc_dim"] = 1 if ds.locations.ndim == 1 else ds.locations.shape[1]
    blob = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_DATASET_MAGIC)
        fh.write(struct.pack("<I", 1))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<QII", ds.n, ds.inputs.shape[1], ds.targets.shape[1]))
        fh.write(np.ascontiguousarray(ds.inputs, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ds.targets, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ds.locations, dtype="<f8").tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        if blob[:4] != _DATASET_MAGIC:
            raise CorruptDatasetFileError(f"{path}: bad magic")
        (version,) = struct.unpack_from("<I", blob, 4)
        if version != 1:
            raise CorruptDatasetFileError(f"{path}: unsupported version {version}")
        (mlen,) = struct.unpack_from("<I", blob, 8)
        meta = json.loads(blob[12 : 12 + mlen].decode())
        off = 12 + mlen
        n, d_in, d_out = struct.unpack_from("<QII", blob, off)
        off += 16
        loc_dim = int(meta.get("loc_dim", 1))
        need = 8 * (n * d_in + n * d_out + n * loc_dim)
        if len(blob) - off != need:
            raise CorruptDatasetFileError(
                f"{path}: payload size {len(blob) - off} does not match header ({need})"
            )

        def take(count, shape):
            nonlocal off
            out = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
            off += 8 * count
            return out.reshape(shape).astype(float)

        inputs = take(n * d_in, (n, d_in))
        targets = take(n * d_out, (n, d_out))
        locations = take(n * loc_dim, (n, loc_dim) if loc_dim > 1 else (n,))
    except (struct.error, ValueError, json.JSONDecodeError) as err:
        raise CorruptDatasetFileError(f"{path}: malformed ({err})") from err
    variant = meta.pop("variant", "")
    meta.pop("loc_dim", None)
    return Dataset(inputs, targets, locations.astype(int), variant, meta)
