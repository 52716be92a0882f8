"""Input-vector assembly over local space-time domains of dependence.

Every variant samples two solution halves at the same physical space-time
points and concatenates them per variable:

* cg1d / cg1d_dt — coarse-grid half (stride 1, one step back) and refined-grid
  half (stride 2, two steps back); cg1d_dt appends dt to the flat input;
* cg2d — the 2D analogue with 3x3 spatial blocks (10 points per half);
* dc2d — two same-grid runs with different diffusion coefficients, both
  halves stride 1;
* mixed — any two snapshot pairs with the strides recorded by the caller.

The assembled ordering follows the sampling pattern: previous-level points
first (lexicographic in the spatial offsets), then the center point at the
current level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError, OutOfRangeError
from .grids import FieldSnapshot, GridSpec

VARIANTS = ("cg1d", "cg1d_dt", "cg2d", "dc2d", "mixed")

OFFSETS_2D = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 0), (0, 1),
    (1, -1), (1, 0), (1, 1),
)


@dataclass
class StencilSample:
    """One training/prediction record with its space-time provenance."""

    input: np.ndarray
    target: np.ndarray
    location: tuple
    variant: str


def _check_interior_1d(g: GridSpec, i: int) -> None:
    if not 1 <= i <= g.nx - 1:
        raise OutOfRangeError(f"node {i} is not interior to [1, {g.nx - 1}]")


def _check_interior_2d(g: GridSpec, i: int, j: int) -> None:
    if not (1 <= i <= g.nx - 1 and 1 <= j <= g.ny - 1):
        raise OutOfRangeError(f"node ({i}, {j}) is on or outside the boundary ring")


def _check_pair(pair, lag: int) -> None:
    prev, curr = pair
    if prev.grid != curr.grid:
        raise ValueError("snapshot pair must share a grid")
    if curr.time_index - prev.time_index != lag:
        raise ValueError(
            f"snapshot pair must be {lag} level(s) apart, got "
            f"{prev.time_index} -> {curr.time_index}"
        )


def _check_refined(coarse_pair, fine_pair) -> None:
    cg = coarse_pair[1].grid
    fg = fine_pair[1].grid
    if fg.nx != 2 * cg.nx or (cg.dim == 2 and fg.ny != 2 * cg.ny):
        raise ValueError("fine pair must live on the refinement of the coarse grid")
    if abs(fg.dt * 2.0 - cg.dt) > 1e-12 * cg.dt:
        raise ValueError("fine grid must step at half the coarse dt")
    if fine_pair[1].time_index != 2 * coarse_pair[1].time_index:
        raise ValueError("fine and coarse final levels refer to different times")


def sample_half_1d(prev: FieldSnapshot, curr: FieldSnapshot, i: int, stride: int):
    """(ncomp, 4) block: previous level at i-stride, i, i+stride; current at i."""
    v_prev, v_curr = prev.values, curr.values
    cols = [i - stride + 1, i + 1, i + stride + 1]
    return np.stack(
        [v_prev[:, cols[0]], v_prev[:, cols[1]], v_prev[:, cols[2]], v_curr[:, i + 1]],
        axis=1,
    )


def sample_half_2d(prev: FieldSnapshot, curr: FieldSnapshot, i: int, j: int, stride: int):
    """(ncomp, 10) block: the 3x3 previous-level pattern, then the current center."""
    v_prev = prev.values
    entries = [
        v_prev[:, i + di * stride + 1, j + dj * stride + 1] for di, dj in OFFSETS_2D
    ]
    entries.append(curr.values[:, i + 1, j + 1])
    return np.stack(entries, axis=1)


def half_coords_1d(g: GridSpec, level_prev: int, level_curr: int, i: int, stride: int):
    """The (x, t) coordinate of each entry produced by sample_half_1d."""
    tp = g.time(level_prev)
    return [
        (g.x(i - stride), tp),
        (g.x(i), tp),
        (g.x(i + stride), tp),
        (g.x(i), g.time(level_curr)),
    ]


def half_coords_2d(g: GridSpec, level_prev: int, level_curr: int, i: int, j: int, stride: int):
    tp = g.time(level_prev)
    coords = [
        (g.x(i + di * stride), g.y(j + dj * stride), tp) for di, dj in OFFSETS_2D
    ]
    coords.append((g.x(i), g.y(j), g.time(level_curr)))
    return coords


def assemble_2cgnn_1d(coarse_pair, fine_pair, i: int):
    """Per-variable 8-vectors from the coarse (stride 1) and refined (stride 2) halves."""
    _check_pair(coarse_pair, 1)
    _check_pair(fine_pair, 2)
    _check_refined(coarse_pair, fine_pair)
    _check_interior_1d(coarse_pair[1].grid, i)
    half_c = sample_half_1d(coarse_pair[0], coarse_pair[1], i, 1)
    half_f = sample_half_1d(fine_pair[0], fine_pair[1], 2 * i, 2)
    return np.concatenate([half_c, half_f], axis=1)


def assemble_2cgnn_2d(coarse_pair, fine_pair, i: int, j: int):
    """Per-variable 20-vectors; entries 1-10 coarse, 11-20 refined at the same points."""
    _check_pair(coarse_pair, 1)
    _check_pair(fine_pair, 2)
    _check_refined(coarse_pair, fine_pair)
    _check_interior_2d(coarse_pair[1].grid, i, j)
    half_c = sample_half_2d(coarse_pair[0], coarse_pair[1], i, j, 1)
    half_f = sample_half_2d(fine_pair[0], fine_pair[1], 2 * i, 2 * j, 2)
    return np.concatenate([half_c, half_f], axis=1)


def assemble_2dcnn_2d(u_pair, v_pair, i: int, j: int):
    """Per-variable 20-vectors from two same-grid runs (stride 1 both halves)."""
    _check_pair(u_pair, 1)
    _check_pair(v_pair, 1)
    if u_pair[1].grid != v_pair[1].grid:
        raise ValueError("both runs must share one grid")
    if u_pair[1].time_index != v_pair[1].time_index:
        raise ValueError("both runs must end at the same level")
    _check_interior_2d(u_pair[1].grid, i, j)
    half_u = sample_half_2d(u_pair[0], u_pair[1], i, j, 1)
    half_v = sample_half_2d(v_pair[0], v_pair[1], i, j, 1)
    return np.concatenate([half_u, half_v], axis=1)


def concat_euler_input(per_variable, dt: float | None = None) -> np.ndarray:
    """Flatten per-variable vectors in variable order; optionally append dt once.

    Accepts the (nvars, L) arrays produced by the assemblers or a sequence of
    equal-length 1D vectors.
    """
    if isinstance(per_variable, np.ndarray):
        block = per_variable
    else:
        lengths = {np.asarray(v).shape for v in per_variable}
        if len(lengths) != 1:
            raise LengthMismatchError(f"per-variable vectors differ in shape: {lengths}")
        block = np.stack([np.asarray(v, dtype=float) for v in per_variable])
    flat = block.reshape(-1)
    if dt is not None:
        flat = np.concatenate([flat, [float(dt)]])
    return flat


def interior_index_arrays(g: GridSpec):
    """Interior node indices in the deterministic sampling order."""
    ii = np.arange(1, g.nx)
    if g.dim == 1:
        return ii
    jj = np.arange(1, g.ny)
    II, JJ = np.meshgrid(ii, jj, indexing="ij")
    return II.ravel(), JJ.ravel()


def assemble_batch(pair_a, pair_b, stride_a: int = 1, stride_b: int = 2, dt: float | None = None):
    """Inputs for every interior node of the formatting (coarsest) grid, vectorized.

    Either pair may live on a refinement of the other's grid; samples are
    taken at the coincident nodes. Returns (inputs, locations): inputs has
    shape (N, nvars * points [+ 1]) and matches the per-node assemblers row
    by row; locations index the formatting grid, (N,) in 1D or (N, 2) in 2D,
    ordered x-major.
    """
    ga, gb = pair_a[1].grid, pair_b[1].grid
    fmt = ga if ga.nx <= gb.nx else gb
    ra, rb = ga.nx // fmt.nx, gb.nx // fmt.nx
    if fmt.dim == 1:
        ii = interior_index_arrays(fmt)
        block_a = _gather_half_1d(pair_a, ii * ra, stride_a)
        block_b = _gather_half_1d(pair_b, ii * rb, stride_b)
        locations = ii
    else:
        ii, jj = interior_index_arrays(fmt)
        block_a = _gather_half_2d(pair_a, ii * ra, jj * ra, stride_a)
        block_b = _gather_half_2d(pair_b, ii * rb, jj * rb, stride_b)
        locations = np.stack([ii, jj], axis=1)
    block = np.concatenate([block_a, block_b], axis=1)  # (ncomp, 2*pts, N)
    inputs = block.transpose(2, 0, 1).reshape(block.shape[2], -1)
    if dt is not None:
        inputs = np.concatenate(
            [inputs, np.full((inputs.shape[0], 1), float(dt))], axis=1
        )
    return inputs, locations


def _gather_half_1d(pair, ii, stride):
    prev, curr = pair
    vp, vc = prev.values, curr.values
    a = ii + 1  # ghost offset
    return np.stack(
        [vp[:, a - stride], vp[:, a], vp[:, a + stride], vc[:, a]], axis=1
    )


def _gather_half_2d(pair, ii, jj, stride):
    prev, curr = pair
    vp, vc = prev.values, curr.values
    a, b = ii + 1, jj + 1
    entries = [vp[:, a + di * stride, b + dj * stride] for di, dj in OFFSETS_2D]
    entries.append(vc[:, a, b])
    return np.stack(entries, axis=1)
