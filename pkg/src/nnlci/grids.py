"""Uniform nodal grids, field snapshots, ghost filling, and CFL step selection.

Nodes sit at x_i = x_lo + i*dx for i = 0..nx (and likewise in y), so a grid
with nx cells has nx+1 nodes per dimension. Snapshot arrays carry one ghost
node per side; node i lives at array index i+1.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    CorruptDatasetFileError,
    DegenerateFieldError,
    OutOfRangeError,
)

BOUNDARY_KINDS = ("outflow", "reflective", "periodic")


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time grid: bounds, cell counts, fixed time step, boundary kind."""

    dim: int
    x_lo: float
    x_hi: float
    nx: int
    dt: float
    boundary: str = "outflow"
    y_lo: float = 0.0
    y_hi: float = 0.0
    ny: int = 0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.boundary not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary kind {self.boundary!r}")
        if self.nx <= 0 or not self.x_hi > self.x_lo:
            raise ValueError("need nx > 0 and x_hi > x_lo")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.dim == 2:
            if self.ny <= 0 or not self.y_hi > self.y_lo:
                raise ValueError("need ny > 0 and y_hi > y_lo in 2D")
            if abs(self.dx - self.dy) > 1e-12 * max(self.dx, self.dy):
                raise ValueError(f"dx ({self.dx}) and dy ({self.dy}) must match")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_hi - self.y_lo) / self.ny

    @property
    def n_nodes_x(self) -> int:
        return self.nx + 1

    @property
    def n_nodes_y(self) -> int:
        return self.ny + 1

    def x(self, i):
        return self.x_lo + np.asarray(i) * self.dx

    def y(self, j):
        return self.y_lo + np.asarray(j) * self.dy

    def node_xs(self) -> np.ndarray:
        return self.x_lo + np.arange(self.nx + 1) * self.dx

    def node_ys(self) -> np.ndarray:
        return self.y_lo + np.arange(self.ny + 1) * self.dy

    def time(self, level: int) -> float:
        return level * self.dt


def refine(g: GridSpec) -> GridSpec:
    """Halve the spatial grid size and the time step; bounds and boundary kind unchanged."""
    if g.dim == 1:
        return replace(g, nx=2 * g.nx, dt=0.5 * g.dt)
    return replace(g, nx=2 * g.nx, ny=2 * g.ny, dt=0.5 * g.dt)


def coarse_to_fine_index(g: GridSpec, index):
    """Map a coarse-grid index to the refined grid (doubling componentwise).

    ``index`` is an int (1D spatial index) or a tuple whose leading entries
    are spatial indices — (i, n) in 1D, (i, j) or (i, j, n) in 2D. Spatial
    components are range-checked against ``g``; a trailing time level is
    doubled without a check.
    """
    if np.isscalar(index):
        _check_spatial(g, (int(index),))
        return 2 * int(index)
    idx = tuple(int(k) for k in index)
    n_spatial = 1 if g.dim == 1 else 2
    if len(idx) < n_spatial or len(idx) > n_spatial + 1:
        raise ValueError(f"index tuple {idx} does not fit a {g.dim}D grid")
    _check_spatial(g, idx[:n_spatial])
    return tuple(2 * k for k in idx)


def _check_spatial(g: GridSpec, idx):
    bounds = (g.nx,) if g.dim == 1 else (g.nx, g.ny)
    for k, hi in zip(idx, bounds):
        if not 0 <= k <= hi:
            raise OutOfRangeError(f"index {k} outside [0, {hi}]")


@dataclass
class FieldSnapshot:
    """All variable values at one time level on one grid, with ghost width 1.

    ``values`` has shape (ncomp, nx+3) in 1D or (ncomp, nx+3, ny+3) in 2D;
    node i (0..nx) lives at array index i+1.
    """

    grid: GridSpec
    time_index: int
    values: np.ndarray

    def __post_init__(self):
        expect = (self.grid.nx + 3,) if self.grid.dim == 1 else (
            self.grid.nx + 3,
            self.grid.ny + 3,
        )
        if self.values.shape[1:] != expect:
            raise ValueError(
                f"snapshot array shape {self.values.shape[1:]} does not match grid {expect}"
            )

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    @property
    def time(self) -> float:
        return self.grid.time(self.time_index)

    def nodal(self) -> np.ndarray:
        """View of the node values without ghosts, shape (ncomp, nx+1[, ny+1])."""
        if self.grid.dim == 1:
            return self.values[:, 1:-1]
        return self.values[:, 1:-1, 1:-1]

    def node(self, i, j=None) -> np.ndarray:
        if self.grid.dim == 1:
            return self.values[:, i + 1]
        return self.values[:, i + 1, j + 1]

    @classmethod
    def from_nodal(cls, grid, nodal, time_index, system=None):
        """Wrap ghost padding around a (ncomp, nx+1[, ny+1]) node array."""
        nodal = np.asarray(nodal, dtype=float)
        pad = [(0, 0)] + [(1, 1)] * grid.dim
        values = np.pad(nodal, pad)
        snap = cls(grid=grid, time_index=time_index, values=values)
        if system is not None:
            fill_ghosts(snap, system)
        else:
            # edge-copy baseline so ghosts hold valid states until a proper fill
            _fill_outflow(snap.values, grid.dim)
        return snap


def fill_ghosts(snap: FieldSnapshot, system) -> FieldSnapshot:
    """Refill the ghost layer of a snapshot in place, per the grid's boundary kind.

    Works on any variable layout whose reflective sign pattern the system
    provides (identical for primitive and conserved Euler layouts).
    """
    _fill_ghost_array(snap.values, snap.grid, system)
    return snap


def _fill_outflow(a: np.ndarray, dim: int) -> None:
    if dim == 1:
        a[:, 0] = a[:, 1]
        a[:, -1] = a[:, -2]
    else:
        a[:, 0, :] = a[:, 1, :]
        a[:, -1, :] = a[:, -2, :]
        a[:, :, 0] = a[:, :, 1]
        a[:, :, -1] = a[:, :, -2]


def _fill_ghost_array(a: np.ndarray, grid: GridSpec, system) -> None:
    kind = grid.boundary
    if grid.dim == 1:
        if kind == "outflow":
            a[:, 0] = a[:, 1]
            a[:, -1] = a[:, -2]
        elif kind == "reflective":
            sx = system.reflect_signs_x
            a[:, 0] = sx * a[:, 2]
            a[:, -1] = sx * a[:, -3]
        else:  # periodic: node 0 and node nx are the same physical point
            a[:, 0] = a[:, -3]
            a[:, -1] = a[:, 2]
        return
    if kind == "outflow":
        a[:, 0, :] = a[:, 1, :]
        a[:, -1, :] = a[:, -2, :]
        a[:, :, 0] = a[:, :, 1]
        a[:, :, -1] = a[:, :, -2]
    elif kind == "reflective":
        sx = system.reflect_signs_x[:, None]
        sy = system.reflect_signs_y[:, None]
        a[:, 0, :] = sx * a[:, 2, :]
        a[:, -1, :] = sx * a[:, -3, :]
        a[:, :, 0] = sy * a[:, :, 2]
        a[:, :, -1] = sy * a[:, :, -3]
    else:
        a[:, 0, :] = a[:, -3, :]
        a[:, -1, :] = a[:, 2, :]
        a[:, :, 0] = a[:, :, -3]
        a[:, :, -1] = a[:, :, 2]


def cfl_timestep(ic: FieldSnapshot, cfl: float, system) -> float:
    """dt = cfl * dx / S with S the grid maximum of the wave-speed bound.

    The returned step is meant to be held fixed for the whole run.
    """
    if not 0.0 < cfl < 1.0:
        raise ValueError(f"cfl must lie in (0, 1), got {cfl}")
    speeds = system.max_speed(ic.nodal())
    s = float(np.max(speeds))
    if s == 0.0:
        raise DegenerateFieldError("field has zero maximal wave speed")
    return cfl * ic.grid.dx / s


def fitted_step(dt_max: float, t_final: float) -> tuple[float, int]:
    """Largest dt <= dt_max such that an integer number of steps lands on t_final."""
    if dt_max <= 0.0 or t_final <= 0.0:
        raise ValueError("dt_max and t_final must be positive")
    n = max(1, math.ceil(t_final / dt_max - 1e-12))
    return t_final / n, n


@dataclass
class CellField:
    """Cell-averaged values at cell centers, shape (ncomp, nx[, ny]); no ghosts stored."""

    grid: GridSpec
    values: np.ndarray
    time: float = 0.0
    scheme: str = ""

    def center_xs(self) -> np.ndarray:
        return self.grid.x_lo + (np.arange(self.grid.nx) + 0.5) * self.grid.dx

    def center_ys(self) -> np.ndarray:
        return self.grid.y_lo + (np.arange(self.grid.ny) + 0.5) * self.grid.dy


_SNAP_MAGIC = b"NLFS"


def save_snapshot(path, snap, scheme: str = "", extra: dict | None = None) -> None:
    """Write a FieldSnapshot or CellField to the binary snapshot format."""
    if isinstance(snap, CellField):
        layout, payload = "cell", snap.values
        time_index, scheme = None, scheme or snap.scheme
        time = snap.time
    else:
        layout, payload = "node", snap.nodal()
        time_index, time = snap.time_index, snap.time
    g = snap.grid
    meta = {
        "layout": layout,
        "dim": g.dim,
        "nx": g.nx,
        "ny": g.ny,
        "x_lo": g.x_lo,
        "x_hi": g.x_hi,
        "y_lo": g.y_lo,
        "y_hi": g.y_hi,
        "dt": g.dt,
        "boundary": g.boundary,
        "ncomp": int(payload.shape[0]),
        "time_index": time_index,
        "time": time,
        "scheme": scheme,
    }
    if extra:
        meta.update(extra)
    blob = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(_SNAP_MAGIC)
        f.write(struct.pack("<II", 1, len(blob)))
        f.write(blob)
        f.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def load_snapshot(path):
    """Read a snapshot file back into a FieldSnapshot or CellField."""
    with open(path, "rb") as f:
        if f.read(4) != _SNAP_MAGIC:
            raise CorruptDatasetFileError(f"{path}: bad snapshot magic")
        version, mlen = struct.unpack("<II", f.read(8))
        if version != 1:
            raise CorruptDatasetFileError(f"{path}: unsupported snapshot version {version}")
        meta = json.loads(f.read(mlen).decode())
        grid = GridSpec(
            dim=meta["dim"],
            x_lo=meta["x_lo"],
            x_hi=meta["x_hi"],
            nx=meta["nx"],
            dt=meta["dt"],
            boundary=meta["boundary"],
            y_lo=meta["y_lo"],
            y_hi=meta["y_hi"],
            ny=meta["ny"],
        )
        if meta["layout"] == "cell":
            shape = (meta["ncomp"], grid.nx) if grid.dim == 1 else (
                meta["ncomp"], grid.nx, grid.ny)
        else:
            shape = (meta["ncomp"], grid.nx + 1) if grid.dim == 1 else (
                meta["ncomp"], grid.nx + 1, grid.ny + 1)
        payload = np.frombuffer(f.read(int(np.prod(shape)) * 8), dtype="<f8")
        if payload.size != np.prod(shape):
            raise CorruptDatasetFileError(f"{path}: truncated snapshot payload")
        payload = payload.reshape(shape).astype(float)
    if meta["layout"] == "cell":
        return CellField(grid=grid, values=payload, time=meta["time"], scheme=meta["scheme"])
    return FieldSnapshot.from_nodal(grid, payload, meta["time_index"])
