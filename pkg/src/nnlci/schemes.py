"""Low-cost input-generating solvers.

Two families:

* leapfrog + diffusion splitting — a three-level scheme whose first stage is
  a central leapfrog transport step and whose second stage is explicit
  diffusion with coefficient alpha = alpha_factor * dx, applied
  component-by-component to the conserved variables;
* Rusanov — the first-order local-maximal-wave-speed flux scheme (1D).

Snapshots hold primitive variables; every step converts to conserved form,
advances, and converts back, raising NonPhysicalStateError where the
conversion fails.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import NonPhysicalStateError
from .grids import (
    FieldSnapshot,
    GridSpec,
    _fill_ghost_array,
    fitted_step,
    save_snapshot,
)

MAGNITUDE_GUARD = 1e8  # |U| beyond this signals a CFL violation, not physics

SCHEME_KINDS = ("leapfrog_diffusion", "rusanov")


@dataclass(frozen=True)
class SchemeConfig:
    kind: str = "leapfrog_diffusion"
    alpha_factor: float = 1.0  # alpha = alpha_factor * dx
    substeps: int = 1  # diffusion-stage substeps (1 or 2)

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.alpha_factor < 0.0:
            raise ValueError("alpha_factor must be >= 0")
        if self.substeps not in (1, 2):
            raise ValueError("substeps must be 1 or 2")


def _cons_with_ghosts(snap: FieldSnapshot, system) -> np.ndarray:
    U = system.prim_to_cons(snap.values)
    _fill_ghost_array(U, snap.grid, system)
    return U


def _to_snapshot(grid, U_interior, time_index, system) -> FieldSnapshot:
    W = system.cons_to_prim(U_interior)
    return FieldSnapshot.from_nodal(grid, W, time_index, system)


def _diffuse_1d(U, grid, system, alpha, dt, substeps):
    nu = dt * alpha / (grid.dx * grid.dx) / substeps
    for _ in range(substeps):
        _fill_ghost_array(U, grid, system)
        out = U.copy()
        out[:, 1:-1] += nu * (U[:, 2:] - 2.0 * U[:, 1:-1] + U[:, :-2])
        U = out
    return U


def _diffuse_2d(U, grid, system, alpha, dt, substeps):
    nux = dt * alpha / (grid.dx * grid.dx) / substeps
    nuy = dt * alpha / (grid.dy * grid.dy) / substeps
    for _ in range(substeps):
        _fill_ghost_array(U, grid, system)
        out = U.copy()
        out[:, 1:-1, 1:-1] += nux * (
            U[:, 2:, 1:-1] - 2.0 * U[:, 1:-1, 1:-1] + U[:, :-2, 1:-1]
        ) + nuy * (U[:, 1:-1, 2:] - 2.0 * U[:, 1:-1, 1:-1] + U[:, 1:-1, :-2])
        U = out
    return U


def leapfrog_diffusion_step_1d(
    prev: FieldSnapshot, curr: FieldSnapshot, cfg: SchemeConfig, system
) -> FieldSnapshot:
    """Advance one step: leapfrog transport from (n-1, n), then explicit diffusion."""
    g = curr.grid
    if prev.grid != g or curr.time_index != prev.time_index + 1:
        raise ValueError("prev and curr must be consecutive levels on one grid")
    Uprev = system.prim_to_cons(prev.values)
    Ucurr = _cons_with_ghosts(curr, system)
    F = system.flux_x(Ucurr)
    lam = g.dt / g.dx
    Util = np.empty_like(Uprev)
    Util[:, 1:-1] = Uprev[:, 1:-1] - lam * (F[:, 2:] - F[:, :-2])
    alpha = cfg.alpha_factor * g.dx
    if alpha > 0.0:
        Util = _diffuse_1d(Util, g, system, alpha, g.dt, cfg.substeps)
    return _to_snapshot(g, Util[:, 1:-1], curr.time_index + 1, system)


def leapfrog_diffusion_step_2d(
    prev: FieldSnapshot, curr: FieldSnapshot, cfg: SchemeConfig, system
) -> FieldSnapshot:
    """2D analogue: central x/y transport differences, then the 5-point Laplacian."""
    g = curr.grid
    if prev.grid != g or curr.time_index != prev.time_index + 1:
        raise ValueError("prev and curr must be consecutive levels on one grid")
    Uprev = system.prim_to_cons(prev.values)
    Ucurr = _cons_with_ghosts(curr, system)
    F = system.flux_x(Ucurr)
    G = system.flux_y(Ucurr)
    lx = g.dt / g.dx
    ly = g.dt / g.dy
    Util = np.empty_like(Uprev)
    Util[:, 1:-1, 1:-1] = (
        Uprev[:, 1:-1, 1:-1]
        - lx * (F[:, 2:, 1:-1] - F[:, :-2, 1:-1])
        - ly * (G[:, 1:-1, 2:] - G[:, 1:-1, :-2])
    )
    alpha = cfg.alpha_factor * g.dx
    if alpha > 0.0:
        Util = _diffuse_2d(Util, g, system, alpha, g.dt, cfg.substeps)
    return _to_snapshot(g, Util[:, 1:-1, 1:-1], curr.time_index + 1, system)


def rusanov_step_1d(curr: FieldSnapshot, cfg: SchemeConfig, system) -> FieldSnapshot:
    """One step of the first-order Rusanov (local Lax-Friedrichs) scheme."""
    g = curr.grid
    U = _cons_with_ghosts(curr, system)
    W = system.cons_to_prim(U)
    s = system.max_speed(W)
    F = system.flux_x(U)
    s_face = np.maximum(s[:-1], s[1:])
    Fhat = 0.5 * (F[:, :-1] + F[:, 1:]) - 0.5 * s_face * (U[:, 1:] - U[:, :-1])
    lam = g.dt / g.dx
    Unew = U[:, 1:-1] - lam * (Fhat[:, 1:] - Fhat[:, :-1])
    return _to_snapshot(g, Unew, curr.time_index + 1, system)


def lax_friedrichs_bootstrap(curr: FieldSnapshot, system) -> FieldSnapshot:
    """One global Lax-Friedrichs step; supplies the second level the leapfrog needs."""
    g = curr.grid
    U = _cons_with_ghosts(curr, system)
    F = system.flux_x(U)
    if g.dim == 1:
        lam = 0.5 * g.dt / g.dx
        Unew = 0.5 * (U[:, 2:] + U[:, :-2]) - lam * (F[:, 2:] - F[:, :-2])
    else:
        G = system.flux_y(U)
        lx = 0.5 * g.dt / g.dx
        ly = 0.5 * g.dt / g.dy
        Unew = 0.25 * (
            U[:, 2:, 1:-1] + U[:, :-2, 1:-1] + U[:, 1:-1, 2:] + U[:, 1:-1, :-2]
        ) - lx * (F[:, 2:, 1:-1] - F[:, :-2, 1:-1]) - ly * (
            G[:, 1:-1, 2:] - G[:, 1:-1, :-2]
        )
    return _to_snapshot(g, Unew, curr.time_index + 1, system)


def _guard(snap: FieldSnapshot, step: int) -> None:
    if not np.all(np.isfinite(snap.values)):
        raise NonPhysicalStateError(f"non-finite value at step {step}", step=step)
    peak = float(np.max(np.abs(snap.values)))
    if peak > MAGNITUDE_GUARD:
        raise NonPhysicalStateError(
            f"magnitude {peak:.3e} exceeds guard at step {step}; "
            "likely a CFL violation",
            step=step,
        )


def evolve(
    ic: FieldSnapshot,
    g: GridSpec,
    cfg: SchemeConfig,
    t_final: float,
    system,
    prev_lag: int = 1,
    dump_every: int | None = None,
    dump_dir=None,
):
    """Run the configured scheme from t=0 to t_final; return two snapshots.

    The grid's dt is adjusted downward so an integer number of steps lands
    exactly on t_final. Returns (snapshot at level K - prev_lag, snapshot at
    level K); prev_lag=2 yields the lagged pair the stride-2 stencil half
    samples on a refined grid.
    """
    dt, n_steps = fitted_step(g.dt, t_final)
    if n_steps < prev_lag:
        raise ValueError(f"run of {n_steps} steps cannot supply prev_lag={prev_lag}")
    g = replace(g, dt=dt)
    history: list[FieldSnapshot] = [
        FieldSnapshot.from_nodal(g, ic.nodal().copy(), 0, system)
    ]

    def push(s):
        history.append(s)
        if len(history) > prev_lag + 1:
            history.pop(0)
        if dump_every and s.time_index % dump_every == 0 and dump_dir is not None:
            save_snapshot(
                Path(dump_dir) / f"{cfg.kind}_{s.time_index:06d}.nlfs", s, scheme=cfg.kind
            )

    try:
        if cfg.kind == "leapfrog_diffusion":
            push(lax_friedrichs_bootstrap(history[0], system))
            _guard(history[-1], 1)
            step_fn = leapfrog_diffusion_step_1d if g.dim == 1 else leapfrog_diffusion_step_2d
            for n in range(2, n_steps + 1):
                push(step_fn(history[-2], history[-1], cfg, system))
                _guard(history[-1], n)
        else:
            if g.dim != 1:
                raise ValueError("the Rusanov scheme is implemented in 1D only")
            for n in range(1, n_steps + 1):
                push(rusanov_step_1d(history[-1], cfg, system))
                _guard(history[-1], n)
    except NonPhysicalStateError as err:
        if err.step is None:
            err.step = history[-1].time_index + 1
            err.args = (f"{err.args[0]} (step {err.step})",)
        raise
    return history[-1 - prev_lag], history[-1]


def dual_diffusion_evolve(ic: FieldSnapshot, g: GridSpec, c: float, t_final: float, system):
    """Two same-grid runs with diffusion coefficients dx and c*dx.

    The second run's diffusion stage switches to two half-dt substeps when
    c * dt / dx exceeds the explicit stability bound 1/2. Returns the two
    (prev, curr) snapshot pairs.
    """
    if c < 1.0:
        raise ValueError("coefficient ratio c must be >= 1")
    dt, _ = fitted_step(g.dt, t_final)
    substeps = 2 if c * dt / g.dx > 0.5 else 1
    cfg_u = SchemeConfig(kind="leapfrog_diffusion", alpha_factor=1.0, substeps=1)
    cfg_v = SchemeConfig(kind="leapfrog_diffusion", alpha_factor=c, substeps=substeps)
    pair_u = evolve(ic, g, cfg_u, t_final, system)
    pair_v = evolve(ic, g, cfg_v, t_final, system)
    return pair_u, pair_v
