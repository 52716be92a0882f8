"""Ideal-gas Euler equations: pointwise state conversions, fluxes, wave speeds.

States are stored in primitive (rho, u, v, p) or conserved (rho, mx, my, E)
form with E = p/(gamma-1) + rho*(u^2+v^2)/2. One-dimensional problems set
v = 0 and ignore the y-momentum component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPhysicalStateError


@dataclass(frozen=True)
class GasModel:
    """Ideal gas with a single specific-heat ratio."""

    gamma: float = 1.4

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")


@dataclass(frozen=True)
class PrimitiveState:
    """Pointwise gas state in primitive variables (rho, u, v, p)."""

    rho: float
    u: float
    v: float
    p: float

    def __post_init__(self):
        if not (self.rho > 0.0 and self.p > 0.0):
            raise NonPhysicalStateError(
                f"primitive state needs rho > 0 and p > 0, got rho={self.rho}, p={self.p}"
            )


@dataclass(frozen=True)
class ConservativeState:
    """Pointwise gas state in conserved variables (rho, mx, my, E)."""

    rho: float
    mx: float
    my: float
    E: float

    def __post_init__(self):
        if not self.rho > 0.0:
            raise NonPhysicalStateError(f"conserved state needs rho > 0, got {self.rho}")
        e_int = self.E - 0.5 * (self.mx**2 + self.my**2) / self.rho
        if not e_int > 0.0:
            raise NonPhysicalStateError(
                f"conserved state has non-positive internal energy {e_int}"
            )


def total_energy(s: PrimitiveState, gas: GasModel) -> float:
    """E = p/(gamma-1) + rho*(u^2+v^2)/2."""
    return s.p / (gas.gamma - 1.0) + 0.5 * s.rho * (s.u**2 + s.v**2)


def prim_to_cons(s: PrimitiveState, gas: GasModel) -> ConservativeState:
    """Convert a primitive state to conserved variables."""
    return ConservativeState(
        rho=s.rho, mx=s.rho * s.u, my=s.rho * s.v, E=total_energy(s, gas)
    )


def cons_to_prim(c: ConservativeState, gas: GasModel) -> PrimitiveState:
    """Recover primitives from conserved variables.

    Raises
    ------
    NonPhysicalStateError
        If the recovered pressure or density is non-positive (solver blow-up).
    """
    u = c.mx / c.rho
    v = c.my / c.rho
    p = (gas.gamma - 1.0) * (c.E - 0.5 * c.rho * (u * u + v * v))
    if not (c.rho > 0.0 and p > 0.0):
        raise NonPhysicalStateError(f"recovered non-physical state rho={c.rho}, p={p}")
    return PrimitiveState(rho=c.rho, u=u, v=v, p=p)


def flux_x(s: PrimitiveState, gas: GasModel) -> np.ndarray:
    """x-direction Euler flux (rho*u, rho*u^2+p, rho*u*v, u*(E+p)).

    1D callers drop the third (rho*u*v) component.
    """
    E = total_energy(s, gas)
    return np.array(
        [
            s.rho * s.u,
            s.rho * s.u * s.u + s.p,
            s.rho * s.u * s.v,
            s.u * (E + s.p),
        ]
    )


def flux_y(s: PrimitiveState, gas: GasModel) -> np.ndarray:
    """y-direction Euler flux (rho*v, rho*v*u, rho*v^2+p, v*(E+p))."""
    E = total_energy(s, gas)
    return np.array(
        [
            s.rho * s.v,
            s.rho * s.v * s.u,
            s.rho * s.v * s.v + s.p,
            s.v * (E + s.p),
        ]
    )


def sound_speed(s: PrimitiveState, gas: GasModel) -> float:
    return math.sqrt(gas.gamma * s.p / s.rho)


def max_wave_speed(s: PrimitiveState, gas: GasModel) -> float:
    """max(|u|, |v|) + c, the speed bound used for CFL selection and Rusanov dissipation."""
    return max(abs(s.u), abs(s.v)) + sound_speed(s, gas)
