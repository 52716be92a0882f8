"""Exact solution of the 1D Euler Riemann problem.

Star-region pressure comes from a Newton solve on the standard pressure
function (Toro, Riemann Solvers and Numerical Methods for Fluid Dynamics,
ch. 4); the self-similar solution is then sampled at any x/t.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import VacuumFormationError
from .euler import GasModel, PrimitiveState, sound_speed


def _pressure_fn(p, rho_k, p_k, a_k, g):
    """f_K(p) and its derivative for one side of the star region."""
    if p > p_k:  # shock branch
        A = 2.0 / ((g + 1.0) * rho_k)
        B = (g - 1.0) / (g + 1.0) * p_k
        root = math.sqrt(A / (B + p))
        f = (p - p_k) * root
        df = root * (1.0 - 0.5 * (p - p_k) / (B + p))
    else:  # rarefaction branch
        f = 2.0 * a_k / (g - 1.0) * ((p / p_k) ** ((g - 1.0) / (2.0 * g)) - 1.0)
        df = (p / p_k) ** (-(g + 1.0) / (2.0 * g)) / (rho_k * a_k)
    return f, df


def solve_star(
    left: PrimitiveState,
    right: PrimitiveState,
    gas: GasModel,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> tuple[float, float]:
    """Star-region pressure and velocity (p*, u*).

    Raises
    ------
    VacuumFormationError
        If the pressure positivity condition fails and a vacuum forms.
    """
    g = gas.gamma
    a_l = sound_speed(left, gas)
    a_r = sound_speed(right, gas)
    du = right.u - left.u
    if 2.0 * (a_l + a_r) / (g - 1.0) <= du:
        raise VacuumFormationError("pressure positivity condition violated")

    # adaptive initial guess: PVRS, clipped to the two-rarefaction / two-shock
    # approximations when it falls outside [min(p), max(p)]
    p_pv = 0.5 * (left.p + right.p) - 0.125 * du * (left.rho + right.rho) * (a_l + a_r)
    p_min, p_max = min(left.p, right.p), max(left.p, right.p)
    if p_pv < p_min:
        z = (g - 1.0) / (2.0 * g)
        p0 = (
            (a_l + a_r - 0.5 * (g - 1.0) * du)
            / (a_l / left.p**z + a_r / right.p**z)
        ) ** (1.0 / z)
    elif p_pv > p_max:
        A_l = 2.0 / ((g + 1.0) * left.rho)
        B_l = (g - 1.0) / (g + 1.0) * left.p
        A_r = 2.0 / ((g + 1.0) * right.rho)
        B_r = (g - 1.0) / (g + 1.0) * right.p
        g_l = math.sqrt(A_l / (B_l + p_pv))
        g_r = math.sqrt(A_r / (B_r + p_pv))
        p0 = (g_l * left.p + g_r * right.p - du) / (g_l + g_r)
    else:
        p0 = p_pv
    p = max(p0, 1e-14)

    for _ in range(max_iter):
        f_l, df_l = _pressure_fn(p, left.rho, left.p, a_l, g)
        f_r, df_r = _pressure_fn(p, right.rho, right.p, a_r, g)
        delta = (f_l + f_r + du) / (df_l + df_r)
        p_new = p - delta
        if p_new <= 0.0:
            p_new = 0.5 * p
        if abs(p_new - p) <= tol * 0.5 * (p + p_new):
            p = p_new
            break
        p = p_new
    f_l, _ = _pressure_fn(p, left.rho, left.p, a_l, g)
    f_r, _ = _pressure_fn(p, right.rho, right.p, a_r, g)
    u = 0.5 * (left.u + right.u) + 0.5 * (f_r - f_l)
    return p, u


def exact_riemann_1d(
    left: PrimitiveState, right: PrimitiveState, gas: GasModel, x_over_t: float
) -> PrimitiveState:
    """Sample the exact Riemann solution at similarity coordinate s = x/t."""
    g = gas.gamma
    p_star, u_star = solve_star(left, right, gas)
    s = x_over_t
    gm = (g - 1.0) / (g + 1.0)

    if s < u_star:  # left of the contact
        k, sgn = left, 1.0
    else:
        k, sgn = right, -1.0
    a_k = sound_speed(k, gas)
    ratio = p_star / k.p

    if ratio > 1.0:  # shock on this side
        s_shock = k.u - sgn * a_k * math.sqrt(
            (g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g)
        )
        if sgn * s <= sgn * s_shock:
            return PrimitiveState(k.rho, k.u, 0.0, k.p)
        rho_star = k.rho * (ratio + gm) / (gm * ratio + 1.0)
        return PrimitiveState(rho_star, u_star, 0.0, p_star)

    # rarefaction on this side
    a_star = a_k * ratio ** ((g - 1.0) / (2.0 * g))
    s_head = k.u - sgn * a_k
    s_tail = u_star - sgn * a_star
    if sgn * s <= sgn * s_head:
        return PrimitiveState(k.rho, k.u, 0.0, k.p)
    if sgn * s >= sgn * s_tail:
        rho_star = k.rho * ratio ** (1.0 / g)
        return PrimitiveState(rho_star, u_star, 0.0, p_star)
    # inside the fan
    u = 2.0 / (g + 1.0) * (sgn * a_k + 0.5 * (g - 1.0) * k.u + s)
    a = 2.0 / (g + 1.0) * (a_k + sgn * 0.5 * (g - 1.0) * (k.u - s))
    rho = k.rho * (a / a_k) ** (2.0 / (g - 1.0))
    p = k.p * (a / a_k) ** (2.0 * g / (g - 1.0))
    return PrimitiveState(rho, u, 0.0, p)


def riemann_profile(left, right, gas, xs, t, x0=0.0):
    """Exact solution sampled at positions xs and time t > 0; returns (3, len(xs))."""
    xs = np.asarray(xs, dtype=float)
    out = np.empty((3, xs.size))
    for k, x in enumerate(xs):
        s = exact_riemann_1d(left, right, gas, (x - x0) / t)
        out[:, k] = (s.rho, s.u, s.p)
    return out
