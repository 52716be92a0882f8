"""Vectorized conservation-law systems.

A system bundles the flux functions, wave-speed bound, and variable
conversions for arrays of shape (ncomp, nx) in 1D or (ncomp, nx, ny) in 2D.
The scalar systems exist for scheme verification (advection, Burgers); the
Euler systems drive the actual experiments.
"""

from __future__ import annotations

import numpy as np

from .errors import NonPhysicalStateError
from .euler import GasModel


class EulerSystem:
    """Compressible Euler equations on variable arrays.

    Primitive layout: (rho, u, p) in 1D, (rho, u, v, p) in 2D.
    Conserved layout: (rho, mx, E) in 1D, (rho, mx, my, E) in 2D.
    """

    is_euler = True

    def __init__(self, dim: int, gas: GasModel | None = None):
        if dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {dim}")
        self.dim = dim
        self.gas = gas if gas is not None else GasModel()
        self.ncomp = 3 if dim == 1 else 4
        self.var_names = ("rho", "u", "p") if dim == 1 else ("rho", "u", "v", "p")
        if dim == 1:
            self.reflect_signs_x = np.array([1.0, -1.0, 1.0])
        else:
            self.reflect_signs_x = np.array([1.0, -1.0, 1.0, 1.0])
            self.reflect_signs_y = np.array([1.0, 1.0, -1.0, 1.0])

    def prim_to_cons(self, W):
        g = self.gas.gamma
        if self.dim == 1:
            rho, u, p = W
            return np.stack([rho, rho * u, p / (g - 1.0) + 0.5 * rho * u * u])
        rho, u, v, p = W
        E = p / (g - 1.0) + 0.5 * rho * (u * u + v * v)
        return np.stack([rho, rho * u, rho * v, E])

    def cons_to_prim(self, U):
        """Recover primitives; raises NonPhysicalStateError at the first bad point."""
        g = self.gas.gamma
        rho = U[0]
        if self.dim == 1:
            u = U[1] / rho
            p = (g - 1.0) * (U[2] - 0.5 * rho * u * u)
            W = np.stack([rho, u, p])
        else:
            u = U[1] / rho
            v = U[2] / rho
            p = (g - 1.0) * (U[3] - 0.5 * rho * (u * u + v * v))
            W = np.stack([rho, u, v, p])
        bad = ~((rho > 0.0) & (W[-1] > 0.0))
        if bad.any():
            node = np.unravel_index(int(np.argmax(bad)), rho.shape)
            raise NonPhysicalStateError(
                f"non-physical state at node {node}: rho={rho[node]}, p={W[-1][node]}",
                node=node,
            )
        return W

    def flux_x(self, U):
        g = self.gas.gamma
        rho = U[0]
        if self.dim == 1:
            u = U[1] / rho
            p = (g - 1.0) * (U[2] - 0.5 * rho * u * u)
            return np.stack([U[1], U[1] * u + p, u * (U[2] + p)])
        u = U[1] / rho
        v = U[2] / rho
        p = (g - 1.0) * (U[3] - 0.5 * rho * (u * u + v * v))
        return np.stack([U[1], U[1] * u + p, U[1] * v, u * (U[3] + p)])

    def flux_y(self, U):
        if self.dim != 2:
            raise ValueError("flux_y is only defined for 2D systems")
        g = self.gas.gamma
        rho, mx, my, E = U
        u = mx / rho
        v = my / rho
        p = (g - 1.0) * (E - 0.5 * rho * (u * u + v * v))
        return np.stack([my, my * u, my * v + p, v * (E + p)])

    def max_speed(self, W):
        """max(|u|, |v|) + c evaluated pointwise on a primitive array."""
        c = np.sqrt(self.gas.gamma * W[-1] / W[0])
        if self.dim == 1:
            return np.abs(W[1]) + c
        return np.maximum(np.abs(W[1]), np.abs(W[2])) + c


class LinearAdvection:
    """Scalar advection U_t + a U_x (+ b U_y) = 0; exact solutions are shifts."""

    is_euler = False
    ncomp = 1
    var_names = ("u",)

    def __init__(self, a: float = 1.0, b: float | None = None):
        self.a = a
        self.b = b
        self.dim = 1 if b is None else 2
        self.reflect_signs_x = np.array([1.0])
        self.reflect_signs_y = np.array([1.0])

    def prim_to_cons(self, W):
        return W.copy()

    def cons_to_prim(self, U):
        return U.copy()

    def flux_x(self, U):
        return self.a * U

    def flux_y(self, U):
        return self.b * U

    def max_speed(self, W):
        s = max(abs(self.a), abs(self.b)) if self.dim == 2 else abs(self.a)
        return np.full(W.shape[1:], s)


class Burgers1D:
    """Scalar Burgers equation, f(U) = U^2/2."""

    is_euler = False
    ncomp = 1
    dim = 1
    var_names = ("u",)
    reflect_signs_x = np.array([1.0])

    def prim_to_cons(self, W):
        return W.copy()

    def cons_to_prim(self, U):
        return U.copy()

    def flux_x(self, U):
        return 0.5 * U * U

    def max_speed(self, W):
        return np.abs(W[0])
