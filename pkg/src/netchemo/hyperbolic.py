"""Second-order AHO update for the diagonal variables on one arc.

With ``u+ = (u + v/lam)/2`` and ``u- = (u - v/lam)/2`` the hyperbolic part
becomes two transport equations coupled through a relaxation term and the
chemotactic source ``f = chi * phi_x * u``.  The stencils below balance the
source against the transport at cell midpoints, which makes them second
order on stationary solutions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ArcGrid


@dataclass
class ArcState:
    u_plus: np.ndarray
    u_minus: np.ndarray
    phi: np.ndarray
    phi_x: np.ndarray
    f: np.ndarray

    @classmethod
    def zeros(cls, n_points: int) -> "ArcState":
        return cls(*(np.zeros(n_points) for _ in range(5)))

    @property
    def u(self) -> np.ndarray:
        return self.u_plus + self.u_minus

    def copy(self) -> "ArcState":
        return ArcState(self.u_plus.copy(), self.u_minus.copy(), self.phi.copy(),
                        self.phi_x.copy(), self.f.copy())


def to_diagonal(u, v, lam):
    """Physical (density, flux) -> Riemann invariants (u+, u-)."""
    w = np.divide(v, lam)
    return 0.5 * (u + w), 0.5 * (u - w)


def from_diagonal(u_plus, u_minus, lam):
    return u_plus + u_minus, lam * (u_plus - u_minus)


def aho_interior_step(state: ArcState, grid: ArcGrid, lam: float):
    """Advance ``(u+, u-)`` by one step at every point the stencils reach.

    ``u-`` is updated for ``j = 0..M`` and ``u+`` for ``j = 1..M+1`` using
    ``f`` at the current time level.  The two entries the stencils cannot
    reach (``u+[0]`` and ``u-[M+1]``) are copied unchanged; the node
    closures overwrite them.
    """
    k, h = grid.k, grid.h
    c = lam * k / h
    up, um, f = state.u_plus, state.u_minus, state.f
    src = k / (4.0 * lam) * (f[:-1] + f[1:])
    self_w = 1.0 - c - 0.25 * k
    upwind_w = c - 0.25 * k

    um_new = um.copy()
    up_new = up.copy()
    um_new[:-1] = self_w * um[:-1] + upwind_w * um[1:] + 0.25 * k * (up[:-1] + up[1:]) - src
    up_new[1:] = self_w * up[1:] + upwind_w * up[:-1] + 0.25 * k * (um[1:] + um[:-1]) + src
    return up_new, um_new


def uv_interior_step(u, v, f, grid: ArcGrid, lam: float):
    """The same scheme written in ``(u, v)``; interior points ``1..M`` only.

    Cross-check for :func:`aho_interior_step`, not used when stepping.
    """
    k, h = grid.k, grid.h
    um1, u0, up1 = u[:-2], u[1:-1], u[2:]
    vm1, v0, vp1 = v[:-2], v[1:-1], v[2:]
    fm1, f0, fp1 = f[:-2], f[1:-1], f[2:]
    u_new = (u0 - k / (2 * h) * (vp1 - vm1) + lam * k / (2 * h) * (up1 - 2 * u0 + um1)
             + k / (4 * lam) * (vp1 - vm1) + k / (4 * lam) * (fm1 - fp1))
    v_new = (v0 - lam ** 2 * k / (2 * h) * (up1 - um1) + lam * k / (2 * h) * (vp1 - 2 * v0 + vm1)
             - k / 4 * (vm1 + 2 * v0 + vp1) + k / 4 * (fm1 + 2 * f0 + fp1))
    return u_new, v_new


@dataclass(frozen=True)
class MonotonicityViolation:
    condition: str
    residual: float

    def __str__(self):
        return f"{self.condition} violated by {self.residual:.3e}"


def check_monotonicity(grid: ArcGrid, lam: float, phi_x_max: float = 0.0, chi: float = 1.0):
    """Evaluate the step-size and gradient bounds for monotone updates.

    Returns the violated conditions with how far past the bound they are.
    """
    h, k = grid.h, grid.k
    out = []
    checks = [
        ("h <= 4 lambda", h - 4 * lam),
        ("k <= 4h/(h + 4 lambda)", k - 4 * h / (h + 4 * lam)),
        ("k <= 1", k - 1.0),
    ]
    if chi > 0:
        checks.append(("phi_x <= (1/k - 1/2)(2 lambda/chi)",
                       phi_x_max - (1.0 / k - 0.5) * 2.0 * lam / chi))
    for name, excess in checks:
        if excess > 0:
            out.append(MonotonicityViolation(name, float(excess)))
    return out
