"""Boundary-adjacent values of (u+, u-): outer closures and node transmission.

Every closure is derived from the discrete mass budget of the interior
stencils.  After an interior step the trapezoidal mass of an arc changes by

    h/2 * (w_left - target_left) + h/2 * (w_right - target_right)

where ``w_*`` is ``u+ + u-`` at the new time level on that end and the
targets depend only on time-n data (:func:`end_target`).  No-flux ends set
``w = target``, inflow ends solve a quadratic so the change equals the
trapezoidal boundary flux, and internal nodes split the targets between the
attached arcs so the node as a whole loses nothing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUp
from .hyperbolic import ArcState
from .network import ArcGrid, NodeSpec

LEFT = "left"
RIGHT = "right"


def end_target(state: ArcState, grid: ArcGrid, lam: float, side: str) -> float:
    """Value of ``u+ + u-`` at the arc end that keeps that end's mass budget at zero."""
    k = grid.k
    c = lam * k / grid.h
    up, um, f = state.u_plus, state.u_minus, state.f
    if side == LEFT:
        return (up[0] * (1 - 2 * c + 0.5 * k) + um[0] * (1 - 0.5 * k)
                + (2 * c - 0.5 * k) * um[1] + 0.5 * k * up[1]
                - k / (2 * lam) * (f[0] + f[1]))
    return (up[-1] * (1 - 0.5 * k) + um[-1] * (1 - 2 * c + 0.5 * k)
            + (2 * c - 0.5 * k) * up[-2] + 0.5 * k * um[-2]
            + k / (2 * lam) * (f[-2] + f[-1]))


def outer_noflux_update(state: ArcState, grid: ArcGrid, lam: float, side: str):
    """Closure at an outer no-flux end: ``u+ = u-`` and zero mass exchange."""
    value = 0.5 * end_target(state, grid, lam, side)
    return value, value


# --------------------------------------------------------------------------
# inflow ends: v = 2/(1+u) at x=0, v = -2/(1+u) at x=L

def inflow_flux(u_end: float, side: str) -> float:
    v = 2.0 / (1.0 + u_end)
    return v if side == LEFT else -v


@dataclass(frozen=True)
class InflowWorkspace:
    """Coefficients of the boundary quadratic for one inflow step.

    The new boundary density ``w = u+ + u-`` solves
    ``alpha w^2 + beta w + gamma = 0``.
    """
    alpha: float
    A: float
    side: str = LEFT

    @property
    def beta(self) -> float:
        return self.alpha + self.A

    @property
    def gamma(self) -> float:
        return self.A - 2.0

    @property
    def discriminant(self) -> float:
        return self.beta ** 2 - 4.0 * self.alpha * self.gamma

    @classmethod
    def from_state(cls, state: ArcState, grid: ArcGrid, lam: float, side: str = LEFT):
        alpha = grid.h / grid.k
        j = 0 if side == LEFT else -1
        u_end = state.u_plus[j] + state.u_minus[j]
        A = -2.0 / (1.0 + u_end) - alpha * end_target(state, grid, lam, side)
        return cls(alpha, A, side)

    def closure(self, y: float) -> float:
        """Missing diagonal variable given the one the interior scheme produced."""
        alpha, beta = self.alpha, self.beta
        disc = ((beta + 2 * alpha * y) ** 2
                - 4 * alpha * (self.gamma + y * (self.A + alpha) + alpha * y * y))
        if not disc >= 0:
            raise BlowUp(f"inflow closure: negative discriminant {disc:.6g}")
        x = (-beta - 2 * alpha * y + math.sqrt(disc)) / (2 * alpha)
        if not math.isfinite(x):
            raise BlowUp("inflow closure: non-finite boundary value")
        return x

    def residual(self, x: float, y: float) -> float:
        """Left-hand side of the quadratic in ``x`` for the pair ``(x, y)``."""
        alpha = self.alpha
        return (alpha * x * x + (self.beta + 2 * alpha * y) * x + self.gamma
                + y * (alpha * (1 + y) + self.A))


def inflow_root_source(workspace: InflowWorkspace, u_minus_new: float) -> float:
    return workspace.closure(u_minus_new)


def inflow_root_sink(workspace: InflowWorkspace, u_plus_new: float) -> float:
    return workspace.closure(u_plus_new)


@dataclass(frozen=True)
class InflowUpdate:
    u_plus: float
    u_minus: float
    v: float
    violations: tuple[str, ...] = ()


def inflow_boundary_step_source(state: ArcState, grid: ArcGrid, lam: float, chi: float,
                                workspace: InflowWorkspace | None = None) -> InflowUpdate:
    """New ``(u+, u-)`` at ``x = 0`` of an arc fed by a source node."""
    k, h = grid.k, grid.h
    c = lam * k / h
    up, um, phi = state.u_plus, state.u_minus, state.phi
    s0 = k * chi * state.phi_x[0] / (4 * lam)
    s1 = k * chi * (phi[2] - phi[0]) / (2 * h) / (4 * lam)
    coef = (1 - c - k / 4 - s0, k / 4 - s0, c - k / 4 - s1, k / 4 - s1)
    um_new = coef[0] * um[0] + coef[1] * up[0] + coef[2] * um[1] + coef[3] * up[1]
    ws = workspace or InflowWorkspace.from_state(state, grid, lam, LEFT)
    up_new = inflow_root_source(ws, um_new)
    v = inflow_flux(up_new + um_new, LEFT)
    violations = tuple(f"source coefficient {name} = {value:.3e} < 0"
                       for name, value in zip(("u-[1]", "u+[1]"), coef[2:]) if value < 0)
    return InflowUpdate(up_new, um_new, v, violations)


def inflow_boundary_step_sink(state: ArcState, grid: ArcGrid, lam: float, chi: float,
                              workspace: InflowWorkspace | None = None) -> InflowUpdate:
    """Mirror of :func:`inflow_boundary_step_source` at ``x = L``."""
    k, h = grid.k, grid.h
    c = lam * k / h
    up, um, phi = state.u_plus, state.u_minus, state.phi
    s0 = k * chi * state.phi_x[-1] / (4 * lam)
    s1 = k * chi * (phi[-1] - phi[-3]) / (2 * h) / (4 * lam)
    coef = (1 - c - k / 4 + s0, k / 4 + s0, c - k / 4 + s1, k / 4 + s1)
    up_new = coef[0] * up[-1] + coef[1] * um[-1] + coef[2] * up[-2] + coef[3] * um[-2]
    ws = workspace or InflowWorkspace.from_state(state, grid, lam, RIGHT)
    um_new = inflow_root_sink(ws, up_new)
    v = inflow_flux(up_new + um_new, RIGHT)
    violations = tuple(f"sink coefficient {name} = {value:.3e} < 0"
                       for name, value in zip(("u+[M]", "u-[M]"), coef[2:]) if value < 0)
    return InflowUpdate(up_new, um_new, v, violations)


# --------------------------------------------------------------------------
# internal nodes

@dataclass(frozen=True)
class NodeClosure:
    node_id: int
    arc_pos: tuple[int, ...]     # positions in net.arcs, ordered as node.attached
    sides: tuple[str, ...]       # RIGHT for incoming arcs, LEFT for outgoing
    lam: np.ndarray
    delta: np.ndarray
    xi: np.ndarray

    @classmethod
    def build(cls, node: NodeSpec, arc_index: dict[int, int], grids, lams) -> "NodeClosure":
        pos = tuple(arc_index[a] for a in node.attached)
        sides = tuple([RIGHT] * len(node.incoming) + [LEFT] * len(node.outgoing))
        h = np.array([grids[p].h for p in pos])
        xi = node.xi_matrix
        delta = h / (h + h @ xi)
        lam = np.array([lams[p] for p in pos])
        return cls(node.id, pos, sides, lam, delta, xi)


def internal_node_update(closure: NodeClosure, states, grids):
    """Boundary values at time n+1 for every arc attached to one internal node.

    First the characteristic leaving each arc into the node is set to
    ``delta * target``; the transmission relations then give the values
    entering the arcs.  Returns ``[(arc_pos, side, u_plus, u_minus), ...]``.
    """
    w = np.array([end_target(states[p], grids[p], lam, side)
                  for p, side, lam in zip(closure.arc_pos, closure.sides, closure.lam)])
    w *= closure.delta
    back = closure.xi @ w
    out = []
    for p, side, into_node, into_arc in zip(closure.arc_pos, closure.sides, w, back):
        if side == RIGHT:
            out.append((p, side, float(into_node), float(into_arc)))
        else:
            out.append((p, side, float(into_arc), float(into_node)))
    return out


def node_flux_residual(closure: NodeClosure, states) -> float:
    """Incoming minus outgoing flux through one node."""
    total = 0.0
    for p, side, lam in zip(closure.arc_pos, closure.sides, closure.lam):
        st = states[p]
        if side == RIGHT:
            total += lam * (st.u_plus[-1] - st.u_minus[-1])
        else:
            total -= lam * (st.u_plus[0] - st.u_minus[0])
    return total
