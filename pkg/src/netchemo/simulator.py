"""Time stepping for the coupled network system.

One step runs, in order: interior AHO update on every arc, outer-end
closures, internal-node closures followed by the transmission relations,
the Crank-Nicolson solve for ``phi`` (which uses the new density), and the
refresh of ``phi_x`` and ``f``.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import coupling
from .coupling import LEFT, RIGHT, NodeClosure
from .errors import BlowUp
from .hyperbolic import ArcState, aho_interior_step, check_monotonicity, from_diagonal
from .network import INFLOW_KINDS, ArcGrid, NetworkSpec
from .parabolic import PhiOperator, compute_f, recover_phi_x

log = logging.getLogger(__name__)

DEFAULT_U_CAP = 1e8
DEFAULT_STATIONARY_TOL = 1e-9
STATIONARY_DWELL = 10
PARALLEL_MIN_POINTS = 50_000


@dataclass
class NetState:
    arcs: list[ArcState]
    t: float = 0.0
    n: int = 0

    def copy(self) -> "NetState":
        return NetState([a.copy() for a in self.arcs], self.t, self.n)


@dataclass
class StepDiagnostics:
    total_mass: float
    per_arc_mass: np.ndarray
    node_flux_residuals: dict[int, float]
    boundary_fluxes: dict[int, float]
    monotonicity_flags: list[str]
    max_abs_state: float
    # mass change minus the trapezoidal boundary-flux term
    mass_ledger_residual: float = 0.0


def trapezoidal_mass(states, grids):
    """Per-arc trapezoidal mass of ``u = u+ + u-`` and the network total."""
    per_arc = np.empty(len(grids))
    for p, (st, g) in enumerate(zip(states, grids)):
        u = st.u_plus + st.u_minus
        per_arc[p] = g.h * (u.sum() - 0.5 * (u[0] + u[-1]))
    return per_arc, float(per_arc.sum())


def _thread_count() -> int:
    raw = os.environ.get("NETCHEMO_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        log.warning("ignoring NETCHEMO_THREADS=%r", raw)
        return 0
    return max(0, n)


@dataclass(frozen=True)
class _OuterEnd:
    node_id: int
    arc_pos: int
    side: str
    inflow: bool


class Simulator:
    """Precomputed closures and the factorized chemoattractant operator for one network."""

    def __init__(self, net: NetworkSpec, grids: list[ArcGrid], u_cap: float = DEFAULT_U_CAP,
                 threads: int | None = None):
        self.net = net
        self.grids = grids
        self.u_cap = u_cap
        self.lam = [a.lam for a in net.arcs]
        self.chi = [a.chi for a in net.arcs]
        self.k = grids[0].k
        self.closures = [NodeClosure.build(n, net.arc_index, grids, self.lam)
                         for n in net.internal_nodes]
        self.outer_ends = []
        for node in net.outer_nodes:
            for a in node.outgoing:
                self.outer_ends.append(_OuterEnd(node.id, net.arc_index[a], LEFT, node.kind in INFLOW_KINDS))
            for a in node.incoming:
                self.outer_ends.append(_OuterEnd(node.id, net.arc_index[a], RIGHT, node.kind in INFLOW_KINDS))
        self.phi_op = PhiOperator(net, grids)
        self.phi_op.factorize()

        self.warnings = []
        for arc, g in zip(net.arcs, grids):
            for v in check_monotonicity(g, arc.lam, 0.0, arc.chi):
                self.warnings.append(f"arc {arc.id}: {v}")
        for w in self.warnings:
            log.warning(w)

        threads = _thread_count() if threads is None else threads
        total_points = sum(g.n_points for g in grids)
        if threads == 0:
            threads = min(os.cpu_count() or 1, len(grids)) if total_points >= PARALLEL_MIN_POINTS else 1
        self._pool = ThreadPoolExecutor(threads) if threads > 1 else None

    # ------------------------------------------------------------------
    def initial_state(self, u0, phi0) -> NetState:
        """Rest state: ``u+ = u- = u0/2`` with ``phi_x`` and ``f`` synchronized."""
        arcs = []
        for p, g in enumerate(self.grids):
            u = np.asarray(u0[p], dtype=float).copy()
            phi = np.broadcast_to(np.asarray(phi0[p], dtype=float), (g.n_points,)).copy()
            if u.shape != (g.n_points,):
                raise ValueError(f"initial density on arc {self.net.arcs[p].id} has shape {u.shape}")
            phi_x = recover_phi_x(phi, g.h)
            arcs.append(ArcState(0.5 * u, 0.5 * u, phi, phi_x, compute_f(u, phi_x, self.chi[p])))
        return NetState(arcs, 0.0, 0)

    def boundary_fluxes(self, state: NetState) -> dict[int, float]:
        out = {}
        for end in self.outer_ends:
            st = state.arcs[end.arc_pos]
            j = 0 if end.side == LEFT else -1
            if end.inflow:
                out[end.node_id] = coupling.inflow_flux(st.u_plus[j] + st.u_minus[j], end.side)
            else:
                out[end.node_id] = self.lam[end.arc_pos] * (st.u_plus[j] - st.u_minus[j])
        return out

    def _inflow_term(self, fluxes: dict[int, float]) -> float:
        """Net inflow rate: ``v`` at left inflow ends minus ``v`` at right ones."""
        total = 0.0
        for end in self.outer_ends:
            if end.inflow:
                total += fluxes[end.node_id] if end.side == LEFT else -fluxes[end.node_id]
        return total

    # ------------------------------------------------------------------
    def step(self, state: NetState, diagnostics: bool = True):
        grids = self.grids
        old = state.arcs

        def interior(p):
            return aho_interior_step(old[p], grids[p], self.lam[p])

        if self._pool is not None:
            new_hyp = list(self._pool.map(interior, range(len(grids))))
        else:
            new_hyp = [interior(p) for p in range(len(grids))]
        up = [h[0] for h in new_hyp]
        um = [h[1] for h in new_hyp]

        flags = []
        for end in self.outer_ends:
            p = end.arc_pos
            j = 0 if end.side == LEFT else -1
            if end.inflow:
                step_fn = (coupling.inflow_boundary_step_source if end.side == LEFT
                           else coupling.inflow_boundary_step_sink)
                try:
                    upd = step_fn(old[p], grids[p], self.lam[p], self.chi[p])
                except BlowUp as exc:
                    raise BlowUp(f"node {end.node_id}: {exc}", t=state.t + self.k) from exc
                up[p][j], um[p][j] = upd.u_plus, upd.u_minus
                flags.extend(f"node {end.node_id}: {v}" for v in upd.violations)
            else:
                up[p][j], um[p][j] = coupling.outer_noflux_update(old[p], grids[p], self.lam[p], end.side)

        for closure in self.closures:
            for p, side, a_plus, a_minus in coupling.internal_node_update(closure, old, grids):
                j = -1 if side == RIGHT else 0
                up[p][j] = a_plus
                um[p][j] = a_minus

        u_now = [a.u_plus + a.u_minus for a in old]
        u_next = [up[p] + um[p] for p in range(len(grids))]
        peak = max(float(np.max(np.abs(u))) for u in u_next)
        if not math.isfinite(peak) or peak > self.u_cap:
            raise BlowUp(f"density reached {peak:.3e} at t = {state.t + self.k:.6g}", t=state.t + self.k)
        phi_new = self.phi_op.step(u_now, u_next, [a.phi for a in old])

        arcs = []
        for p, g in enumerate(grids):
            phi_x = recover_phi_x(phi_new[p], g.h)
            arcs.append(ArcState(up[p], um[p], phi_new[p], phi_x, compute_f(u_next[p], phi_x, self.chi[p])))
        new = NetState(arcs, (state.n + 1) * self.k, state.n + 1)
        if not diagnostics:
            return new, None
        return new, self.diagnose(state, new, flags)

    def diagnose(self, old: NetState, new: NetState, flags=()) -> StepDiagnostics:
        per_arc, total = trapezoidal_mass(new.arcs, self.grids)
        _, total_old = trapezoidal_mass(old.arcs, self.grids)
        fluxes_old = self.boundary_fluxes(old)
        fluxes = self.boundary_fluxes(new)
        expected = 0.5 * self.k * (self._inflow_term(fluxes_old) + self._inflow_term(fluxes))
        residuals = {c.node_id: coupling.node_flux_residual(c, new.arcs) for c in self.closures}
        peak = max(max(float(np.max(np.abs(a.u_plus))), float(np.max(np.abs(a.u_minus))),
                       float(np.max(np.abs(a.phi)))) for a in new.arcs)
        return StepDiagnostics(total, per_arc, residuals, fluxes, list(flags), peak,
                               (total - total_old) - expected)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    # ------------------------------------------------------------------
    def run(self, state: NetState, t_end: float, snapshot_every: int = 0, on_snapshot=None,
            stationary_tol: float = DEFAULT_STATIONARY_TOL, dwell: int = STATIONARY_DWELL,
            stop_when_stationary: bool = True) -> "RunResult":
        n_steps = max(0, math.ceil(t_end / self.k - 1e-9))
        mass_series = [trapezoidal_mass(state.arcs, self.grids)[1]]
        per_arc_series = [trapezoidal_mass(state.arcs, self.grids)[0].tolist()]
        times = [state.t]
        events = []
        calm = 0
        reason = "t_end"
        blowup_time = None
        max_node_res = 0.0
        max_ledger = 0.0
        last = None
        if on_snapshot is not None:
            on_snapshot(state)
        snapped_at = state.n
        for _ in range(n_steps):
            try:
                new, diag = self.step(state)
            except BlowUp as exc:
                reason = "blow_up"
                blowup_time = exc.t if exc.t is not None else state.t + self.k
                log.info("blow-up: %s", exc)
                break
            if diag.monotonicity_flags:
                events.extend((new.n, msg) for msg in diag.monotonicity_flags)
            if diag.node_flux_residuals:
                max_node_res = max(max_node_res, max(abs(r) for r in diag.node_flux_residuals.values()))
            max_ledger = max(max_ledger, abs(diag.mass_ledger_residual))
            change = max(max(np.max(np.abs(a.u_plus - b.u_plus)), np.max(np.abs(a.u_minus - b.u_minus)),
                             np.max(np.abs(a.phi - b.phi))) for a, b in zip(new.arcs, state.arcs)) / self.k
            state, last = new, diag
            mass_series.append(diag.total_mass)
            per_arc_series.append(diag.per_arc_mass.tolist())
            times.append(state.t)
            if on_snapshot is not None and snapshot_every and state.n % snapshot_every == 0:
                on_snapshot(state)
                snapped_at = state.n
            calm = calm + 1 if change < stationary_tol else 0
            if stop_when_stationary and calm >= dwell:
                reason = "stationary"
                break
        if on_snapshot is not None and snapped_at != state.n:
            on_snapshot(state)
        return RunResult(self.net, self.grids, state, reason, blowup_time, times, mass_series,
                         per_arc_series, events, max_node_res, max_ledger, last)


@dataclass
class RunResult:
    net: NetworkSpec
    grids: list[ArcGrid]
    final_state: NetState
    termination: str
    blowup_time: float | None
    times: list[float]
    mass: list[float]
    per_arc_mass: list[list[float]]
    monotonicity_events: list = field(default_factory=list)
    max_node_flux_residual: float = 0.0
    max_mass_ledger_residual: float = 0.0
    last_diagnostics: StepDiagnostics | None = None

    def arc_mean_density(self) -> dict[int, float]:
        per_arc, _ = trapezoidal_mass(self.final_state.arcs, self.grids)
        return {arc.id: float(m / arc.length) for arc, m in zip(self.net.arcs, per_arc)}

    def max_abs_flux(self) -> float:
        return max(float(np.max(np.abs(from_diagonal(a.u_plus, a.u_minus, arc.lam)[1])))
                   for a, arc in zip(self.final_state.arcs, self.net.arcs))


def step(state: NetState, net: NetworkSpec, grids: list[ArcGrid]):
    """Single step without a reusable :class:`Simulator` (factorizes every call)."""
    return Simulator(net, grids, threads=1).step(state)


def run(config, output_dir=None) -> RunResult:
    """Run a :class:`~netchemo.config.ScenarioConfig` end to end."""
    from .config import execute
    return execute(config, output_dir=output_dir)
