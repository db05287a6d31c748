"""Crank-Nicolson step for the chemoattractant on the whole network.

All grid points of all arcs form one linear system: CN rows at interior
points, second-order one-sided Neumann rows at outer ends and
Kedem-Katchalsky rows at internal nodes.  The matrix only depends on the
grids and coefficients, so it is factorized once and reused every step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import AssemblyError, SingularSystem
from .network import FOOD_KINDS, INTERNAL, ArcGrid, NetworkSpec


def recover_phi_x(phi: np.ndarray, h: float) -> np.ndarray:
    """Second-order derivative: central inside, three-point one-sided at the ends."""
    phi = np.asarray(phi, dtype=float)
    if phi.size < 3:
        raise ValueError("need at least 3 points to recover phi_x")
    out = np.empty_like(phi)
    out[1:-1] = (phi[2:] - phi[:-2]) / (2 * h)
    out[0] = (-phi[2] + 4 * phi[1] - 3 * phi[0]) / (2 * h)
    out[-1] = (phi[-3] - 4 * phi[-2] + 3 * phi[-1]) / (2 * h)
    return out


def compute_f(u, phi_x, chi: float) -> np.ndarray:
    return chi * np.asarray(phi_x) * np.asarray(u)


@dataclass
class GlobalPhiSystem:
    matrix: sp.csc_matrix
    rhs: np.ndarray
    offsets: np.ndarray     # offsets[p] = global row of point j=0 on arc p; offsets[-1] = size

    @property
    def bandwidth(self) -> tuple[int, int]:
        coo = self.matrix.tocoo()
        d = coo.col - coo.row
        return int(max(0, -d.min())), int(max(0, d.max()))

    def index(self, arc_pos: int, j: int) -> int:
        n = self.offsets[arc_pos + 1] - self.offsets[arc_pos]
        if not -n <= j < n:
            raise AssemblyError(f"point {j} outside arc {arc_pos} with {n} points")
        return int(self.offsets[arc_pos] + (j % n))


class PhiOperator:
    """Matrix, right-hand side builder and cached factorization for one network."""

    def __init__(self, net: NetworkSpec, grids: list[ArcGrid]):
        if len(grids) != len(net.arcs):
            raise AssemblyError("one grid per arc required")
        for arc, g in zip(net.arcs, grids):
            if g.arc_id != arc.id:
                raise AssemblyError(f"grid for arc {g.arc_id} in slot of arc {arc.id}")
            if not arc.D > 0:
                raise SingularSystem(f"arc {arc.id}: diffusivity must be positive, got {arc.D}")
        self.net = net
        self.grids = grids
        sizes = np.array([g.n_points for g in grids])
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.size = int(self.offsets[-1])
        self.matrix = self._build_matrix()
        # constant part of the boundary rows (prescribed outer flux)
        self.boundary_rhs = self._boundary_constants()
        self._lu = None

    # global row of (arc position, j); negative j counts from the right end
    def _row(self, p: int, j: int) -> int:
        n = self.grids[p].n_points
        return int(self.offsets[p] + (j % n))

    def _build_matrix(self) -> sp.csc_matrix:
        net, grids = self.net, self.grids
        rows, cols, vals = [], [], []

        def put(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        for p, (arc, g) in enumerate(zip(net.arcs, grids)):
            r = arc.D * g.k / (2 * g.h ** 2)
            base = self.offsets[p]
            j = np.arange(1, g.M + 1)
            rows.extend(base + j)
            cols.extend(base + j)
            vals.extend(np.full(g.M, 1 + 2 * r + arc.b * g.k / 2))
            for shift in (-1, 1):
                rows.extend(base + j)
                cols.extend(base + j + shift)
                vals.extend(np.full(g.M, -r))

        for node in net.nodes:
            ends = [(net.arc_index[a], -1) for a in node.incoming]
            ends += [(net.arc_index[a], 0) for a in node.outgoing]
            kappa = node.kappa_matrix if node.kind == INTERNAL else np.zeros((node.degree,) * 2)
            for i, (p, j_end) in enumerate(ends):
                arc, g = net.arcs[p], grids[p]
                step = 1 if j_end == 0 else -1
                row = self._row(p, j_end)
                coupling = 2.0 * g.h / (3.0 * arc.D)
                put(row, row, 1.0 + coupling * kappa[i].sum())
                put(row, self._row(p, j_end + step), -4.0 / 3.0)
                put(row, self._row(p, j_end + 2 * step), 1.0 / 3.0)
                for m, (q, jq) in enumerate(ends):
                    if m != i and kappa[i, m] != 0.0:
                        put(row, self._row(q, jq), -coupling * kappa[i, m])

        A = sp.coo_matrix((vals, (rows, cols)), shape=(self.size, self.size)).tocsc()
        A.sum_duplicates()
        missing = np.flatnonzero(np.diff(A.tocsr().indptr) == 0)
        if missing.size:
            raise AssemblyError(f"rows without equations: {missing[:10].tolist()}")
        return A

    def _boundary_constants(self) -> np.ndarray:
        out = np.zeros(self.size)
        for node in self.net.outer_nodes:
            if node.kind not in FOOD_KINDS:
                continue
            for a in node.incoming:
                p = self.net.arc_index[a]
                out[self._row(p, -1)] = 2.0 * self.grids[p].h / 3.0 * node.phi_flux
            for a in node.outgoing:
                p = self.net.arc_index[a]
                out[self._row(p, 0)] = -2.0 * self.grids[p].h / 3.0 * node.phi_flux
        return out

    def rhs(self, u_now, u_next, phi_now) -> np.ndarray:
        b = self.boundary_rhs.copy()
        for p, (arc, g) in enumerate(zip(self.net.arcs, self.grids)):
            r = arc.D * g.k / (2 * g.h ** 2)
            ph = phi_now[p]
            b[self.offsets[p] + 1:self.offsets[p + 1] - 1] = (
                ph[1:-1] * (1 - arc.b * g.k / 2) + r * (ph[2:] - 2 * ph[1:-1] + ph[:-2])
                + arc.a * g.k / 2 * (u_next[p][1:-1] + u_now[p][1:-1]))
        return b

    def factorize(self):
        if self._lu is None:
            try:
                self._lu = splu(self.matrix)
            except RuntimeError as exc:
                raise SingularSystem(str(exc)) from exc
        return self._lu

    def solve_vector(self, b: np.ndarray) -> np.ndarray:
        x = self.factorize().solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularSystem("non-finite solution of the chemoattractant system")
        return x

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        return [x[self.offsets[p]:self.offsets[p + 1]].copy() for p in range(len(self.grids))]

    def step(self, u_now, u_next, phi_now) -> list[np.ndarray]:
        return self.split(self.solve_vector(self.rhs(u_now, u_next, phi_now)))


def assemble(net: NetworkSpec, grids: list[ArcGrid], u_now, u_next, phi_now) -> GlobalPhiSystem:
    """Matrix and right-hand side of one Crank-Nicolson step.

    ``u_now``/``u_next``/``phi_now`` are per-arc arrays in ``net.arcs`` order.
    """
    op = PhiOperator(net, grids)
    return GlobalPhiSystem(op.matrix, op.rhs(u_now, u_next, phi_now), op.offsets)


def solve(system: GlobalPhiSystem) -> list[np.ndarray]:
    """Direct sparse LU solve; returns per-arc arrays of the new ``phi``."""
    try:
        x = splu(system.matrix.tocsc()).solve(system.rhs)
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution")
    off = system.offsets
    return [x[off[p]:off[p + 1]].copy() for p in range(len(off) - 1)]
