"""Graph description of the network: arcs, nodes, transmission coefficients.

Arcs carry their own physics (speed, diffusivity, production/degradation,
sensitivity) and an artificial orientation ``from_node -> to_node``.  An arc
is parametrized as ``[0, L]`` with ``x = 0`` at ``from_node``.  Nodes hold the
transmission matrices ``xi`` (cell densities) and ``kappa`` (chemoattractant),
both indexed over ``node.attached`` = incoming arcs followed by outgoing arcs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, IncompatibleGrid

INTERNAL = "internal"
OUTER_NOFLUX = "outer_noflux"
OUTER_INFLOW_SOURCE = "outer_inflow_source"
OUTER_INFLOW_SINK = "outer_inflow_sink"
OUTER_PHI_FLUX = "outer_phi_flux"

NODE_KINDS = (INTERNAL, OUTER_NOFLUX, OUTER_INFLOW_SOURCE, OUTER_INFLOW_SINK, OUTER_PHI_FLUX)
INFLOW_KINDS = (OUTER_INFLOW_SOURCE, OUTER_INFLOW_SINK)
# outer nodes where chemoattractant is injected ("food")
FOOD_KINDS = (OUTER_PHI_FLUX, OUTER_INFLOW_SOURCE, OUTER_INFLOW_SINK)

VALIDATION_TOL = 1e-12
GRID_TOL = 1e-9


@dataclass(frozen=True)
class ArcSpec:
    id: int
    from_node: int
    to_node: int
    length: float
    lam: float
    D: float = 1.0
    a: float = 1.0
    b: float = 0.1
    chi: float = 1.0


@dataclass(frozen=True)
class NodeSpec:
    id: int
    kind: str
    incoming: tuple[int, ...]
    outgoing: tuple[int, ...]
    xi: tuple[tuple[float, ...], ...]
    kappa: tuple[tuple[float, ...], ...]
    phi_flux: float = 0.0

    @property
    def attached(self) -> tuple[int, ...]:
        return self.incoming + self.outgoing

    @property
    def degree(self) -> int:
        return len(self.incoming) + len(self.outgoing)

    @property
    def is_outer(self) -> bool:
        return self.kind != INTERNAL

    @property
    def xi_matrix(self) -> np.ndarray:
        return np.array(self.xi, dtype=float).reshape(self.degree, self.degree)

    @property
    def kappa_matrix(self) -> np.ndarray:
        return np.array(self.kappa, dtype=float).reshape(self.degree, self.degree)


@dataclass(frozen=True)
class NetworkSpec:
    arcs: tuple[ArcSpec, ...]
    nodes: tuple[NodeSpec, ...]
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    @cached_property
    def arc_index(self) -> dict[int, int]:
        """Arc id -> position in ``arcs``."""
        return {arc.id: pos for pos, arc in enumerate(self.arcs)}

    @cached_property
    def node_index(self) -> dict[int, int]:
        return {node.id: pos for pos, node in enumerate(self.nodes)}

    def arc(self, arc_id: int) -> ArcSpec:
        return self.arcs[self.arc_index[arc_id]]

    def node(self, node_id: int) -> NodeSpec:
        return self.nodes[self.node_index[node_id]]

    @property
    def internal_nodes(self) -> list[NodeSpec]:
        return [n for n in self.nodes if n.kind == INTERNAL]

    @property
    def outer_nodes(self) -> list[NodeSpec]:
        return [n for n in self.nodes if n.kind != INTERNAL]


def _matrix_tuple(m) -> tuple[tuple[float, ...], ...]:
    return tuple(tuple(float(x) for x in row) for row in np.atleast_2d(m))


def uniform_xi(node: NodeSpec) -> NodeSpec:
    """Return ``node`` with every transmission coefficient equal to 1/N."""
    n = node.degree
    return replace(node, xi=_matrix_tuple(np.full((n, n), 1.0 / n)))


def ones_offdiag_kappa(node: NodeSpec) -> NodeSpec:
    n = node.degree
    return replace(node, kappa=_matrix_tuple(np.ones((n, n)) - np.eye(n)))


def incidence(arcs: Iterable[ArcSpec]) -> dict[int, tuple[list[int], list[int]]]:
    """Node id -> (incoming arc ids, outgoing arc ids), both sorted."""
    inc: dict[int, tuple[list[int], list[int]]] = {}
    for arc in arcs:
        inc.setdefault(arc.to_node, ([], []))[0].append(arc.id)
        inc.setdefault(arc.from_node, ([], []))[1].append(arc.id)
    return {p: (sorted(i), sorted(o)) for p, (i, o) in inc.items()}


def make_network(arcs: Sequence[ArcSpec], kinds: dict[int, str] | None = None,
                 xi: dict | None = None, kappa: dict | None = None,
                 phi_flux: dict[int, float] | None = None, meta: dict | None = None) -> NetworkSpec:
    """Build a network from arcs, filling incidence sets from the orientation.

    Nodes not listed in ``kinds`` are internal when they have two or more
    arcs and no-flux outer nodes otherwise.  ``xi``/``kappa`` map node ids to
    explicit matrices; missing entries default to uniform ``xi`` and
    ``kappa = 1`` off the diagonal (zero on outer nodes).
    """
    kinds = kinds or {}
    xi = xi or {}
    kappa = kappa or {}
    phi_flux = phi_flux or {}
    nodes = []
    for p, (inc, out) in sorted(incidence(arcs).items()):
        deg = len(inc) + len(out)
        kind = kinds.get(p, INTERNAL if deg >= 2 else OUTER_NOFLUX)
        if p in xi:
            xi_m = np.asarray(xi[p], dtype=float).reshape(deg, deg)
        else:
            xi_m = np.full((deg, deg), 1.0 / deg)
        if p in kappa:
            kappa_m = np.asarray(kappa[p], dtype=float).reshape(deg, deg)
        elif kind == INTERNAL:
            kappa_m = np.ones((deg, deg)) - np.eye(deg)
        else:
            kappa_m = np.zeros((deg, deg))
        nodes.append(NodeSpec(p, kind, tuple(inc), tuple(out), _matrix_tuple(xi_m),
                              _matrix_tuple(kappa_m), float(phi_flux.get(p, 0.0))))
    return NetworkSpec(tuple(arcs), tuple(nodes), dict(meta or {}))


# --------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Violation:
    rule: str
    where: str
    residual: float
    message: str = ""

    def __str__(self):
        return f"{self.where}: {self.rule} (residual {self.residual:.3e}) {self.message}".rstrip()


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def add(self, rule, where, residual, message=""):
        self.violations.append(Violation(rule, where, float(residual), message))

    def __str__(self):
        if self.valid:
            return "network valid"
        return "\n".join(str(v) for v in self.violations)


def validate(net: NetworkSpec, tol: float = VALIDATION_TOL) -> ValidationReport:
    """Check every structural constraint the schemes rely on.

    Never raises; an empty report means the network is usable.
    """
    rep = ValidationReport()
    node_ids = {n.id for n in net.nodes}
    if len(node_ids) != len(net.nodes):
        rep.add("unique node ids", "network", len(net.nodes) - len(node_ids))
    if len({a.id for a in net.arcs}) != len(net.arcs):
        rep.add("unique arc ids", "network", len(net.arcs) - len({a.id for a in net.arcs}))

    for arc in net.arcs:
        where = f"arc {arc.id}"
        for name, value in (("length > 0", arc.length), ("lambda > 0", arc.lam), ("D > 0", arc.D)):
            if not value > 0:
                rep.add(name, where, -value)
        for name, value in (("a >= 0", arc.a), ("b >= 0", arc.b)):
            if value < 0:
                rep.add(name, where, -value)
        if arc.from_node == arc.to_node:
            rep.add("no self-loops", where, 1.0)
        for end in (arc.from_node, arc.to_node):
            if end not in node_ids:
                rep.add("endpoint exists", where, 1.0, f"missing node {end}")

    expected = incidence(net.arcs)
    lam = {a.id: a.lam for a in net.arcs}
    for node in net.nodes:
        where = f"node {node.id}"
        if node.kind not in NODE_KINDS:
            rep.add("known node kind", where, 1.0, repr(node.kind))
        inc, out = expected.get(node.id, ([], []))
        if list(node.incoming) != inc or list(node.outgoing) != out:
            rep.add("incidence matches orientation", where, 1.0,
                    f"expected I={inc} O={out}, got I={list(node.incoming)} O={list(node.outgoing)}")
        deg = node.degree
        if deg == 0:
            rep.add("node attached to an arc", where, 1.0)
            continue
        if node.kind == INTERNAL and deg < 2:
            rep.add("internal node has >= 2 arcs", where, 2 - deg)
        if node.kind != INTERNAL and deg != 1:
            rep.add("outer node has exactly 1 arc", where, abs(deg - 1))
        try:
            xi = node.xi_matrix
            kappa = node.kappa_matrix
        except ValueError:
            rep.add("matrix shape", where, 1.0, f"xi/kappa must be {deg}x{deg}")
            continue
        low = max(0.0, -xi.min())
        high = max(0.0, xi.max() - 1.0)
        if max(low, high) > tol:
            rep.add("0 <= xi <= 1", where, max(low, high))
        for r, arc_id in enumerate(node.attached):
            res = abs(xi[r].sum() - 1.0)
            if res > tol:
                rep.add("xi row sum = 1", f"{where}, row arc {arc_id}", res)
        if all(a in lam for a in node.attached):
            lam_vec = np.array([lam[a] for a in node.attached])
            flux = lam_vec @ xi - lam_vec
            for c, arc_id in enumerate(node.attached):
                if abs(flux[c]) > tol:
                    rep.add("sum_i lambda_i xi_ij = lambda_j", f"{where}, column arc {arc_id}", abs(flux[c]))
        asym = np.abs(kappa - kappa.T).max()
        if asym > tol:
            rep.add("kappa symmetric", where, asym)
        if kappa.min() < 0:
            rep.add("kappa >= 0", where, -kappa.min())
        diag = np.abs(np.diag(kappa)).max()
        if diag > tol:
            rep.add("kappa_ii = 0", where, diag)

    if net.nodes and not any(v.rule == "endpoint exists" for v in rep.violations):
        if not is_connected(net):
            rep.add("graph connected", "network", 1.0)
    return rep


def _adjacency(net: NetworkSpec, arc_ids=None):
    pos = net.node_index
    arcs = [a for a in net.arcs if arc_ids is None or a.id in arc_ids]
    rows = [pos[a.from_node] for a in arcs]
    cols = [pos[a.to_node] for a in arcs]
    n = len(net.nodes)
    return coo_matrix((np.ones(len(arcs)), (rows, cols)), shape=(n, n))


def is_connected(net: NetworkSpec) -> bool:
    ncomp, _ = connected_components(_adjacency(net), directed=False)
    return ncomp == 1


def connects(net: NetworkSpec, arc_ids, node_a: int, node_b: int) -> bool:
    """True if ``node_a`` and ``node_b`` are joined using only ``arc_ids``."""
    _, labels = connected_components(_adjacency(net, set(arc_ids)), directed=False)
    return labels[net.node_index[node_a]] == labels[net.node_index[node_b]]


# --------------------------------------------------------------------------
# grids

@dataclass(frozen=True)
class ArcGrid:
    arc_id: int
    length: float
    h: float
    k: float
    M: int

    @property
    def n_points(self) -> int:
        return self.M + 2

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(self.n_points)


def build_grids(net: NetworkSpec, k: float) -> list[ArcGrid]:
    """One grid per arc with ``h = 2 k lambda`` and ``L = (M + 1) h``."""
    if not k > 0:
        raise ValueError(f"time step must be positive, got {k}")
    grids = []
    for arc in net.arcs:
        h = 2.0 * k * arc.lam
        ratio = arc.length / h
        cells = round(ratio)
        if abs(ratio - cells) > GRID_TOL or cells < 2:
            raise IncompatibleGrid(
                f"arc {arc.id}: L/(2 k lambda) = {ratio:.12g} is not an integer >= 2; adjust k")
        grids.append(ArcGrid(arc.id, arc.length, arc.length / cells, k, cells - 1))
    return grids


def compatible_time_step(net: NetworkSpec, k_max: float, max_cells: int = 1_000_000) -> float:
    """Largest ``k <= k_max`` for which every arc gets an integer cell count.

    Scans cell counts on the arc with the smallest ``L/lambda`` upward until
    the induced step fits all other arcs.
    """
    q = [a.length / a.lam for a in net.arcs]
    q0 = min(q)
    n = max(2, math.ceil(q0 / (2.0 * k_max) - GRID_TOL))
    while n <= max_cells:
        ratios = [n * qi / q0 for qi in q]
        if all(abs(r - round(r)) <= GRID_TOL for r in ratios):
            return q0 / (2.0 * n)
        n += 1
    raise IncompatibleGrid(f"no compatible time step below {k_max} within {max_cells} cells")


def time_step_for_spacing(net: NetworkSpec, h: float) -> float:
    """Time step giving spacing ``h`` on the first arc (``k = h / (2 lambda)``)."""
    return compatible_time_step(net, h / (2.0 * net.arcs[0].lam) * (1 + 1e-12))


# --------------------------------------------------------------------------
# JSON-shaped dicts

def network_from_dict(d: dict) -> NetworkSpec:
    """Parse the ``arcs``/``nodes`` arrays of a config document."""
    try:
        arcs = [ArcSpec(int(a["id"]), int(a["from"]), int(a["to"]), float(a["length"]),
                        float(a["lambda"]), float(a.get("D", 1.0)), float(a.get("a", 1.0)),
                        float(a.get("b", 0.1)), float(a.get("chi", 1.0)))
                for a in d["arcs"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad arc entry: {exc}") from exc
    kinds, xi, kappa, phi_flux = {}, {}, {}, {}
    for n in d.get("nodes", []):
        p = int(n["id"])
        kinds[p] = n.get("kind", INTERNAL)
        x = n.get("xi", "uniform")
        if x != "uniform":
            xi[p] = x
        kp = n.get("kappa", "ones-offdiag")
        if kp != "ones-offdiag":
            kappa[p] = kp
        elif kinds[p] != INTERNAL:
            kappa[p] = [[0.0]]
        phi_flux[p] = float(n.get("phi_flux", 0.0))
    inc = incidence(arcs)
    for p in kinds:
        if p not in inc:
            raise ConfigError(f"node {p} is not attached to any arc")
    try:
        return make_network(arcs, kinds, xi, kappa, phi_flux, d.get("meta"))
    except ValueError as exc:
        raise ConfigError(f"bad node matrix: {exc}") from exc


def network_to_dict(net: NetworkSpec) -> dict:
    out = {
        "arcs": [{"id": a.id, "from": a.from_node, "to": a.to_node, "length": a.length,
                  "lambda": a.lam, "D": a.D, "a": a.a, "b": a.b, "chi": a.chi} for a in net.arcs],
        "nodes": [{"id": n.id, "kind": n.kind, "xi": [list(r) for r in n.xi],
                   "kappa": [list(r) for r in n.kappa], "phi_flux": n.phi_flux} for n in net.nodes],
    }
    if net.meta:
        out["meta"] = dict(net.meta)
    return out
