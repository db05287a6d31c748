"""Built-in networks and runs: T-junction, Wheatstone bridge, maze, multi-exit.

All arcs share ``a = 1, b = 0.1, lambda = sqrt(0.33), D = 1, chi = 1``;
transmission coefficients are uniform over the arcs at each node and
``kappa = 1`` between distinct arcs.  The maze and the multi-exit network
are only known from drawings, so their adjacency here is a reconstruction
that honours the arc/node counts, node degrees, short-arc sets and exit
placement; those configs carry ``reconstructed_topology: true``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .config import ScenarioConfig
from .errors import UnknownScenario
from .network import (OUTER_PHI_FLUX, ArcSpec, NetworkSpec, make_network,
                      time_step_for_spacing)

LAMBDA = math.sqrt(0.33)
SPACING = 0.05
RATIO_CAP = 1e12
DEFAULT_SEED = 12345

SCENARIO_NAMES = ("t_example1", "t_example2", "wheatstone_noflux", "wheatstone_inflow", "maze", "nm2e")


def _arcs(edges, lengths):
    return [ArcSpec(i, a, b, lengths[i], LAMBDA) for i, (a, b) in sorted(edges.items())]


def t_network(food: dict[int, float] | None = None) -> NetworkSpec:
    edges = {1: (0, 1), 2: (1, 2), 3: (1, 3)}
    food = food or {}
    kinds = {p: OUTER_PHI_FLUX for p in food}
    return make_network(_arcs(edges, {1: 1.0, 2: 1.0, 3: 1.0}), kinds, phi_flux=food)


def wheatstone_network() -> NetworkSpec:
    edges = {1: (0, 1), 2: (1, 2), 3: (2, 4), 4: (3, 4), 5: (1, 3), 6: (2, 3), 7: (4, 5)}
    lengths = {1: 0.2, 7: 0.2, 2: 0.3, 4: 0.3, 6: 0.3, 3: 2.0, 5: 2.0}
    food = {0: -1.0, 5: 1.0}
    return make_network(_arcs(edges, lengths), {p: OUTER_PHI_FLUX for p in food}, phi_flux=food)


MAZE_EDGES = {
    1: (0, 1), 2: (1, 3), 3: (3, 4), 4: (4, 5), 5: (1, 2), 6: (3, 5), 7: (5, 6),
    8: (2, 8), 9: (2, 6), 10: (6, 7), 11: (6, 8), 12: (8, 9), 13: (9, 7), 14: (7, 10),
    15: (9, 12), 16: (7, 12), 17: (12, 13), 18: (13, 14), 19: (10, 14), 20: (10, 15),
    21: (10, 11), 22: (14, 11), 23: (15, 11), 24: (15, 16), 25: (11, 16), 26: (16, 17),
}
MAZE_SHORT = (1, 5, 9, 10, 14, 21, 25, 26)

NM2E_EDGES = {
    1: (0, 2), 2: (1, 3), 3: (2, 5), 4: (3, 5), 5: (2, 4), 6: (3, 6), 7: (4, 8),
    8: (5, 7), 9: (5, 8), 10: (4, 7), 11: (6, 8), 12: (6, 7), 13: (7, 12), 14: (7, 13),
    15: (7, 14), 16: (8, 12), 17: (8, 13), 18: (8, 14), 19: (12, 9), 20: (13, 10), 21: (14, 11),
}
NM2E_SHORT = (1, 2, 3, 4, 8, 13, 14, 15, 19, 20, 21)


def maze_network() -> NetworkSpec:
    lengths = {i: 0.5 if i in MAZE_SHORT else 10.0 for i in MAZE_EDGES}
    food = {0: -1.0, 17: 1.0}
    return make_network(_arcs(MAZE_EDGES, lengths), {p: OUTER_PHI_FLUX for p in food},
                        phi_flux=food, meta={"reconstructed_topology": True})


def nm2e_network() -> NetworkSpec:
    lengths = {i: 0.5 if i in NM2E_SHORT else 10.0 for i in NM2E_EDGES}
    food = {0: -1.0, 1: -1.0, 9: 1.0, 10: 1.0, 11: 1.0}
    return make_network(_arcs(NM2E_EDGES, lengths), {p: OUTER_PHI_FLUX for p in food},
                        phi_flux=food, meta={"reconstructed_topology": True})


def builtin_scenario(name: str, spacing: float = SPACING) -> ScenarioConfig:
    """Configuration of one of the six reference experiments."""
    if name == "t_example1":
        net = t_network()
        return ScenarioConfig(name, net, time_step_for_spacing(net, spacing), 43.5, DEFAULT_SEED,
                              (0.25, 0.35), {2: 2.0}, "noflux_all")
    if name == "t_example2":
        net = t_network({0: -1.0, 2: 1.0})
        return ScenarioConfig(name, net, time_step_for_spacing(net, spacing), 7.0, DEFAULT_SEED,
                              (0.25, 0.35), 0.0, "phi_inflow_only", expected_path=(1, 2),
                              meta={"food_magnitude": "assumed -1/+1"})
    if name in ("wheatstone_noflux", "wheatstone_inflow"):
        net = wheatstone_network()
        inflow = name == "wheatstone_inflow"
        return ScenarioConfig(name, net, time_step_for_spacing(net, spacing), 200.0 if inflow else 6.0,
                              DEFAULT_SEED, (0.45, 0.55), 0.0,
                              "full_inflow" if inflow else "phi_inflow_only",
                              expected_path=(1, 2, 6, 4, 7))
    if name == "maze":
        net = maze_network()
        return ScenarioConfig(name, net, time_step_for_spacing(net, spacing), 60.0, DEFAULT_SEED,
                              (0.45, 0.55), 0.0, "full_inflow", expected_path=MAZE_SHORT,
                              meta={"reconstructed_topology": True})
    if name == "nm2e":
        net = nm2e_network()
        return ScenarioConfig(name, net, time_step_for_spacing(net, spacing), 180.0, DEFAULT_SEED,
                              (0.45, 0.55), 0.0, "phi_inflow_only", expected_path=NM2E_SHORT,
                              meta={"reconstructed_topology": True})
    raise UnknownScenario(f"unknown scenario {name!r}; choose from {', '.join(SCENARIO_NAMES)}")


# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PathVerdict:
    mean_density: dict[int, float]
    dominant: frozenset[int]
    expected: frozenset[int]
    match: bool
    ratio: float
    rho: float = 0.5

    def summary(self) -> str:
        return (f"dominant={sorted(self.dominant)} expected={sorted(self.expected)} "
                f"match={self.match} ratio={self.ratio:.4g}")


def path_verdict(result, expected, rho: float = 0.5) -> PathVerdict:
    """Compare the arcs carrying most of the density with an expected arc set.

    ``result`` is a :class:`~netchemo.simulator.RunResult` or a mapping of
    arc id to mean density.  An arc is dominant when its mean density is at
    least ``rho`` times the largest one.
    """
    means = result if isinstance(result, dict) else result.arc_mean_density()
    expected = frozenset(int(a) for a in expected)
    top = max(means.values())
    dominant = frozenset(a for a, m in means.items() if m >= rho * top)
    on = [means[a] for a in expected if a in means]
    off = [m for a, m in means.items() if a not in expected]
    if not on:
        ratio = 0.0
    elif not off or max(off) <= 0:
        ratio = RATIO_CAP
    else:
        ratio = min(RATIO_CAP, min(on) / max(off))
    return PathVerdict(dict(means), dominant, expected, dominant == expected, ratio, rho)
