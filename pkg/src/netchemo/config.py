"""Run descriptions: JSON ingestion, initial data, and end-to-end execution."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .network import (FOOD_KINDS, OUTER_INFLOW_SINK, OUTER_INFLOW_SOURCE, OUTER_NOFLUX,
                      OUTER_PHI_FLUX, NetworkSpec, build_grids, network_from_dict, network_to_dict)

REGIMES = ("noflux_all", "phi_inflow_only", "full_inflow")


@dataclass
class ScenarioConfig:
    name: str
    network: NetworkSpec
    k: float
    t_end: float
    seed: int = 0
    u0_interval: tuple[float, float] = (0.25, 0.35)
    phi0: dict[int, float] | float = 0.0
    boundary_regime: str | None = None
    snapshot_every: int = 0
    output_dir: str | None = None
    expected_path: tuple[int, ...] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.u0_interval
        if lo > hi:
            raise ConfigError(f"u0_interval must satisfy lo <= hi, got {self.u0_interval}")
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if self.boundary_regime is not None and self.boundary_regime not in REGIMES:
            raise ConfigError(f"unknown boundary regime {self.boundary_regime!r}")

    def resolved_network(self) -> NetworkSpec:
        return apply_regime(self.network, self.boundary_regime)

    def phi0_for(self, arc_id: int) -> float:
        if isinstance(self.phi0, dict):
            return float(self.phi0.get(arc_id, 0.0))
        return float(self.phi0)


def apply_regime(net: NetworkSpec, regime: str | None) -> NetworkSpec:
    """Rewrite the kinds of food nodes (outer nodes with chemoattractant inflow).

    ``noflux_all`` turns them into plain no-flux ends, ``phi_inflow_only``
    keeps only the chemoattractant flux, ``full_inflow`` also feeds cells in.
    """
    if regime is None:
        return net
    nodes = []
    for node in net.nodes:
        if node.kind in FOOD_KINDS:
            if regime == "noflux_all":
                node = replace(node, kind=OUTER_NOFLUX, phi_flux=0.0)
            elif regime == "phi_inflow_only":
                node = replace(node, kind=OUTER_PHI_FLUX)
            else:
                kind = OUTER_INFLOW_SOURCE if node.outgoing else OUTER_INFLOW_SINK
                node = replace(node, kind=kind)
        nodes.append(node)
    return NetworkSpec(net.arcs, tuple(nodes), dict(net.meta))


def initial_data(config: ScenarioConfig, grids):
    """Per-point i.i.d. uniform density and per-arc constant ``phi``."""
    rng = np.random.default_rng(config.seed)
    lo, hi = config.u0_interval
    u0 = [rng.uniform(lo, hi, size=g.n_points) for g in grids]
    phi0 = [np.full(g.n_points, config.phi0_for(g.arc_id)) for g in grids]
    return u0, phi0


# --------------------------------------------------------------------------
# JSON

def config_to_dict(config: ScenarioConfig) -> dict:
    d = network_to_dict(config.network)
    d.update({
        "name": config.name,
        "k": config.k,
        "t_end": config.t_end,
        "seed": config.seed,
        "u0_interval": list(config.u0_interval),
        "phi0": ({str(a): v for a, v in sorted(config.phi0.items())}
                 if isinstance(config.phi0, dict) else config.phi0),
        "boundary_regime": config.boundary_regime,
        "snapshot_every": config.snapshot_every,
        "output_dir": config.output_dir,
        "expected_path": list(config.expected_path) if config.expected_path else None,
    })
    if config.meta:
        d["scenario_meta"] = dict(config.meta)
    return d


def config_from_dict(d: dict) -> ScenarioConfig:
    net = network_from_dict(d)
    phi0 = d.get("phi0", 0.0)
    if isinstance(phi0, dict):
        phi0 = {int(a): float(v) for a, v in phi0.items()}
    try:
        k = float(d["k"])
        t_end = float(d.get("t_end", 1.0))
    except KeyError as exc:
        raise ConfigError(f"config is missing {exc}") from exc
    expected = d.get("expected_path")
    return ScenarioConfig(
        name=d.get("name", "custom"), network=net, k=k, t_end=t_end,
        seed=int(d.get("seed", 0)), u0_interval=tuple(d.get("u0_interval", (0.25, 0.35))),
        phi0=phi0, boundary_regime=d.get("boundary_regime"),
        snapshot_every=int(d.get("snapshot_every", 0)), output_dir=d.get("output_dir"),
        expected_path=tuple(expected) if expected else None, meta=d.get("scenario_meta", {}))


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if "k" not in d:
        raise ConfigError(f"{path}: a run config needs a time step 'k'")
    return config_from_dict(d)


# --------------------------------------------------------------------------
# execution

def execute(config: ScenarioConfig, output_dir=None, u_cap=None):
    """Build grids and initial data, integrate, and write snapshots + manifest."""
    from . import io
    from .simulator import DEFAULT_U_CAP, Simulator

    net = config.resolved_network()
    grids = build_grids(net, config.k)
    sim = Simulator(net, grids, u_cap=u_cap or DEFAULT_U_CAP)
    u0, phi0 = initial_data(config, grids)
    state = sim.initial_state(u0, phi0)
    out = output_dir or config.output_dir
    writer = None
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        writer = io.SnapshotWriter(out, net, grids)
    try:
        result = sim.run(state, config.t_end, config.snapshot_every,
                         on_snapshot=writer if writer is not None else None)
    finally:
        sim.close()
    if out is not None:
        io.write_manifest(out / "manifest.json", config, result, writer.files)
    return result


def steps_for(config: ScenarioConfig) -> int:
    return max(0, math.ceil(config.t_end / config.k - 1e-9))
