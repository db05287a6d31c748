"""Snapshot CSV files and the run manifest."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .hyperbolic import from_diagonal

SNAPSHOT_HEADER = ("arc_id", "j", "x", "u", "v", "phi", "phi_x")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_snapshot(path, state, net, grids):
    lines = [",".join(SNAPSHOT_HEADER)]
    for arc, g, st in zip(net.arcs, grids, state.arcs):
        u, v = from_diagonal(st.u_plus, st.u_minus, arc.lam)
        x = g.x
        for j in range(g.n_points):
            lines.append(f"{arc.id},{j},{_fmt(x[j])},{_fmt(u[j])},{_fmt(v[j])},"
                         f"{_fmt(st.phi[j])},{_fmt(st.phi_x[j])}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> dict[int, dict[str, np.ndarray]]:
    """Arc id -> column arrays (``j``, ``x``, ``u``, ``v``, ``phi``, ``phi_x``)."""
    rows: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != SNAPSHOT_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for rec in reader:
            rows.setdefault(int(rec[0]), []).append([float(x) for x in rec[1:]])
    out = {}
    for arc_id, vals in rows.items():
        a = np.array(vals)
        out[arc_id] = {"j": a[:, 0].astype(int), "x": a[:, 1], "u": a[:, 2], "v": a[:, 3],
                       "phi": a[:, 4], "phi_x": a[:, 5]}
    return out


def snapshot_mean_density(snap) -> dict[int, float]:
    """Trapezoidal mean of ``u`` per arc from a parsed snapshot."""
    out = {}
    for arc_id, cols in snap.items():
        x, u = cols["x"], cols["u"]
        h = x[1] - x[0]
        length = x[-1] - x[0]
        out[arc_id] = float(h * (u.sum() - 0.5 * (u[0] + u[-1])) / length)
    return out


class SnapshotWriter:
    """Callable passed to ``Simulator.run``; writes ``snap_<step>.csv``."""

    def __init__(self, out_dir, net, grids):
        self.out_dir = Path(out_dir)
        self.net = net
        self.grids = grids
        self.files: list[tuple[int, float, str]] = []

    def __call__(self, state):
        name = f"snap_{state.n:07d}.csv"
        write_snapshot(self.out_dir / name, state, self.net, self.grids)
        self.files.append((state.n, state.t, name))


def write_manifest(path, config, result, snapshots):
    from .config import config_to_dict

    doc = {
        "config": config_to_dict(config),
        "seed": config.seed,
        "termination": result.termination,
        "blowup_time": result.blowup_time,
        "steps": result.final_state.n,
        "t_final": result.final_state.t,
        "max_node_flux_residual": result.max_node_flux_residual,
        "max_mass_ledger_residual": result.max_mass_ledger_residual,
        "monotonicity_events": len(result.monotonicity_events),
        "snapshots": [{"step": n, "t": t, "file": f} for n, t, f in snapshots],
        "times": result.times,
        "mass": result.mass,
        "per_arc_mass": {str(arc.id): [row[p] for row in result.per_arc_mass]
                         for p, arc in enumerate(result.net.arcs)},
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
