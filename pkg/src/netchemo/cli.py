"""Command-line entry point: ``netchemo simulate | validate | list-scenarios | verdict``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .config import config_from_dict, execute
from .errors import ConfigError, IncompatibleGrid, UnknownScenario
from .network import build_grids, network_from_dict, validate
from .scenarios import SCENARIO_NAMES, builtin_scenario, path_verdict

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BLOWUP = 2
EXIT_IO = 3


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def cmd_list(args) -> int:
    for name in SCENARIO_NAMES:
        print(name)
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        doc = _read_json(args.config)
    except OSError as exc:
        _err(f"cannot read {args.config}: {exc}")
        return EXIT_IO
    except json.JSONDecodeError as exc:
        _err(f"{args.config}: malformed JSON: {exc}")
        return EXIT_INVALID
    try:
        net = network_from_dict(doc)
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        _err(f"{args.config}: {exc}")
        return EXIT_INVALID
    report = validate(net)
    if not report.valid:
        _err(str(report))
        return EXIT_INVALID
    if "k" in doc:
        try:
            build_grids(net, float(doc["k"]))
        except IncompatibleGrid as exc:
            _err(str(exc))
            return EXIT_INVALID
    print(f"{args.config}: valid ({len(net.arcs)} arcs, {len(net.nodes)} nodes)")
    return EXIT_OK


def _load_run_config(args):
    if args.scenario:
        return builtin_scenario(args.scenario)
    return config_from_dict(_read_json(args.config))


def cmd_simulate(args) -> int:
    try:
        config = _load_run_config(args)
    except UnknownScenario as exc:
        _err(str(exc.args[0]))
        return EXIT_INVALID
    except OSError as exc:
        _err(f"cannot read {args.config}: {exc}")
        return EXIT_IO
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        _err(f"invalid config: {exc}")
        return EXIT_INVALID

    if args.k is not None:
        config.k = args.k
    if args.t_end is not None:
        config.t_end = args.t_end
    if args.seed is not None:
        config.seed = args.seed
    if args.snapshot_every is not None:
        config.snapshot_every = args.snapshot_every
    out = Path(args.out or config.output_dir or Path("runs") / config.name)

    report = validate(config.resolved_network())
    if not report.valid:
        _err(str(report))
        return EXIT_INVALID
    try:
        result = execute(config, output_dir=out)
    except IncompatibleGrid as exc:
        _err(str(exc))
        return EXIT_INVALID
    except OSError as exc:
        _err(f"cannot write to {out}: {exc}")
        return EXIT_IO

    print(f"{config.name}: {result.termination} at t = {result.final_state.t:.6g} "
          f"after {result.final_state.n} steps; output in {out}")
    if result.termination == "blow_up":
        _err(f"blow-up at t = {result.blowup_time:.6g}")
        if args.fail_on_blowup:
            return EXIT_BLOWUP
    return EXIT_OK


def cmd_verdict(args) -> int:
    run_dir = Path(args.run)
    try:
        manifest = io.read_manifest(run_dir / "manifest.json")
        snaps = manifest["snapshots"]
        if not snaps:
            _err(f"{run_dir}: manifest lists no snapshots")
            return EXIT_IO
        snap = io.read_snapshot(run_dir / snaps[-1]["file"])
    except (OSError, KeyError, ValueError) as exc:
        _err(f"cannot read run in {run_dir}: {exc}")
        return EXIT_IO
    try:
        expected = [int(a) for a in args.expected.replace(" ", "").split(",") if a]
    except ValueError:
        _err(f"--expected must be a comma-separated list of arc ids, got {args.expected!r}")
        return EXIT_INVALID
    verdict = path_verdict(io.snapshot_mean_density(snap), expected, rho=args.rho)
    print(verdict.summary())
    for arc_id, m in sorted(verdict.mean_density.items()):
        tag = "*" if arc_id in verdict.dominant else " "
        print(f"  {tag} arc {arc_id:3d}  mean u = {m:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netchemo", description="Hyperbolic chemotaxis on networks")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a built-in scenario or a JSON config")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", choices=SCENARIO_NAMES)
    src.add_argument("--config", help="JSON run config")
    sim.add_argument("--k", type=float, help="time step (must fit every arc's grid)")
    sim.add_argument("--t-end", type=float)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--snapshot-every", type=int, help="write a snapshot every N steps")
    sim.add_argument("--out", help="output directory (default runs/<name>)")
    sim.add_argument("--fail-on-blowup", action="store_true", help="exit with status 2 on blow-up")
    sim.set_defaults(func=cmd_simulate)

    val = sub.add_parser("validate", help="check a network config")
    val.add_argument("--config", required=True)
    val.set_defaults(func=cmd_validate)

    ls = sub.add_parser("list-scenarios", help="print the built-in scenario names")
    ls.set_defaults(func=cmd_list)

    ver = sub.add_parser("verdict", help="compare a run's last snapshot with an expected arc set")
    ver.add_argument("--run", required=True, help="run directory holding manifest.json")
    ver.add_argument("--expected", required=True, help="comma-separated arc ids, e.g. 1,2,6,4,7")
    ver.add_argument("--rho", type=float, default=0.5, help="dominance threshold relative to the max")
    ver.set_defaults(func=cmd_verdict)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
