#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Implicit RCIS command line

Sub-commands:
    build            prefeedback -> lift -> machine -> implicit set; writes rcis.json, report.json
    check            membership verdict and parameter certificate for a point
    compare          volume table of the machine arms against the fixed-point oracle
    simulate         supervised closed-loop rollout; writes trajectory.csv and trajectory.svg
    inspect-machine  dominance report of a controller machine

Usage:
    python src/rcis_cli.py build --config configs/integrator_n2.json
    python src/rcis_cli.py check --rcis results/rcis/integrator_n2/rcis.json --point 0,0
    python src/rcis_cli.py compare --config configs/integrator_n4.json --samples 20000
    python src/rcis_cli.py simulate --config configs/lane_keeping.yaml --explicit

Author: Implicit RCIS Research Team
Date: 2026-10-16
"""

from __future__ import annotations
from pathlib import Path
from typing import Any, Dict, List, Optional
import argparse
import json
import logging
import os
import sys
import time

# Allow running as a script from the repository root
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np  # noqa: E402

from experiment_logger import ExperimentLogger  # noqa: E402
from implicit_rcis import (ImplicitRcis, compute_implicit_rcis, explicit_projection,  # noqa: E402
                           membership_certificate)
from linear_system import (LANE_KEEPING_NOMINAL_GAIN, chain_of_integrators, list_presets,  # noqa: E402
                           prepare_for_synthesis, system_to_dict)
from maximal_rcis_oracle import invariance_audit, maximal_rcis  # noqa: E402
from mealy_machine import (dominance_matrix, find_dominant, machine_from_config,  # noqa: E402
                           maximal_partition, parse_machine_spec)
from rcis_errors import ConfigError, RcisError  # noqa: E402
from run_config import (RunConfig, build_machine, initial_state, load_config, load_scenario,  # noqa: E402
                        run_build, run_compare, synthesis_plant, write_json)
from supervisor import (NominalPolicy, SupervisorConfig, make_disturbance_trace,  # noqa: E402
                        plot_trajectory_svg, simulate, write_trajectory_csv)

logger = logging.getLogger("rcis_cli")

EXIT_CODES = """
Exit codes:
  0  success (an empty invariant set is a successful, reported outcome)
  1  unexpected error
  2  configuration error: unreadable file, schema violation, bad point, usage
  3  dimension mismatch
  4  nilpotency assumption violated / plant not controllable
  5  size cap exceeded (Fourier-Motzkin rows, machine states, reachable set, vertex dimension)
  6  unbounded or empty set where a bounded, nonempty one is needed
  7  numerical failure (iteration caps, cycling, singular solves)
  8  supervision contract breach (an infeasible supervision step)
"""


def _out_dir(args, cfg: RunConfig) -> Path:
    base = Path(args.out) if args.out else Path(cfg.out) / cfg.name
    base.mkdir(parents=True, exist_ok=True)
    return base


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    machines = [parse_machine_spec(s) for s in (args.machine or [])]
    return cfg.with_overrides(seed=getattr(args, "seed", None), samples=getattr(args, "samples", None),
                              max_iter=getattr(args, "max_iter", None), machines=machines)


def cmd_build(args, run_log: ExperimentLogger) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    outcome = run_build(cfg)
    rcis = outcome.rcis
    rcis_data = rcis.to_dict()
    rcis_data["plant"] = system_to_dict(outcome.synth.plant)
    write_json(rcis_data, out / "rcis.json")
    report = rcis.report.to_dict() if rcis.report else {}
    report["elapsed_s"] = outcome.elapsed_s
    results: Dict[str, Any] = {"kind": rcis.kind.value, "empty": rcis.empty, "time_s": outcome.elapsed_s}
    if args.samples and not rcis.empty:
        audit = invariance_audit(rcis, outcome.synth.plant, n_samples=args.samples, seed=cfg.seed)
        report["audit"] = audit.to_dict()
        results["audit_violations"] = audit.violations
    write_json(report, out / "report.json")

    if rcis.empty:
        print(f"⚠️  {outcome.machine.label}: the implicit invariant set is EMPTY (reported in {out})")
    else:
        print(f"✅ {outcome.machine.label}: {rcis.kind.value} set over {rcis.polytope.dim} coordinates, "
              f"{rcis.polytope.n_rows} rows ({outcome.elapsed_s:.3f}s)")
        if "audit" in report:
            summary = report["audit"]
            mark = "✅" if summary["passed"] else "❌"
            print(f"   {mark} invariance audit: {summary['violations']} of {summary['checks']} checks failed")
        if args.explicit:
            explicit = explicit_projection(rcis)
            write_json(explicit.to_dict(), out / "explicit.json")
            results["explicit_rows"] = explicit.n_rows
            print(f"   explicit projection: {explicit.n_rows} rows")
    print(f"📁 artifacts in {out}")
    run_log.log(f"build:{cfg.name}", {"config": cfg.raw, "machine": outcome.machine.label}, results)
    return 0


def _parse_point(text: str, dim: int) -> np.ndarray:
    try:
        x = np.array([float(v) for v in text.replace(" ", "").split(",") if v], dtype=float)
    except ValueError:
        raise ConfigError(f"point {text!r} is not a comma-separated list of numbers")
    if x.size != dim:
        raise ConfigError(f"point has {x.size} coordinates, the set has {dim}")
    return x


def cmd_check(args, run_log: ExperimentLogger) -> int:
    path = Path(args.rcis)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}")
    rcis = ImplicitRcis.from_dict(data)
    x = _parse_point(args.point, rcis.projection_dim)
    cert = membership_certificate(rcis, x)
    results: Dict[str, Any] = {"member": cert.member}
    if cert.member:
        results["theta"] = cert.theta.tolist()
        print(f"✅ {x.tolist()} is a member")
        print(f"   theta = {np.round(cert.theta, 6).tolist()}")
        if rcis.lift_dim > rcis.param_dim:
            results["witness"] = cert.witness.tolist()
            print(f"   witness = {np.round(cert.witness, 6).tolist()}")
    else:
        print(f"❌ {x.tolist()} is not a member")
    run_log.log("check", {"rcis": str(path), "point": x.tolist()}, results)
    return 0


def _long_arm(cfg: RunConfig) -> Dict[str, Any]:
    """n = 10 chain of integrators: only nonemptiness is checked."""
    synth = prepare_for_synthesis(chain_of_integrators(10))
    machine = build_machine(cfg, synth.plant)
    t0 = time.perf_counter()
    rcis = compute_implicit_rcis(synth.plant, machine, cfg.rcis)
    return {"method": f"integrator-10 {machine.label}", "time_s": time.perf_counter() - t0,
            "nonempty": not rcis.empty}


def cmd_compare(args, run_log: ExperimentLogger) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    outcome = run_compare(cfg)
    table = outcome.table()
    table.to_csv(out / "comparison.csv", index=False)
    summary: Dict[str, Any] = {
        "oracle": {"iterations": outcome.oracle.iterations, "converged": outcome.oracle.converged,
                   "empty": outcome.oracle.empty},
        "estimates": outcome.estimates,
        "samples": cfg.mc_samples,
        "seed": cfg.seed,
    }
    if not outcome.oracle.converged:
        print("⚠️  oracle hit max_iter; volumes are relative to an outer bound")
    if args.long:
        summary["long_arm"] = _long_arm(cfg)
    write_json(summary, out / "compare.json")
    print(table.to_string(index=False))
    if "long_arm" in summary:
        arm = summary["long_arm"]
        print(f"{arm['method']}: {'nonempty' if arm['nonempty'] else 'EMPTY'} ({arm['time_s']:.1f}s)")
    print(f"📁 artifacts in {out}")
    run_log.log(f"compare:{cfg.name}", {"config": cfg.raw, "samples": cfg.mc_samples, "seed": cfg.seed},
                {"table": table.to_dict(orient="records"), **summary})
    return 0


def _policy(sim: Dict[str, Any], n: int, m: int) -> NominalPolicy:
    block = sim.get("policy", {})
    if block.get("preset") == "lane_keeping":
        return NominalPolicy(gain=LANE_KEEPING_NOMINAL_GAIN)
    if "gain" in block or "trace" in block:
        return NominalPolicy.from_config(block)
    return NominalPolicy(gain=np.zeros((m, n)))


def cmd_simulate(args, run_log: ExperimentLogger) -> int:
    cfg = _load(args)
    if args.scenario:
        cfg.simulation.update(load_scenario(args.scenario))
    sim = cfg.simulation
    out = _out_dir(args, cfg)
    outcome = run_build(cfg)
    plant = outcome.synth.plant
    if outcome.rcis.empty:
        raise ConfigError("the implicit invariant set is empty; nothing to simulate")

    T = int(sim.get("T", 100))
    d_trace = make_disturbance_trace(plant, sim.get("disturbance", {"kind": "zero"}), T, seed=cfg.seed)
    x0 = initial_state(cfg, outcome)
    explicit_set = None
    if args.explicit or sim.get("explicit_arm", False):
        oracle = maximal_rcis(outcome.synth.original, cfg.oracle)
        explicit_set = oracle.reported_set()
    config = SupervisorConfig(show_progress=None)
    traj = simulate(plant, _policy(sim, plant.n, plant.m), outcome.rcis, d_trace, x0, T=T,
                    explicit_set=explicit_set, config=config, scenario=cfg.name)

    write_trajectory_csv(traj, out / "trajectory.csv")
    plot_trajectory_svg(traj, out / "trajectory.svg", plant=plant, state_labels=sim.get("state_labels"),
                        dt=float(sim.get("dt", 1.0)))
    summary = traj.summary()
    write_json(summary, out / "simulation.json")
    print(f"✅ {T} supervised steps, max correction {summary['max_correction']:.4g} "
          f"at step {summary['argmax_correction']} ({summary['corrected_steps']} corrected)")
    print(f"📁 artifacts in {out}")
    run_log.log(f"simulate:{cfg.name}", {"config": cfg.raw, "T": T, "x0": x0.tolist()}, summary)
    return 0


def cmd_inspect_machine(args, run_log: ExperimentLogger) -> int:
    if args.config:
        cfg = _load(args)
        plant = synthesis_plant(cfg).plant
        spec = cfg.arms[0]
        machine = build_machine(cfg, plant, spec)
    else:
        if not args.machine:
            raise ConfigError("inspect-machine needs --config or --machine")
        spec = parse_machine_spec(args.machine[0])
        machine = machine_from_config({k: v for k, v in spec.items() if k != "label"}, args.actions)

    M = dominance_matrix(machine)
    dom = find_dominant(machine)
    report: Dict[str, Any] = {"machine": machine.label, "n_states": machine.n_states,
                              "n_symbols": machine.n_symbols, "param_dim": machine.param_dim}
    print(f"{machine.label}: |Q| = {machine.n_states}, |symbols| = {machine.n_symbols}, "
          f"|theta| = {machine.param_dim}")
    if dom is not None:
        note = " (all mutually dominant)" if M.all() else ""
        print(f"dominant: {machine.states[dom]}{note}")
        report["dominant"] = machine.states[dom]
        report["all_mutually_dominant"] = bool(M.all())
    else:
        q0 = [machine.states[s] for s in maximal_partition(machine)]
        print(f"no dominant state; Q0 = {{{', '.join(q0)}}}, Lambda path will be used")
        report["Q0"] = q0
    if args.matrix:
        print(np.array2string(M.astype(int)))
    run_log.log("inspect-machine", {"machine": spec, "num_actions": machine.num_actions}, report)
    return 0


def cmd_presets(args, run_log: ExperimentLogger) -> int:
    print("plant presets (use as plant.preset in a run config):")
    for name in list_presets():
        print(f"  {name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcis",
        description="Implicit robust controlled invariant sets from Mealy-machine controllers",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(EXIT_CODES + "\nEnvironment:\n"
                "  RCIS_ROW_CAP  Fourier-Motzkin intermediate row cap (default 1e5)\n"),
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", "-c", required=config_required, help="Run config (.json/.yaml)")
        p.add_argument("--out", "-o", help="Output directory (default: <config out>/<name>)")
        p.add_argument("--machine", action="append", metavar="KIND:L",
                       help="Machine override, e.g. tree:4 or simple_loop:14 (repeatable)")
        p.add_argument("--seed", type=int, help="Seed for sampling")

    p = sub.add_parser("build", help="Compute the implicit invariant set")
    common(p)
    p.add_argument("--explicit", action="store_true", help="Also write the explicit projection")
    p.add_argument("--samples", type=int, help="Audit one-step invariance on this many member samples")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("check", help="Membership of a point")
    p.add_argument("--rcis", required=True, help="rcis.json written by build")
    p.add_argument("--point", "-x", required=True, help="Comma-separated coordinates")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compare", help="Volume table against the fixed-point oracle")
    common(p)
    p.add_argument("--samples", type=int, help="Monte-Carlo samples")
    p.add_argument("--max-iter", type=int, dest="max_iter", help="Oracle iteration cap")
    p.add_argument("--long", action="store_true", help="Add the n=10 integrator nonemptiness arm")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="Supervised closed-loop rollout")
    common(p)
    p.add_argument("--scenario", help="Simulation block (.json/.yaml) overriding the config's")
    p.add_argument("--max-iter", type=int, dest="max_iter", help="Oracle iteration cap (explicit arm)")
    p.add_argument("--explicit", action="store_true", help="Add the explicit maximal-set arm")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("inspect-machine", help="Dominance report of a controller machine")
    common(p, config_required=False)
    p.add_argument("--actions", type=int, default=2, help="Disturbance vertices when no config is given")
    p.add_argument("--matrix", action="store_true", help="Print the dominance matrix")
    p.set_defaults(func=cmd_inspect_machine)

    p = sub.add_parser("presets", help="List the built-in plant presets")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    run_log = ExperimentLogger()
    try:
        return args.func(args, run_log)
    except RcisError as exc:
        print(f"❌ {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception:
        logger.exception("unexpected failure")
        return 1


if __name__ == "__main__":
    sys.exit(main())
