#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Run configuration and pipeline

A run config (JSON or YAML) names a plant, the pipeline options, one or more
controller machines and the oracle / simulation settings. It is validated
against a Draft-7 schema before anything is computed; unknown keys are
rejected at every level.

Pipeline: prefeedback -> lift -> machine -> implicit set -> artifacts, plus
the comparison table against the fixed-point oracle and supervised
rollouts.

Author: Implicit RCIS Research Team
Date: 2026-10-16
"""

from __future__ import annotations
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import copy
import json
import logging
import time

import jsonschema
import numpy as np
import yaml

from implicit_rcis import ImplicitRcis, RcisConfig, compute_implicit_rcis
from linear_system import LinearSystem, SynthesisPlant, prepare_for_synthesis, system_from_config
from maximal_rcis_oracle import (OracleConfig, OracleResult, estimate_row, hull_box, maximal_rcis,
                                 mc_volume_ratio, volume_table)
from mealy_machine import MealyConfig, MealyMachine, machine_from_config
from rcis_errors import ConfigError

logger = logging.getLogger(__name__)

_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_VECTOR = {"type": "array", "items": {"type": "number"}}
_POLYTOPE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["G", "h"],
    "properties": {"G": _MATRIX, "h": _VECTOR, "dim": {"type": "integer", "minimum": 1}},
}
_DISTURBANCE = {"enum": ["measurable", "non_measurable"]}
_PREFEEDBACK = {
    "oneOf": [
        {"enum": ["auto", "none"]},
        {"type": "object", "additionalProperties": False, "required": ["K"], "properties": {"K": _MATRIX}},
    ]
}
_PLANT = {
    "oneOf": [
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["preset", "n"],
            "properties": {
                "preset": {"const": "integrator"},
                "n": {"type": "integer", "minimum": 1},
                "d_max": {"type": "number", "minimum": 0},
                "disturbance": _DISTURBANCE,
                "prefeedback": _PREFEEDBACK,
            },
        },
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["preset"],
            "properties": {
                "preset": {"const": "lane_keeping"},
                "r_d_max": {"type": "number", "minimum": 0},
                "speed": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "disturbance": _DISTURBANCE,
                "prefeedback": _PREFEEDBACK,
            },
        },
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["A", "B", "D", "S"],
            "properties": {
                "name": {"type": "string"},
                "A": _MATRIX,
                "B": {"type": "array"},
                "D": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"vertices": _MATRIX, "polytope": _POLYTOPE},
                    "oneOf": [{"required": ["vertices"]}, {"required": ["polytope"]}],
                },
                "S": _POLYTOPE,
                "disturbance": _DISTURBANCE,
                "prefeedback": _PREFEEDBACK,
            },
        },
    ]
}
_MACHINE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["simple_loop", "tree", "custom"]},
        "L": {"type": "integer", "minimum": 1},
        "transition": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
        "output": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
        "states": {"type": "array", "items": {"type": "string"}},
        "symbols": {"type": "array", "items": {"type": "string"}},
        "n_symbols": {"type": "integer", "minimum": 1},
        "label": {"type": "string"},
    },
}

RUN_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["plant"],
    "properties": {
        "name": {"type": "string"},
        "plant": _PLANT,
        "pipeline": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"prefeedback": _PREFEEDBACK, "lift": {"enum": ["auto", "none"]}},
        },
        "machine": _MACHINE,
        "compare": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "machines": {"type": "array", "items": _MACHINE, "minItems": 1},
                "include_oracle": {"type": "boolean"},
            },
        },
        "rcis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "workers": {"type": "integer", "minimum": 1},
                "prune": {"type": "boolean"},
                "reach_cap": {"type": "integer", "minimum": 1},
                "eps_dedup": {"type": "number", "exclusiveMinimum": 0},
                "state_cap": {"type": "integer", "minimum": 1},
            },
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_iter": {"type": "integer", "minimum": 1},
                "N_mc": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "workers": {"type": "integer", "minimum": 1},
                "projection_method": {"enum": ["auto", "fm", "iterhull"]},
                "check_monotone": {"type": "boolean"},
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T": {"type": "integer", "minimum": 1},
                "x0": _VECTOR,
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "policy": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"gain": _MATRIX, "trace": _MATRIX, "preset": {"const": "lane_keeping"}},
                },
                "disturbance": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["zero", "vertex_switching", "curvature_step", "trace"]},
                        "seed": {"type": "integer", "minimum": 0},
                        "t_on": {"type": "integer", "minimum": 0},
                        "t_off": {"type": "integer", "minimum": 0},
                        "level": {"type": "number", "minimum": -1, "maximum": 1},
                        "values": _MATRIX,
                    },
                },
                "explicit_arm": {"type": "boolean"},
                "state_labels": {"type": "array", "items": {"type": "string"}},
            },
        },
        "out": {"type": "string"},
    },
}


@dataclass
class RunConfig:
    plant: Dict[str, Any]
    name: str = "run"
    prefeedback: Union[str, List[List[float]]] = "auto"
    lift: str = "auto"
    machine: Dict[str, Any] = field(default_factory=lambda: {"kind": "tree", "L": 4})
    compare_machines: List[Dict[str, Any]] = field(default_factory=list)
    include_oracle: bool = True
    rcis: RcisConfig = field(default_factory=RcisConfig)
    mealy: MealyConfig = field(default_factory=MealyConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    mc_samples: int = 10_000
    seed: int = 0
    mc_workers: int = 1
    simulation: Dict[str, Any] = field(default_factory=dict)
    out: str = "results/rcis"
    source: Optional[str] = None
    raw: Dict[str, Any] = field(default_factory=dict)

    def with_overrides(self, seed: Optional[int] = None, samples: Optional[int] = None,
                       max_iter: Optional[int] = None, machines: Optional[List[Dict[str, Any]]] = None,
                       out: Optional[str] = None) -> "RunConfig":
        """Copy with command-line flags applied."""
        cfg = copy.deepcopy(self)
        if seed is not None:
            cfg.seed = seed
        if samples is not None:
            cfg.mc_samples = samples
        if max_iter is not None:
            cfg.oracle.max_iter = max_iter
        if machines:
            cfg.machine = machines[0]
            cfg.compare_machines = list(machines)
        if out is not None:
            cfg.out = out
        return cfg

    @property
    def arms(self) -> List[Dict[str, Any]]:
        return self.compare_machines or [self.machine]


def _json_path(error: jsonschema.ValidationError) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in error.absolute_path)


def validate_config(data: Any) -> None:
    validator = jsonschema.Draft7Validator(RUN_SCHEMA)
    error = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if error is not None:
        raise ConfigError(f"config error at {_json_path(error)}: {error.message}")


def config_from_dict(data: Dict[str, Any], source: Optional[str] = None) -> RunConfig:
    validate_config(data)
    plant = dict(data["plant"])
    pipeline = data.get("pipeline", {})
    prefeedback = plant.pop("prefeedback", pipeline.get("prefeedback", "auto"))
    if isinstance(prefeedback, dict):
        prefeedback = prefeedback["K"]
    rcis = data.get("rcis", {})
    oracle = data.get("oracle", {})
    compare = data.get("compare", {})
    return RunConfig(
        plant=plant,
        name=data.get("name", Path(source).stem if source else "run"),
        prefeedback=prefeedback,
        lift=pipeline.get("lift", "auto"),
        machine=data.get("machine", {"kind": "tree", "L": 4}),
        compare_machines=list(compare.get("machines", [])),
        include_oracle=compare.get("include_oracle", True),
        rcis=RcisConfig(
            eps_dedup=rcis.get("eps_dedup", RcisConfig.eps_dedup),
            reach_cap=rcis.get("reach_cap", RcisConfig.reach_cap),
            prune=rcis.get("prune", True),
            workers=rcis.get("workers", 1),
        ),
        mealy=MealyConfig(state_cap=rcis.get("state_cap", MealyConfig.state_cap)),
        oracle=OracleConfig(
            max_iter=oracle.get("max_iter", OracleConfig.max_iter),
            projection_method=oracle.get("projection_method", "auto"),
            check_monotone=oracle.get("check_monotone", True),
        ),
        mc_samples=oracle.get("N_mc", 10_000),
        seed=oracle.get("seed", 0),
        mc_workers=oracle.get("workers", 1),
        simulation=dict(data.get("simulation", {})),
        out=data.get("out", "results/rcis"),
        source=source,
        raw=copy.deepcopy(data),
    )


def _read_mapping(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"{path}: YAML parse error{where}: {getattr(exc, 'problem', exc)}")
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a .json / .yaml / .yml run config."""
    return config_from_dict(_read_mapping(path), source=str(path))


def load_scenario(path: Union[str, Path]) -> Dict[str, Any]:
    """A stand-alone simulation block (same keys as the config's "simulation")."""
    data = _read_mapping(path)
    validator = jsonschema.Draft7Validator(RUN_SCHEMA["properties"]["simulation"])
    error = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if error is not None:
        raise ConfigError(f"scenario error at {_json_path(error)}: {error.message}")
    return data


# --- pipeline -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BuildOutcome:
    synth: SynthesisPlant
    machine: MealyMachine
    rcis: ImplicitRcis
    elapsed_s: float


def synthesis_plant(cfg: RunConfig) -> SynthesisPlant:
    return prepare_for_synthesis(system_from_config(cfg.plant), cfg.prefeedback, cfg.lift)


def build_machine(cfg: RunConfig, plant: LinearSystem, spec: Optional[Dict[str, Any]] = None) -> MealyMachine:
    spec = spec or cfg.machine
    return machine_from_config({k: v for k, v in spec.items() if k != "label"},
                               plant.num_disturbances, plant.m, cfg.mealy)


def run_build(cfg: RunConfig, synth: Optional[SynthesisPlant] = None,
              spec: Optional[Dict[str, Any]] = None) -> BuildOutcome:
    synth = synth or synthesis_plant(cfg)
    machine = build_machine(cfg, synth.plant, spec)
    t0 = time.perf_counter()
    rcis = compute_implicit_rcis(synth.plant, machine, cfg.rcis)
    return BuildOutcome(synth, machine, rcis, time.perf_counter() - t0)


def arm_label(spec: Dict[str, Any]) -> str:
    if "label" in spec:
        return spec["label"]
    if spec["kind"] == "custom":
        return "custom"
    return f"{spec['kind']}(L={spec['L']})"


@dataclass(frozen=True, eq=False)
class CompareOutcome:
    rows: List[Dict[str, Any]]
    oracle: OracleResult
    builds: List[BuildOutcome]
    estimates: Dict[str, Dict[str, Any]]

    def table(self):
        return volume_table(self.rows)


def run_compare(cfg: RunConfig) -> CompareOutcome:
    """Volume of every machine arm relative to the maximal set from the oracle."""
    synth = synthesis_plant(cfg)
    t0 = time.perf_counter()
    oracle = maximal_rcis(synth.original, cfg.oracle)
    oracle_time = time.perf_counter() - t0
    C_max = oracle.reported_set()

    rows: List[Dict[str, Any]] = []
    builds: List[BuildOutcome] = []
    estimates: Dict[str, Dict[str, Any]] = {}
    box = None if oracle.empty else hull_box([C_max])
    for spec in cfg.arms:
        label = arm_label(spec)
        outcome = run_build(cfg, synth, spec)
        builds.append(outcome)
        if outcome.rcis.empty or box is None:
            rows.append({"method": label, "time_s": outcome.elapsed_s, "vol_pct": 0.0})
            continue
        est = mc_volume_ratio(outcome.rcis, C_max, box, N=cfg.mc_samples, seed=cfg.seed,
                              workers=cfg.mc_workers, assume_subset=True)
        estimates[label] = est.to_dict()
        rows.append(estimate_row(label, outcome.elapsed_s, est))
        logger.info("%s: %.2f%% of the maximal set (+/- %.2f)", label, 100 * est.ratio, 100 * est.half_width)
    if cfg.include_oracle:
        rows.append({"method": "oracle", "time_s": oracle_time, "vol_pct": 0.0 if oracle.empty else 100.0})
    return CompareOutcome(rows, oracle, builds, estimates)


def initial_state(cfg: RunConfig, outcome: BuildOutcome) -> np.ndarray:
    x0 = cfg.simulation.get("x0")
    if x0 is None:
        return np.zeros(outcome.synth.plant.n)
    x0 = np.asarray(x0, dtype=float)
    if x0.size != outcome.synth.plant.n:
        raise ConfigError(f"simulation.x0 has length {x0.size}, plant has {outcome.synth.plant.n} states")
    return x0


def write_json(data: Any, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write('\n')
    return path
