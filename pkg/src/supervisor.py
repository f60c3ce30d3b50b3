#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Safety supervision with invariant sets

Each step corrects a nominal input u_d as little as possible:

    min ||u_d - u||^2   s.t.   (x, u) in S,
                               (A x + B u + d, w) in the stored polytope

where w are the stored parameters (theta, and the convex-combination
variables for the hull kind). The explicit arm replaces the stored polytope
by an H-representation over plant states. Inputs are optimized in the
prefeedback coordinates v = u - K x and reported in the original ones; the
objective is the same in both.

Rollouts apply the supervisor every step under a disturbance trace and
record a Trajectory, exported as a CSV table and an SVG plot.

Author: Implicit RCIS Research Team
Date: 2026-10-16
"""

from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging
import sys

import numpy as np
import pandas as pd
from tqdm import tqdm

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from implicit_rcis import ImplicitRcis, membership, successor_fiber  # noqa: E402
from linear_system import DisturbanceMode, LinearSystem, plant_hash  # noqa: E402
from lp_solver import EPS_FEAS  # noqa: E402
from polytope import Box, Polytope, bounding_box, fiber, is_empty, project  # noqa: E402
from qp_solver import TOL_QP, QpConfig, qp_solve  # noqa: E402
from rcis_errors import ConfigError, ContractBreach, DimensionMismatch  # noqa: E402

logger = logging.getLogger(__name__)

SetTarget = Union[ImplicitRcis, Polytope]


@dataclass
class SupervisorConfig:
    tol_qp: float = TOL_QP
    qp_max_iter_factor: int = 20
    # return u_d untouched when it already admits a feasible parameter vector
    fast_path: bool = True
    show_progress: Optional[bool] = False


class StepStatus(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True, eq=False)
class SupervisionStep:
    t: int
    x: np.ndarray
    d: np.ndarray
    u_nominal: np.ndarray
    u_applied: Optional[np.ndarray]
    correction_norm: float
    qp_status: StepStatus
    fast_path: bool = False
    witness: Optional[np.ndarray] = None

    @property
    def feasible(self) -> bool:
        return self.qp_status == StepStatus.FEASIBLE


@dataclass(frozen=True, eq=False)
class Trajectory:
    steps: Tuple[SupervisionStep, ...]
    final_state: np.ndarray
    plant_hash: str
    scenario: str
    arm: str = "implicit"
    comparison: Optional["Trajectory"] = None

    @property
    def states(self) -> np.ndarray:
        """(T + 1) x n array of visited states."""
        return np.vstack([s.x for s in self.steps] + [self.final_state])

    @property
    def applied(self) -> np.ndarray:
        return np.vstack([s.u_applied for s in self.steps])

    @property
    def nominal(self) -> np.ndarray:
        return np.vstack([s.u_nominal for s in self.steps])

    @property
    def corrections(self) -> np.ndarray:
        return np.array([s.correction_norm for s in self.steps])

    def summary(self) -> Dict[str, Any]:
        corr = self.corrections
        out = {
            "arm": self.arm,
            "steps": len(self.steps),
            "infeasible": int(sum(not s.feasible for s in self.steps)),
            "max_correction": float(corr.max()) if corr.size else 0.0,
            "argmax_correction": int(corr.argmax()) if corr.size else -1,
            "corrected_steps": int(np.sum(corr > TOL_QP)),
        }
        if self.comparison is not None:
            out["comparison"] = self.comparison.summary()
        return out


# --- nominal inputs and disturbances -----------------------------------------

@dataclass(frozen=True, eq=False)
class NominalPolicy:
    """u_d = gain x, or u_d(t) read from a trace (held at its last row)."""

    gain: Optional[np.ndarray] = None
    trace: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.gain is None) == (self.trace is None):
            raise ConfigError("a nominal policy needs exactly one of 'gain' or 'trace'")
        if self.gain is not None:
            object.__setattr__(self, "gain", np.atleast_2d(np.asarray(self.gain, dtype=float)))
        else:
            trace = np.asarray(self.trace, dtype=float)
            object.__setattr__(self, "trace", trace.reshape(trace.shape[0], -1))

    def __call__(self, t: int, x: np.ndarray) -> np.ndarray:
        if self.gain is not None:
            return self.gain @ np.asarray(x, dtype=float)
        return self.trace[min(t, self.trace.shape[0] - 1)].copy()

    @classmethod
    def from_config(cls, cfg: Dict[str, Any]) -> "NominalPolicy":
        if "gain" in cfg:
            return cls(gain=cfg["gain"])
        if "trace" in cfg:
            return cls(trace=cfg["trace"])
        raise ConfigError("nominal policy config needs 'gain' or 'trace'")


def zero_trace(plant: LinearSystem, T: int) -> np.ndarray:
    return np.zeros((T, plant.n))


def vertex_switching_trace(plant: LinearSystem, T: int, seed: int = 0) -> np.ndarray:
    """A disturbance vertex drawn uniformly at every step."""
    rng = np.random.default_rng(seed)
    return plant.D_v[rng.integers(0, plant.num_disturbances, size=T)]


def curvature_step_trace(plant: LinearSystem, T: int, t_on: int, t_off: int,
                         level: float = 1.0) -> np.ndarray:
    """Hold c + level (v_last - c) on [t_on, t_off), c the vertex mean, else c.

    For the lane-keeping model this is a road-curvature step.
    """
    if abs(level) > 1.0:
        raise ConfigError("curvature level must lie in [-1, 1] to stay inside conv(D_v)")
    center = plant.D_v.mean(axis=0)
    out = np.tile(center, (T, 1))
    out[max(t_on, 0):min(t_off, T)] = center + level * (plant.D_v[-1] - center)
    return out


def make_disturbance_trace(plant: LinearSystem, cfg: Dict[str, Any], T: int, seed: int = 0) -> np.ndarray:
    kind = cfg.get("kind", "zero")
    if kind == "zero":
        return zero_trace(plant, T)
    if kind == "vertex_switching":
        return vertex_switching_trace(plant, T, seed=cfg.get("seed", seed))
    if kind == "curvature_step":
        return curvature_step_trace(plant, T, int(cfg.get("t_on", 0)), int(cfg.get("t_off", T)),
                                    float(cfg.get("level", 1.0)))
    if kind == "trace":
        trace = np.asarray(cfg["values"], dtype=float).reshape(-1, plant.n)
        if trace.shape[0] < T:
            raise ConfigError(f"disturbance trace has {trace.shape[0]} rows, need {T}")
        return trace[:T]
    raise ConfigError(f"unknown disturbance trace kind {kind!r}")


# --- one supervision step -----------------------------------------------------

def _original_input(plant: LinearSystem, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return v.copy() if plant.feedback is None else plant.feedback.input_from(x, v)


def _supervise_on_fiber(F: Polytope, plant: LinearSystem, x, u_d, d, t: int,
                        config: SupervisorConfig) -> SupervisionStep:
    x = np.asarray(x, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    u_d = np.atleast_1d(np.asarray(u_d, dtype=float)).ravel()
    m = plant.m
    if u_d.size != m:
        raise DimensionMismatch(f"nominal input has length {u_d.size}, plant has {m} inputs")
    v_d = u_d if plant.feedback is None else plant.feedback.virtual_input(x, u_d)

    if config.fast_path:
        if F.dim == m:
            ok = F.contains_point(v_d, tol=EPS_FEAS)
        else:
            ok = not is_empty(fiber(F, range(m), v_d))
        if ok:
            return SupervisionStep(t, x, d, u_d, u_d.copy(), 0.0, StepStatus.FEASIBLE, fast_path=True)

    H = np.zeros((F.dim, F.dim))
    H[:m, :m] = 2.0 * np.eye(m)
    f = np.zeros(F.dim)
    f[:m] = -2.0 * v_d
    res = qp_solve(H, f, F, config=QpConfig(tol=config.tol_qp, max_iter_factor=config.qp_max_iter_factor))
    if not res.is_optimal:
        logger.warning("supervision QP infeasible at t=%d (x=%s)", t, np.round(x, 6).tolist())
        return SupervisionStep(t, x, d, u_d, None, float("nan"), StepStatus.INFEASIBLE)
    v = res.x[:m]
    u = _original_input(plant, x, v)
    return SupervisionStep(t, x, d, u_d, u, float(np.linalg.norm(u - u_d)), StepStatus.FEASIBLE,
                           witness=res.x[m:] if F.dim > m else None)


def supervise(rcis: ImplicitRcis, plant: LinearSystem, x, u_d, d, t: int = 0,
              config: Optional[SupervisorConfig] = None) -> SupervisionStep:
    """Minimal correction of u_d against the implicit set.

    An Infeasible step means x was not a member or d left conv(D_v).
    """
    return _supervise_on_fiber(successor_fiber(rcis, plant, x, d), plant, x, u_d, d, t,
                               config or SupervisorConfig())


def supervise_explicit(C: Polytope, plant: LinearSystem, x, u_d, d, t: int = 0,
                       config: Optional[SupervisorConfig] = None) -> SupervisionStep:
    """Minimal correction of u_d against an explicit set over plant states."""
    if C.dim != plant.n:
        raise DimensionMismatch(f"explicit set has dim {C.dim}, plant state {plant.n}")
    return _supervise_on_fiber(successor_fiber(C, plant, x, d), plant, x, u_d, d, t,
                               config or SupervisorConfig())


# --- rollouts -----------------------------------------------------------------

def _check_simulable(plant: LinearSystem) -> None:
    if plant.disturbance_mode != DisturbanceMode.MEASURABLE or plant.reported_dim != plant.n:
        raise ConfigError("closed-loop simulation needs a plant with measurable disturbances "
                          "(the delay-lifted plant is not simulated)")


def _rollout(target: SetTarget, plant: LinearSystem, policy: NominalPolicy, x0: np.ndarray,
             d_trace: np.ndarray, config: SupervisorConfig, arm: str, scenario: str) -> Trajectory:
    explicit = isinstance(target, Polytope)
    steps: List[SupervisionStep] = []
    x = x0
    show = sys.stderr.isatty() if config.show_progress is None else config.show_progress
    for t in tqdm(range(d_trace.shape[0]), disable=not show, desc=f"rollout[{arm}]"):
        u_d = policy(t, x)
        if explicit:
            step = supervise_explicit(target, plant, x, u_d, d_trace[t], t=t, config=config)
        else:
            step = supervise(target, plant, x, u_d, d_trace[t], t=t, config=config)
        if not step.feasible:
            raise ContractBreach(f"{arm} supervision infeasible at step {t}", step=t)
        steps.append(step)
        v = step.u_applied if plant.feedback is None else plant.feedback.virtual_input(x, step.u_applied)
        x = plant.step(x, v, d_trace[t])
    logger.info("%s rollout: %d steps, max correction %.4g", arm, len(steps),
                max((s.correction_norm for s in steps), default=0.0))
    return Trajectory(tuple(steps), x, plant_hash(plant), scenario, arm)


def simulate(plant: LinearSystem, policy: NominalPolicy, rcis: ImplicitRcis, d_trace,
             x0, T: Optional[int] = None, explicit_set: Optional[Polytope] = None,
             config: Optional[SupervisorConfig] = None, scenario: str = "rollout") -> Trajectory:
    """Closed-loop rollout supervised by the implicit set.

    With explicit_set, a second rollout from the same x0 under the same
    disturbances is attached as the comparison arm.
    """
    config = config or SupervisorConfig()
    _check_simulable(plant)
    x0 = np.asarray(x0, dtype=float).ravel()
    d_trace = np.asarray(d_trace, dtype=float).reshape(-1, plant.n)
    if T is not None:
        if d_trace.shape[0] < T:
            raise ConfigError(f"disturbance trace has {d_trace.shape[0]} rows, need {T}")
        d_trace = d_trace[:T]
    if not membership(rcis, x0):
        raise ConfigError(f"initial state {x0.tolist()} is not a member of the invariant set")

    traj = _rollout(rcis, plant, policy, x0, d_trace, config, "implicit", scenario)
    if explicit_set is None:
        return traj
    if not explicit_set.contains_point(x0):
        raise ConfigError("initial state is outside the explicit comparison set")
    other = _rollout(explicit_set, plant, policy, x0, d_trace, config, "explicit", scenario)
    return Trajectory(traj.steps, traj.final_state, traj.plant_hash, scenario, traj.arm, comparison=other)


# --- export -------------------------------------------------------------------

def _columns(prefix: str, k: int) -> List[str]:
    return [prefix] if k == 1 else [f"{prefix}{i + 1}" for i in range(k)]


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """One row per step and arm: t, x, d, u_nominal, u_applied, correction_norm, qp_status."""
    frames = []
    for arm in (traj, traj.comparison):
        if arm is None or not arm.steps:
            continue
        n = arm.steps[0].x.size
        m = arm.steps[0].u_nominal.size
        frame = pd.DataFrame({"arm": arm.arm, "t": [s.t for s in arm.steps]})
        blocks = [
            (np.vstack([s.x for s in arm.steps]), [f"x{i + 1}" for i in range(n)]),
            (np.vstack([s.d for s in arm.steps]), [f"d{i + 1}" for i in range(n)]),
            (arm.nominal, _columns("u_nominal", m)),
            (arm.applied, _columns("u_applied", m)),
        ]
        for block, names in blocks:
            for j, name in enumerate(names):
                frame[name] = block[:, j]
        frame["correction_norm"] = arm.corrections
        frame["qp_status"] = [s.qp_status.value for s in arm.steps]
        frames.append(frame)
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def write_trajectory_csv(traj: Trajectory, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trajectory_frame(traj).to_csv(path, index=False)
    return path


def safe_bands(plant: LinearSystem) -> Tuple[Box, Box]:
    """Bounding boxes of the safe set over states and inputs, in original coordinates."""
    S = plant.S if plant.feedback is None or plant.feedback.original_S is None else plant.feedback.original_S
    n = plant.n
    states = bounding_box(project(S, list(range(n))), margin=1.0)
    inputs = bounding_box(project(S, list(range(n, S.dim))), margin=1.0)
    return states, inputs


def plot_trajectory_svg(traj: Trajectory, path: Union[str, Path], plant: Optional[LinearSystem] = None,
                        state_labels: Optional[Sequence[str]] = None, dt: float = 1.0) -> Path:
    """State and input traces, one panel each, with the safe band dashed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    X = traj.states
    n, m = X.shape[1], traj.applied.shape[1]
    labels = list(state_labels) if state_labels else [f"x{i + 1}" for i in range(n)]
    bands = safe_bands(plant) if plant is not None else None

    fig, axes = plt.subplots(n + m, 1, figsize=(8, 2.0 * (n + m)), sharex=True)
    axes = np.atleast_1d(axes)
    t_state = dt * np.arange(X.shape[0])
    t_input = dt * np.arange(traj.applied.shape[0])
    for i in range(n):
        ax = axes[i]
        ax.plot(t_state, X[:, i], label=traj.arm, linewidth=1.5)
        if traj.comparison is not None:
            ax.plot(t_state, traj.comparison.states[:, i], label=traj.comparison.arm, linestyle='--')
        if bands is not None:
            for bound in (bands[0].lower[i], bands[0].upper[i]):
                ax.axhline(bound, color='gray', linestyle=':', linewidth=1)
        ax.set_ylabel(labels[i])
        ax.grid(True, alpha=0.3)
    for j in range(m):
        ax = axes[n + j]
        ax.step(t_input, traj.nominal[:, j], where='post', label='nominal', color='gray', alpha=0.7)
        ax.step(t_input, traj.applied[:, j], where='post', label=traj.arm)
        if traj.comparison is not None:
            ax.step(t_input, traj.comparison.applied[:, j], where='post', label=traj.comparison.arm,
                    linestyle='--')
        if bands is not None:
            for bound in (bands[1].lower[j], bands[1].upper[j]):
                ax.axhline(bound, color='gray', linestyle=':', linewidth=1)
        ax.set_ylabel(f"u{j + 1}" if m > 1 else "u")
        ax.grid(True, alpha=0.3)
    axes[0].legend(loc='upper right')
    axes[n].legend(loc='upper right')
    axes[-1].set_xlabel('time (s)' if dt != 1.0 else 'step')
    fig.suptitle(f"{traj.scenario}: supervised rollout")
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)
    return path
