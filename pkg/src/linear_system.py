#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Plant models for invariant-set synthesis

    x(t+1) = A x(t) + B u(t) + d(t),   d(t) in conv(D_v),   (x, u) in S

This module holds the plant container and its transformations:
- nilpotency index detection
- deadbeat prefeedback u = K x + v (Ackermann's formula; multi-input plants
  are reduced to a single input with Heymann's lemma first)
- safe-set rewrite under prefeedback
- disturbance vertex extraction
- the one-step-delay lift that turns a non-measurable disturbance into a
  measurable one on the state (x, u)
- named presets: the chain of integrators and a lane-keeping stand-in

Author: Implicit RCIS Research Team
Date: 2026-10-16
"""

from __future__ import annotations
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Union
import hashlib
import json
import logging

import numpy as np
from scipy.linalg import expm

from polytope import Polytope, vertices
from rcis_errors import (ConfigError, DimensionMismatch, NotControllable, NotNilpotent,
                         NumericalFailure)

logger = logging.getLogger(__name__)

EPS_NILP = 1e-9


class DisturbanceMode(str, Enum):
    MEASURABLE = "measurable"          # d(t) is seen before u(t) is chosen
    NON_MEASURABLE = "non_measurable"


@dataclass(frozen=True, eq=False)
class FeedbackTransform:
    """u = K x + v, with the pre-transform plant kept for reporting."""

    K: np.ndarray
    original_A: Optional[np.ndarray] = None
    original_S: Optional[Polytope] = None

    def __post_init__(self):
        object.__setattr__(self, "K", np.atleast_2d(np.asarray(self.K, dtype=float)))

    def input_from(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.K @ np.asarray(x, dtype=float) + np.asarray(v, dtype=float)

    def virtual_input(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=float) - self.K @ np.asarray(x, dtype=float)


def _inf_norm(M: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(M), axis=1))) if M.size else 0.0


def _spectral_radius(A: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0


def nilpotency_index(A: np.ndarray, eps_nilp: float = EPS_NILP) -> Optional[int]:
    """Smallest h <= n with ||A^h||_inf <= eps_nilp * max(1, ||A||_inf)^h, else None."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"A must be square, got {A.shape}")
    scale = max(1.0, _inf_norm(A))
    P = np.eye(A.shape[0])
    for h in range(1, A.shape[0] + 1):
        P = P @ A
        if _inf_norm(P) <= eps_nilp * scale ** h:
            return h
    return None


@dataclass(frozen=True, eq=False)
class LinearSystem:
    A: np.ndarray
    B: np.ndarray
    D_v: np.ndarray                      # disturbance vertices, one per row
    S: Polytope                          # safe set over (x, u)
    disturbance_mode: DisturbanceMode = DisturbanceMode.MEASURABLE
    feedback: Optional[FeedbackTransform] = None
    # leading state coordinates that form the reported state after a lift
    projection_dim: Optional[int] = None
    name: str = "plant"
    h_nilp: Optional[int] = field(init=False, default=None)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        n = A.shape[0]
        D_v = np.asarray(self.D_v, dtype=float).reshape(-1, n) if np.size(self.D_v) else np.zeros((0, n))
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, A has {n}")
        if D_v.shape[0] == 0:
            raise DimensionMismatch("at least one disturbance vertex is required")
        if self.S.dim != n + B.shape[1]:
            raise DimensionMismatch(f"S has dim {self.S.dim}, expected n + m = {n + B.shape[1]}")
        for name, arr in (("A", A), ("B", B), ("D_v", D_v)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains NaN or Inf")
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "D_v", D_v)
        object.__setattr__(self, "disturbance_mode", DisturbanceMode(self.disturbance_mode))
        object.__setattr__(self, "h_nilp", nilpotency_index(A))

    @property
    def n(self) -> int:
        return int(self.A.shape[0])

    @property
    def m(self) -> int:
        return int(self.B.shape[1])

    @property
    def num_disturbances(self) -> int:
        return int(self.D_v.shape[0])

    @property
    def reported_dim(self) -> int:
        return self.n if self.projection_dim is None else self.projection_dim

    @property
    def is_nilpotent(self) -> bool:
        return self.h_nilp is not None

    def step(self, x, u, d) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) + self.B @ np.atleast_1d(u) + np.asarray(d, dtype=float)

    def state_input_safe(self, x, u, tol: float = 1e-7) -> bool:
        return self.S.contains_point(np.concatenate([np.ravel(x), np.atleast_1d(u)]), tol=tol)


def controllability_rank(A: np.ndarray, B: np.ndarray, tol: Optional[float] = None) -> int:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    blocks, P = [], B
    for _ in range(A.shape[0]):
        blocks.append(P)
        P = A @ P
    return int(np.linalg.matrix_rank(np.hstack(blocks), tol=tol))


def _ackermann(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row gain k with A + b k nilpotent (all poles at zero)."""
    n = A.shape[0]
    cols, P = [], b.reshape(-1)
    for _ in range(n):
        cols.append(P)
        P = A @ P
    C = np.column_stack(cols)
    last = np.linalg.solve(C.T, np.eye(n)[:, -1])     # e_n^T C^{-1}
    return -(last @ np.linalg.matrix_power(A, n))


def deadbeat_gain(A: np.ndarray, B: np.ndarray, eps_nilp: float = EPS_NILP,
                  seed: int = 0, attempts: int = 20) -> FeedbackTransform:
    """Gain K with A + B K nilpotent.

    Single-input plants use Ackermann's formula. Multi-input plants are first
    made controllable from one input direction g through a random F
    (Heymann's lemma), then K = F + g k. The gain is not unique.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n, m = A.shape[0], B.shape[1]
    if nilpotency_index(A, eps_nilp) is not None:
        return FeedbackTransform(np.zeros((m, n)))
    rank = controllability_rank(A, B)
    if rank < n:
        raise NotControllable(rank, n)

    if m == 1:
        K = _ackermann(A, B[:, 0]).reshape(1, n)
    else:
        rng = np.random.default_rng(seed)
        K = None
        for attempt in range(attempts):
            F = np.zeros((m, n)) if attempt == 0 else rng.standard_normal((m, n))
            g = rng.standard_normal(m)
            A_f, b = A + B @ F, B @ g
            if controllability_rank(A_f, b) == n:
                K = F + np.outer(g, _ackermann(A_f, b))
                break
        if K is None:
            raise NumericalFailure("could not reduce the multi-input plant to a single input")

    closed = A + B @ K
    if nilpotency_index(closed, eps_nilp) is None:
        residue = _inf_norm(np.linalg.matrix_power(closed, n))
        raise NumericalFailure(f"deadbeat gain leaves ||(A+BK)^n||_inf = {residue:.3e}")
    logger.debug("deadbeat gain K = %s", K.tolist())
    return FeedbackTransform(K)


def apply_prefeedback(sys: LinearSystem, fb: FeedbackTransform) -> LinearSystem:
    """Plant in the virtual input v = u - K x; S rewritten by u = K x + v."""
    K = fb.K
    if K.shape != (sys.m, sys.n):
        raise DimensionMismatch(f"gain has shape {K.shape}, expected {(sys.m, sys.n)}")
    Gx, Gu = sys.S.G[:, :sys.n], sys.S.G[:, sys.n:]
    S_new = Polytope(np.hstack([Gx + Gu @ K, Gu]), sys.S.h, dim=sys.S.dim)

    prior = sys.feedback
    total_K = K if prior is None else prior.K + K
    record = FeedbackTransform(
        total_K,
        original_A=sys.A if prior is None else prior.original_A,
        original_S=sys.S if prior is None else prior.original_S,
    )
    return replace(sys, A=sys.A + sys.B @ K, S=S_new, feedback=record)


def disturbance_vertices(D: Polytope) -> np.ndarray:
    return np.vstack(vertices(D))


def lift_nonmeasurable(sys: LinearSystem) -> LinearSystem:
    """One-step-delay lift: state (x, u), input v, measurable disturbance.

        [x; u]+ = [[A, B], [0, 0]] [x; u] + [0; I] v + [I; 0] d

    The safe set is S on (x, u) with v free; an invariant set of the lift
    is reported through its first n coordinates.
    """
    if sys.disturbance_mode != DisturbanceMode.NON_MEASURABLE:
        raise ValueError("the lift applies to plants with non-measurable disturbances")
    n, m = sys.n, sys.m
    A_l = np.block([[sys.A, sys.B], [np.zeros((m, n)), np.zeros((m, m))]])
    B_l = np.vstack([np.zeros((n, m)), np.eye(m)])
    D_l = np.hstack([sys.D_v, np.zeros((sys.num_disturbances, m))])
    S_l = Polytope(np.hstack([sys.S.G, np.zeros((sys.S.n_rows, m))]), sys.S.h, dim=n + 2 * m)
    return LinearSystem(A_l, B_l, D_l, S_l, DisturbanceMode.MEASURABLE,
                        feedback=sys.feedback, projection_dim=sys.reported_dim,
                        name=f"{sys.name}-lifted")


@dataclass(frozen=True, eq=False)
class SynthesisPlant:
    """Result of the prefeedback -> lift pipeline step."""

    plant: LinearSystem
    original: LinearSystem
    feedback: Optional[FeedbackTransform]
    lifted: bool


def prepare_for_synthesis(sys: LinearSystem,
                          prefeedback: Union[str, Sequence, np.ndarray] = "auto",
                          lift: str = "auto") -> SynthesisPlant:
    plant = sys
    if isinstance(prefeedback, str):
        if prefeedback not in ("auto", "none"):
            raise ConfigError(f"unknown prefeedback mode {prefeedback!r}")
        if not plant.is_nilpotent:
            if prefeedback == "none":
                raise NotNilpotent(
                    "nilpotency assumption failed: A + B K must be nilpotent after prefeedback, "
                    f"but prefeedback is 'none' (K = 0) and A has spectral radius "
                    f"{_spectral_radius(plant.A):.3g}; "
                    "set prefeedback to 'auto' or supply a deadbeat gain K"
                )
            plant = apply_prefeedback(plant, deadbeat_gain(plant.A, plant.B))
    else:
        plant = apply_prefeedback(plant, FeedbackTransform(np.asarray(prefeedback, dtype=float)))
        if not plant.is_nilpotent:
            raise NotNilpotent(
                "nilpotency assumption failed: A + B K is not nilpotent after prefeedback with the "
                f"supplied K (spectral radius {_spectral_radius(plant.A):.3g}); use prefeedback 'auto'"
            )

    lifted = False
    if plant.disturbance_mode == DisturbanceMode.NON_MEASURABLE:
        if lift == "none":
            raise ConfigError("non-measurable disturbances require the one-step-delay lift")
        plant = lift_nonmeasurable(plant)
        lifted = True
    logger.info("synthesis plant: n=%d m=%d h=%s lifted=%s", plant.n, plant.m, plant.h_nilp, lifted)
    return SynthesisPlant(plant, sys, plant.feedback, lifted)


# --- presets ------------------------------------------------------------------

def chain_of_integrators(n: int, d_max: float = 0.1,
                         disturbance: Union[str, DisturbanceMode] = DisturbanceMode.MEASURABLE
                         ) -> LinearSystem:
    """x+ = (I + shift) x + e_n (u + d), |x_i| <= 1, |u| <= 1, |d| <= d_max."""
    A = np.eye(n) + np.eye(n, k=1)
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    D_v = np.vstack([-d_max * B[:, 0], d_max * B[:, 0]])
    S = Polytope.from_bounds(-np.ones(n + 1), np.ones(n + 1))
    return LinearSystem(A, B, D_v, S, DisturbanceMode(disturbance), name=f"integrator-{n}")


# Nominal steering law (y, v, dpsi, r) -> delta
LANE_KEEPING_NOMINAL_GAIN = np.array([[-0.1812, -0.0373, -4.5996, -0.6649]])


@dataclass
class VehicleParams:
    # Illustrative mid-size sedan; not identified from any particular vehicle
    mass: float = 1650.0           # kg
    yaw_inertia: float = 2315.0    # kg m^2
    lf: float = 1.10               # CoG to front axle, m
    lr: float = 1.59               # CoG to rear axle, m
    cf: float = 133_000.0          # front cornering stiffness, N/rad
    cr: float = 98_800.0           # rear cornering stiffness, N/rad


def lane_keeping_standin(r_d_max: float = 0.015, speed: float = 30.0, dt: float = 0.1,
                         disturbance: Union[str, DisturbanceMode] = DisturbanceMode.MEASURABLE,
                         params: Optional[VehicleParams] = None) -> LinearSystem:
    """Linear bicycle lane-keeping stand-in in (y, v, dpsi, r) with steering input.

    Road curvature enters as d = (0, 0, -r_d dt, 0), |r_d| <= r_d_max.
    """
    p = params or VehicleParams()
    U = speed
    a11 = -(p.cf + p.cr) / (p.mass * U)
    a12 = (p.lr * p.cr - p.lf * p.cf) / (p.mass * U) - U
    a21 = (p.lr * p.cr - p.lf * p.cf) / (p.yaw_inertia * U)
    a22 = -(p.lf ** 2 * p.cf + p.lr ** 2 * p.cr) / (p.yaw_inertia * U)
    Ac = np.array([
        [0.0, 1.0, U, 0.0],
        [0.0, a11, 0.0, a12],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, a21, 0.0, a22],
    ])
    Bc = np.array([[0.0], [p.cf / p.mass], [0.0], [p.lf * p.cf / p.yaw_inertia]])

    # zero-order hold
    M = np.zeros((5, 5))
    M[:4, :4], M[:4, 4:] = Ac, Bc
    Md = expm(M * dt)
    A, B = Md[:4, :4], Md[:4, 4:]

    D_v = np.array([[0.0, 0.0, -r_d * dt, 0.0] for r_d in (-r_d_max, r_d_max)])
    bounds = np.array([0.9, 1.2, 0.05, 0.3, np.pi / 2])
    S = Polytope.from_bounds(-bounds, bounds)
    return LinearSystem(A, B, D_v, S, DisturbanceMode(disturbance), name="lane-keeping-standin")


# --- configuration and provenance ---------------------------------------------

def _matrix(data: Any, what: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} is not a numeric matrix: {exc}")
    return np.atleast_2d(arr)


def system_from_config(cfg: Dict[str, Any]) -> LinearSystem:
    """Build a plant from a plant config (explicit matrices or a named preset)."""
    mode = cfg.get("disturbance", "measurable")
    preset = cfg.get("preset")
    if preset == "integrator":
        return chain_of_integrators(int(cfg["n"]), float(cfg.get("d_max", 0.1)), mode)
    if preset == "lane_keeping":
        return lane_keeping_standin(float(cfg.get("r_d_max", 0.015)),
                                    float(cfg.get("speed", 30.0)),
                                    float(cfg.get("dt", 0.1)), mode)
    if preset is not None:
        raise ConfigError(f"unknown plant preset {preset!r}; known presets: {', '.join(list_presets())}")

    A = _matrix(cfg["A"], "A")
    B = _matrix(cfg["B"], "B")
    if B.shape[0] != A.shape[0] and B.shape[1] == A.shape[0]:
        B = B.T
    D = cfg["D"]
    if "vertices" in D:
        D_v = _matrix(D["vertices"], "D.vertices")
    else:
        D_v = disturbance_vertices(Polytope.from_dict(D["polytope"]))
    S = Polytope.from_dict(cfg["S"])
    return LinearSystem(A, B, D_v, S, DisturbanceMode(mode), name=cfg.get("name", "plant"))


def system_to_dict(sys: LinearSystem) -> Dict[str, Any]:
    return {
        "name": sys.name,
        "A": sys.A.tolist(),
        "B": sys.B.tolist(),
        "D": {"vertices": sys.D_v.tolist()},
        "S": sys.S.to_dict(),
        "disturbance": sys.disturbance_mode.value,
        "projection_dim": sys.projection_dim,
        "feedback_K": None if sys.feedback is None else sys.feedback.K.tolist(),
    }


def plant_hash(sys: LinearSystem) -> str:
    """SHA-256 of the plant data rounded to 12 decimals."""
    payload = {
        "A": np.round(sys.A, 12).tolist(),
        "B": np.round(sys.B, 12).tolist(),
        "D_v": np.round(sys.D_v, 12).tolist(),
        "S_G": np.round(sys.S.G, 12).tolist(),
        "S_h": np.round(sys.S.h, 12).tolist(),
        "mode": sys.disturbance_mode.value,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


def list_presets() -> List[str]:
    return ["integrator", "lane_keeping"]
