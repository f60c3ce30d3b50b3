#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Reference computations for invariant sets

- maximal_rcis: the classical fixed-point iteration
      C_0 = Proj_x(S),  C_{k+1} = C_k ∩ Pre(C_k)
  with Pre built per disturbance vertex (measurable) or with one shared
  input (non-measurable), each step projected out by Fourier-Motzkin
- mc_volume_ratio: seeded Monte-Carlo volume ratio of two sets in a box
- invariance_audit: sampled one-step check of "for every x in C and every
  vertex d there is a safe u with Ax + Bu + d in C"
- volume_table: the (method, time_s, vol_pct) comparison table

Author: Implicit RCIS Research Team
Date: 2026-10-16
"""

from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Union
import logging
import sys
import time

import numpy as np
import pandas as pd
from tqdm import tqdm

from implicit_rcis import ImplicitRcis, RcisKind, membership, successor_fiber
from linear_system import DisturbanceMode, LinearSystem
from lp_solver import EPS_FEAS, LpStatus, lp_solve
from polytope import (Box, Polytope, bounding_box, contains, fiber, hit_and_run, intersect,
                      is_empty, project, remove_redundancy)
from rcis_errors import NumericalFailure, UnboundedDirection

logger = logging.getLogger(__name__)

Predicate = Callable[[np.ndarray], bool]
SetLike = Union[Predicate, Polytope, ImplicitRcis]


@dataclass
class OracleConfig:
    max_iter: int = 200
    projection_method: str = "auto"
    check_monotone: bool = True      # assert C_{k+1} ⊆ C_k every iteration
    fallback_bound: float = 1e3      # box used when Proj_x(S) is unbounded


@dataclass(frozen=True, eq=False)
class OracleResult:
    C: Polytope
    iterations: int
    converged: bool
    wall_time: float
    row_history: tuple = ()
    projection_dim: Optional[int] = None

    @property
    def empty(self) -> bool:
        return is_empty(self.C)

    def reported_set(self, method: str = "auto") -> Polytope:
        """Projection onto the leading coordinates for lifted plants."""
        if self.projection_dim is None or self.projection_dim == self.C.dim:
            return self.C
        return project(self.C, list(range(self.projection_dim)), method=method)


def _initial_set(plant: LinearSystem, config: OracleConfig) -> Polytope:
    C0 = project(plant.S, list(range(plant.n)), method=config.projection_method)
    try:
        bounding_box(C0, margin=1.0)
    except UnboundedDirection as exc:
        logger.warning("Proj_x(S) is unbounded along x_%d; iterating inside |x_i| <= %g",
                       exc.coordinate, config.fallback_bound)
        bound = np.full(plant.n, config.fallback_bound)
        C0 = intersect(C0, Polytope.from_bounds(-bound, bound))
    return remove_redundancy(C0)


def _successor_rows(C: Polytope, plant: LinearSystem, d: np.ndarray):
    """Rows over (x, u) of Ax + Bu + d in C."""
    return np.hstack([C.G @ plant.A, C.G @ plant.B]), C.h - C.G @ d


def predecessor_set(C: Polytope, plant: LinearSystem, method: str = "auto") -> Polytope:
    """{x : for all vertices d, some u keeps (x, u) in S and Ax + Bu + d in C}."""
    keep = list(range(plant.n))
    if plant.disturbance_mode == DisturbanceMode.NON_MEASURABLE:
        parts = [(plant.S.G, plant.S.h)] + [_successor_rows(C, plant, d) for d in plant.D_v]
        joint = Polytope(np.vstack([G for G, _ in parts]), np.concatenate([h for _, h in parts]),
                         dim=plant.n + plant.m)
        return project(joint, keep, method=method)

    pre = Polytope.universe(plant.n)
    for d in plant.D_v:
        G, h = _successor_rows(C, plant, d)
        per_vertex = Polytope(np.vstack([plant.S.G, G]), np.concatenate([plant.S.h, h]),
                              dim=plant.n + plant.m)
        pre = intersect(pre, project(per_vertex, keep, method=method))
    return pre


def maximal_rcis(plant: LinearSystem, config: Optional[OracleConfig] = None,
                 max_iter: Optional[int] = None) -> OracleResult:
    """Fixed-point iteration to the maximal RCIS of the plant.

    Converges when C_{k+1} contains C_k (the reverse holds by construction);
    an empty iterate is a converged empty answer. Hitting max_iter returns
    the last iterate, an outer bound only, with converged=False.
    """
    config = config or OracleConfig()
    max_iter = config.max_iter if max_iter is None else max_iter
    t0 = time.perf_counter()
    C = _initial_set(plant, config)
    history = [C.n_rows]

    for k in range(1, max_iter + 1):
        nxt = remove_redundancy(intersect(C, predecessor_set(C, plant, config.projection_method)))
        history.append(nxt.n_rows)
        logger.debug("oracle iteration %d: %d rows", k, nxt.n_rows)
        if is_empty(nxt):
            logger.info("oracle converged to the empty set after %d iterations", k)
            return OracleResult(nxt, k, True, time.perf_counter() - t0, tuple(history), plant.projection_dim)
        if config.check_monotone and not contains(C, nxt, tol=1e-6):
            raise NumericalFailure(f"oracle iterate {k} is not contained in its predecessor")
        if contains(nxt, C):
            logger.info("oracle converged after %d iterations (%d rows)", k, nxt.n_rows)
            return OracleResult(nxt, k, True, time.perf_counter() - t0, tuple(history), plant.projection_dim)
        C = nxt

    logger.warning("oracle did not converge in %d iterations; result is an outer bound", max_iter)
    return OracleResult(C, max_iter, False, time.perf_counter() - t0, tuple(history), plant.projection_dim)


@dataclass(frozen=True)
class VolumeEstimate:
    ratio: float
    samples: int
    seed: int
    half_width: float
    hits_a: int
    hits_b: int
    degenerate: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _as_batch_predicate(member: SetLike) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(member, Polytope):
        return lambda X: member.contains_points(X)
    if isinstance(member, ImplicitRcis):
        return lambda X: np.array([membership(member, x) for x in X], dtype=bool)
    return lambda X: np.array([bool(member(x)) for x in X], dtype=bool)


def _progress_enabled(progress: Optional[bool]) -> bool:
    return sys.stderr.isatty() if progress is None else progress


def mc_volume_ratio(member_a: SetLike, member_b: SetLike, box: Box, N: int = 10_000,
                    seed: int = 0, workers: int = 1, chunk: int = 1000,
                    assume_subset: bool = False, progress: Optional[bool] = False) -> VolumeEstimate:
    """vol(a) / vol(b) from N uniform samples of box.

    The seed is split into one stream per chunk, so the estimate does not
    depend on the worker count. With assume_subset, a is only queried on
    samples that hit b.
    """
    in_a = _as_batch_predicate(member_a)
    in_b = _as_batch_predicate(member_b)
    sizes = [min(chunk, N - start) for start in range(0, N, chunk)]
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(args):
        size, stream = args
        X = box.sample(size, np.random.default_rng(stream))
        hit_b = in_b(X)
        if assume_subset:
            hit_a = np.zeros(size, dtype=bool)
            if hit_b.any():
                hit_a[hit_b] = in_a(X[hit_b])
        else:
            hit_a = in_a(X)
        return int(hit_a.sum()), int(hit_b.sum())

    jobs = list(zip(sizes, streams))
    show = _progress_enabled(progress)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(tqdm(pool.map(run, jobs), total=len(jobs), disable=not show, desc="MC volume"))
    else:
        counts = [run(job) for job in tqdm(jobs, disable=not show, desc="MC volume")]
    hits_a = sum(c[0] for c in counts)
    hits_b = sum(c[1] for c in counts)

    if hits_b == 0:
        ratio, degenerate = (0.0, True) if hits_a == 0 else (float("inf"), True)
        return VolumeEstimate(ratio, N, seed, 0.0, hits_a, hits_b, degenerate)
    ratio = hits_a / hits_b
    p = min(ratio, 1.0)
    half_width = 1.96 * float(np.sqrt(p * (1.0 - p) / N))
    return VolumeEstimate(ratio, N, seed, half_width, hits_a, hits_b)


@dataclass
class AuditReport:
    samples: int
    checks: int
    violations: int
    worst_slack: float
    seed: int
    wall_time_s: float
    vacuous: bool = False

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["passed"] = self.passed
        return data


def _sample_polytope(P: Polytope, n: int, rng: np.random.Generator, burn_in: int) -> np.ndarray:
    """Hit-and-run with coordinates of zero width held at their value."""
    box = bounding_box(P, margin=1.0)
    flat = np.flatnonzero(box.upper - box.lower <= 1e-9)
    if flat.size == 0:
        return hit_and_run(P, n, rng, burn_in=burn_in)
    free = np.setdiff1d(np.arange(P.dim), flat)
    pinned = 0.5 * (box.lower[flat] + box.upper[flat])
    out = np.empty((n, P.dim))
    out[:, flat] = pinned
    if free.size:
        out[:, free] = hit_and_run(fiber(P, flat, pinned), n, rng, burn_in=burn_in)
    return out


def sample_members(target: Union[ImplicitRcis, Polytope], n: int, rng: np.random.Generator,
                   burn_in: int = 50) -> np.ndarray:
    """Member plant states (rows); exact members, drawn in the stored polytope."""
    if isinstance(target, Polytope):
        if is_empty(target):
            return np.empty((0, target.dim))
        return _sample_polytope(target, n, rng, burn_in)
    if target.empty:
        return np.empty((0, target.state_dim))
    if target.kind == RcisKind.SINGLE_CSUB:
        return _sample_polytope(target.polytope, n, rng, burn_in)[:, :target.state_dim]
    # convex-hull kind: draw inside the blocks, each a subset of the hull
    picks = rng.integers(0, len(target.blocks), size=n)
    out = np.empty((n, target.state_dim))
    for i, block in enumerate(target.blocks):
        idx = np.flatnonzero(picks == i)
        if idx.size:
            out[idx] = _sample_polytope(block, idx.size, rng, burn_in)[:, :target.state_dim]
    return out


def _successor_slack(F: Polytope) -> float:
    """max t with every row of F holding with normalized margin t (t <= 1)."""
    norms = np.linalg.norm(F.G, axis=1)
    G = np.vstack([np.hstack([F.G, norms[:, None]]), np.eye(1, F.dim + 1, F.dim)])
    h = np.concatenate([F.h, [1.0]])
    res = lp_solve(np.eye(1, F.dim + 1, F.dim).ravel(), "max", Polytope(G, h))
    if res.status != LpStatus.OPTIMAL:
        return float("-inf")
    return float(res.objective)


def invariance_audit(target: Union[ImplicitRcis, Polytope], plant: LinearSystem, n_samples: int = 1000,
                     seed: int = 0, burn_in: int = 50, progress: Optional[bool] = False) -> AuditReport:
    """Sampled one-step invariance check over every disturbance vertex.

    The slack of a check is the largest uniform margin of the successor
    constraints; a check fails when the constraints are infeasible or the
    slack is below -eps_feas. For the convex-hull kind the equality rows cap
    the slack at 0.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    states = sample_members(target, n_samples, rng, burn_in)
    if states.shape[0] == 0:
        return AuditReport(0, 0, 0, float("inf"), seed, time.perf_counter() - t0, vacuous=True)

    violations, checks, worst = 0, 0, float("inf")
    for x in tqdm(states, disable=not _progress_enabled(progress), desc="audit"):
        for d in plant.D_v:
            slack = _successor_slack(successor_fiber(target, plant, x, d))
            checks += 1
            worst = min(worst, slack)
            if slack < -EPS_FEAS:
                violations += 1
    if violations:
        logger.warning("invariance audit: %d of %d checks failed (worst slack %.3e)",
                       violations, checks, worst)
    else:
        logger.info("invariance audit: %d checks passed (worst slack %.3e)", checks, worst)
    return AuditReport(states.shape[0], checks, violations, worst, seed, time.perf_counter() - t0)


def volume_table(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """Comparison table with columns method, time_s, vol_pct."""
    frame = pd.DataFrame(list(rows), columns=["method", "time_s", "vol_pct"])
    frame["time_s"] = frame["time_s"].astype(float).round(3)
    frame["vol_pct"] = frame["vol_pct"].astype(float).round(2)
    return frame


def estimate_row(method: str, elapsed: float, estimate: VolumeEstimate) -> Dict[str, Any]:
    return {"method": method, "time_s": elapsed, "vol_pct": 100.0 * estimate.ratio}


def hull_box(sets: List[Polytope]) -> Box:
    """Smallest box covering every nonempty set in the list."""
    boxes = [bounding_box(P) for P in sets if not is_empty(P)]
    if not boxes:
        raise ValueError("no nonempty set to cover")
    out = boxes[0]
    for b in boxes[1:]:
        out = out.hull(b)
    return out
