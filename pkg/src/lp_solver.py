#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Dense simplex LP core

Solves  max / min  c.z  subject to  G z <= h  (z free) for the small dense
problems that polytope arithmetic produces. The solver works on the dual

    min  h.y   s.t.   G^T y = c,   y >= 0

with a two-phase revised simplex. The basis has one row per ambient
coordinate rather than one per facet, which keeps it cheap for the tall
constraint matrices of lifted invariant sets. The basis is LU-factored
afresh before every pivot, so basic values and multipliers never drift.
The primal optimizer is read off the simplex multipliers of the dual.

Pivoting:
- Dantzig's most-negative rule with a Harris two-pass ratio test
- after bland_after degenerate pivots the phase stays on Bland's rule
  (smallest entering index, smallest leaving index among ratio ties)
- basic values pushed below zero by roundoff are clamped to zero

Status logic:
- dual optimal    -> primal optimal (strong duality)
- dual unbounded  -> primal infeasible
- dual infeasible -> primal infeasible or unbounded; decided by re-solving
  with c = 0 (a Farkas certificate)

Author: Implicit RCIS Research Team
Date: 2026-10-16
"""

from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple
import logging
import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from rcis_errors import DimensionMismatch, NumericalFailure

logger = logging.getLogger(__name__)

EPS_FEAS = 1e-7


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpSense(str, Enum):
    MIN = "min"
    MAX = "max"


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    primal: Optional[np.ndarray]  # only meaningful when OPTIMAL
    objective: float
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL

    @property
    def is_infeasible(self) -> bool:
        return self.status == LpStatus.INFEASIBLE


@dataclass
class SimplexConfig:
    # Entries of the entering column smaller than this are never pivots
    pivot_tol: float = 1e-9
    # Reduced costs above -cost_tol * max(1, |cost|) count as non-negative
    cost_tol: float = 1e-10
    # Phase-1 residual (relative to 1 + |c|_1) above which the dual is infeasible
    phase1_tol: float = 1e-9
    # Bound violation the Harris pass may trade for a larger pivot
    harris_tol: float = 1e-11
    # Steps at or below this length count as degenerate
    degenerate_tol: float = 1e-12
    # Degenerate pivots in a phase before Bland's rule takes over for good
    bland_after: int = 50
    # Pivot budget per phase = factor * (rows + cols) + 100
    max_iter_factor: int = 50
    # Primal feasibility tolerance (normalized rows)
    eps_feas: float = EPS_FEAS


def _factor(M: np.ndarray, basis: np.ndarray):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(M[:, basis], check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.size and diag.min() <= 1e-13 * max(1.0, diag.max()):
        raise NumericalFailure("simplex basis became singular")
    return lu, piv


def _ratio_test(x_B: np.ndarray, w: np.ndarray, basis: np.ndarray, bland: bool,
                cfg: SimplexConfig) -> Tuple[Optional[int], float]:
    """Leaving row and step length, or (None, inf) when the column is unbounded."""
    blocking = w > cfg.pivot_tol
    if not blocking.any():
        return None, float("inf")
    ratios = np.full(w.size, np.inf)
    ratios[blocking] = x_B[blocking] / w[blocking]
    if bland:
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + 1e-12 * (1.0 + rmin))
        i = int(ties[np.argmin(basis[ties])])
        return i, float(ratios[i])
    relaxed = np.full(w.size, np.inf)
    relaxed[blocking] = (x_B[blocking] + cfg.harris_tol) / w[blocking]
    within = np.flatnonzero(blocking & (ratios <= relaxed.min()))
    i = int(within[np.argmax(w[within])])
    return i, float(ratios[i])


def _run_phase(M: np.ndarray, b: np.ndarray, cost: np.ndarray, basis: np.ndarray,
               allowed: np.ndarray, cfg: SimplexConfig, max_iter: int,
               pinned_from: Optional[int] = None) -> Tuple[str, int]:
    """Minimize cost.y over {M y = b, y >= 0} from the feasible basis, in place.

    Columns at index >= pinned_from are artificials that must stay at zero:
    when the entering column would move one, it leaves at a zero step.
    Returns (status, pivots).
    """
    cost_tol = cfg.cost_tol * max(1.0, float(np.abs(cost).max()))
    bland = False
    degenerate = 0
    it = 0
    while True:
        lu = _factor(M, basis)
        x_B = np.maximum(lu_solve(lu, b, check_finite=False), 0.0)
        pi = lu_solve(lu, cost[basis], trans=1, check_finite=False)
        d = cost - M.T @ pi
        d[basis] = 0.0
        cand = np.flatnonzero(allowed & (d < -cost_tol))
        if cand.size == 0:
            return "optimal", it
        j = int(cand[0]) if bland else int(cand[np.argmin(d[cand])])
        w = lu_solve(lu, M[:, j], check_finite=False)

        pinned = np.zeros(w.size, dtype=bool)
        if pinned_from is not None:
            pinned = (basis >= pinned_from) & (np.abs(w) > cfg.pivot_tol)
        if pinned.any():
            rows = np.flatnonzero(pinned)
            i, step = int(rows[np.argmax(np.abs(w[rows]))]), 0.0
        else:
            i, step = _ratio_test(x_B, w, basis, bland, cfg)
            if i is None:
                return "unbounded", it

        if step <= cfg.degenerate_tol:
            degenerate += 1
            if not bland and degenerate >= cfg.bland_after:
                logger.debug("simplex: %d degenerate pivots, switching to Bland's rule", degenerate)
                bland = True
        basis[i] = j
        it += 1
        if it > max_iter:
            raise NumericalFailure(f"simplex exceeded {max_iter} pivots")


class DualSimplexSolver:
    """Revised simplex on the dual of  max c.z s.t. G z <= h."""

    def __init__(self, config: Optional[SimplexConfig] = None):
        self.config = config or SimplexConfig()

    def maximize(self, c: np.ndarray, G: np.ndarray, h: np.ndarray) -> LpResult:
        cfg = self.config
        c = np.asarray(c, dtype=float).ravel()
        G = np.asarray(G, dtype=float)
        h = np.asarray(h, dtype=float).ravel()
        n = c.size
        if G.ndim != 2 or G.shape[1] != n or G.shape[0] != h.size:
            raise DimensionMismatch(
                f"objective has length {n} but constraints are {G.shape} / {h.shape}"
            )

        # Normalize rows; zero rows are either vacuous or a proof of emptiness
        norms = np.linalg.norm(G, axis=1)
        zero = norms <= 1e-14
        if np.any(h[zero] < -cfg.eps_feas):
            return LpResult(LpStatus.INFEASIBLE, None, float("nan"))
        G = G[~zero] / norms[~zero, None]
        h = h[~zero] / norms[~zero]

        if G.shape[0] == 0:
            if np.allclose(c, 0.0):
                return LpResult(LpStatus.OPTIMAL, np.zeros(n), 0.0)
            return LpResult(LpStatus.UNBOUNDED, None, float("inf"))

        status, z, iters = self._solve_dual(c, G, h)
        if status == "infeasible_dual":
            # Primal is infeasible or unbounded; c = 0 tells them apart
            status0, _, iters0 = self._solve_dual(np.zeros(n), G, h)
            iters += iters0
            if status0 == "optimal":
                return LpResult(LpStatus.UNBOUNDED, None, float("inf"), iters)
            return LpResult(LpStatus.INFEASIBLE, None, float("nan"), iters)
        if status == "unbounded_dual":
            return LpResult(LpStatus.INFEASIBLE, None, float("nan"), iters)

        viol = float(np.max(G @ z - h))
        if viol > cfg.eps_feas:
            raise NumericalFailure(f"simplex optimizer violates a facet by {viol:.3e}")
        return LpResult(LpStatus.OPTIMAL, z, float(c @ z), iters)

    def _solve_dual(self, c: np.ndarray, G: np.ndarray, h: np.ndarray):
        cfg = self.config
        r, n = G.shape
        max_iter = cfg.max_iter_factor * (r + n) + 100

        # Columns: r structural (one per facet), then n artificials
        sign = np.where(c < 0.0, -1.0, 1.0)
        M = np.hstack([sign[:, None] * G.T, np.eye(n)])
        b = np.abs(c)
        basis = np.arange(r, r + n)

        it1 = 0
        if b.sum() > 0.0:
            phase1_cost = np.concatenate([np.zeros(r), np.ones(n)])
            _, it1 = _run_phase(M, b, phase1_cost, basis, np.ones(r + n, dtype=bool), cfg, max_iter)
            lu = _factor(M, basis)
            x_B = lu_solve(lu, b, check_finite=False)
            residual = float(np.sum(np.maximum(x_B[basis >= r], 0.0)))
            if residual > cfg.phase1_tol * (1.0 + b.sum()):
                return "infeasible_dual", None, it1

        self._drive_out_artificials(M, basis, r)

        cost = np.concatenate([h, np.zeros(n)])
        allowed = np.zeros(r + n, dtype=bool)
        allowed[:r] = True
        status, it2 = _run_phase(M, b, cost, basis, allowed, cfg, max_iter, pinned_from=r)
        if status == "unbounded":
            return "unbounded_dual", None, it1 + it2

        lu = _factor(M, basis)
        pi = lu_solve(lu, cost[basis], trans=1, check_finite=False)
        return "optimal", sign * pi, it1 + it2

    def _drive_out_artificials(self, M: np.ndarray, basis: np.ndarray, r: int) -> None:
        """Swap zero-level artificials for structural columns where a pivot exists.

        Artificials left behind sit on redundant rows of G^T y = c.
        """
        for i in np.flatnonzero(basis >= r):
            lu = _factor(M, basis)
            e = np.zeros(basis.size)
            e[i] = 1.0
            row = np.abs(lu_solve(lu, e, trans=1, check_finite=False) @ M[:, :r])
            row[basis[basis < r]] = 0.0
            j = int(np.argmax(row))
            if row[j] > self.config.pivot_tol:
                basis[i] = j


_DEFAULT_SOLVER = DualSimplexSolver()


def lp_solve(objective, sense, poly, config: Optional[SimplexConfig] = None) -> LpResult:
    """Optimize a linear objective over a polytope-like object with G and h.

    sense is "min"/"max" (or an LpSense). The returned objective is c.z in the
    caller's sense; an unbounded minimization reports -inf.
    """
    solver = _DEFAULT_SOLVER if config is None else DualSimplexSolver(config)
    c = np.asarray(objective, dtype=float).ravel()
    if c.size != poly.dim:
        raise DimensionMismatch(f"objective length {c.size} != polytope dim {poly.dim}")
    sense = LpSense(sense)
    if sense == LpSense.MAX:
        return solver.maximize(c, poly.G, poly.h)
    res = solver.maximize(-c, poly.G, poly.h)
    if res.status == LpStatus.OPTIMAL:
        return LpResult(res.status, res.primal, float(c @ res.primal), res.iterations)
    if res.status == LpStatus.UNBOUNDED:
        return LpResult(res.status, None, float("-inf"), res.iterations)
    return res
