#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Dense active-set QP

Solves

    min  1/2 z.H z + f.z   s.t.   G z <= h,   E z = e

for positive semidefinite H and the small dense problems the supervisor
produces (a few inputs plus the stored parameters of the invariant set).

Primal active-set method:
- a feasible start comes from the simplex core (zero objective)
- each iteration solves the equality-constrained subproblem on the null
  space of the working set; a singular reduced Hessian is allowed, and a
  zero-curvature descent direction is followed until a row blocks it
- a step of length zero triggers the multiplier test; the row with the most
  negative multiplier leaves the working set

Author: Implicit RCIS Research Team
Date: 2026-10-16
"""

from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple
import logging

import numpy as np
from scipy.linalg import null_space

from lp_solver import LpStatus, lp_solve
from polytope import Polytope
from rcis_errors import DimensionMismatch, NumericalFailure

logger = logging.getLogger(__name__)

TOL_QP = 1e-7


class QpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class QpResult:
    status: QpStatus
    x: Optional[np.ndarray]
    objective: float
    iterations: int = 0
    # one entry per inequality row, zero off the final working set
    multipliers: Optional[np.ndarray] = None
    eq_multipliers: Optional[np.ndarray] = None

    @property
    def is_optimal(self) -> bool:
        return self.status == QpStatus.OPTIMAL


@dataclass
class QpConfig:
    tol: float = TOL_QP
    # rows within this of their bound join the initial working set
    active_tol: float = 1e-9
    rank_tol: float = 1e-10
    # working-set changes per problem = factor * (vars + rows) + 50
    max_iter_factor: int = 20


class ActiveSetSolver:
    """Primal active-set method with a null-space step."""

    def __init__(self, config: Optional[QpConfig] = None):
        self.config = config or QpConfig()

    def _independent(self, rows: np.ndarray, candidates, base: np.ndarray) -> List[int]:
        """Greedy subset of candidate rows linearly independent of base and each other."""
        chosen: List[int] = []
        stack = base
        rank = np.linalg.matrix_rank(stack, tol=self.config.rank_tol) if stack.size else 0
        for i in candidates:
            trial = np.vstack([stack, rows[i]]) if stack.size else rows[i][None, :]
            r = np.linalg.matrix_rank(trial, tol=self.config.rank_tol)
            if r > rank:
                chosen.append(int(i))
                stack, rank = trial, r
        return chosen

    def _start(self, G, h, E, e, start) -> Optional[np.ndarray]:
        n = G.shape[1]
        tol = self.config.tol
        if start is not None:
            z = np.asarray(start, dtype=float).ravel()
            if np.all(G @ z <= h + tol) and np.all(np.abs(E @ z - e) <= tol):
                return z
        if G.shape[0] == 0 and E.shape[0] == 0:
            return np.zeros(n)
        P = Polytope(np.vstack([G, E, -E]), np.concatenate([h, e, -e]), dim=n)
        res = lp_solve(np.zeros(n), "max", P)
        if res.status != LpStatus.OPTIMAL:
            return None
        return res.primal

    def _step(self, H, g, Z) -> Tuple[np.ndarray, bool]:
        """Null-space step; the flag marks a zero-curvature ray."""
        if Z.shape[1] == 0:
            return np.zeros(H.shape[0]), False
        Hr = Z.T @ H @ Z
        gr = Z.T @ g
        y = np.linalg.lstsq(Hr, -gr, rcond=None)[0]
        r = gr + Hr @ y
        if np.linalg.norm(r) > self.config.tol * max(1.0, np.linalg.norm(gr)):
            return -Z @ r, True
        return Z @ y, False

    def solve(self, H, f, G, h, E=None, e=None, start=None) -> QpResult:
        cfg = self.config
        f = np.asarray(f, dtype=float).ravel()
        n = f.size
        H = np.asarray(H, dtype=float).reshape(n, n)
        H = 0.5 * (H + H.T)
        G = np.asarray(G, dtype=float).reshape(-1, n)
        h = np.asarray(h, dtype=float).ravel()
        E = np.zeros((0, n)) if E is None else np.asarray(E, dtype=float).reshape(-1, n)
        e = np.zeros(0) if e is None else np.asarray(e, dtype=float).ravel()
        if G.shape[0] != h.size or E.shape[0] != e.size:
            raise DimensionMismatch("constraint rows and right-hand sides disagree")

        z = self._start(G, h, E, e, start)
        if z is None:
            return QpResult(QpStatus.INFEASIBLE, None, float("inf"))

        eq_rows = self._independent(E, range(E.shape[0]), np.zeros((0, n)))
        E_w = E[eq_rows]
        near = np.flatnonzero(h - G @ z <= cfg.active_tol * (1.0 + np.abs(h)))
        W = self._independent(G, near, E_w)

        max_iter = cfg.max_iter_factor * (n + G.shape[0]) + 50
        for it in range(1, max_iter + 1):
            g = H @ z + f
            A_w = np.vstack([E_w, G[W]]) if W else E_w
            Z = null_space(A_w, rcond=cfg.rank_tol) if A_w.shape[0] else np.eye(n)
            p, ray = self._step(H, g, Z)

            if not ray and np.linalg.norm(p) <= cfg.tol * (1.0 + np.linalg.norm(z)):
                lam = np.linalg.lstsq(A_w.T, -g, rcond=None)[0] if A_w.shape[0] else np.zeros(0)
                mu = lam[len(eq_rows):]
                if mu.size == 0 or mu.min() >= -cfg.tol:
                    multipliers = np.zeros(G.shape[0])
                    multipliers[W] = np.maximum(mu, 0.0)
                    eq_mult = np.zeros(E.shape[0])
                    eq_mult[eq_rows] = lam[:len(eq_rows)]
                    obj = float(0.5 * z @ H @ z + f @ z)
                    logger.debug("QP optimal after %d iterations (|W| = %d)", it, len(W))
                    return QpResult(QpStatus.OPTIMAL, z, obj, it, multipliers, eq_mult)
                W.pop(int(np.argmin(mu)))
                continue

            Gp = G @ p
            slack = np.maximum(h - G @ z, 0.0)
            alpha, block = (np.inf if ray else 1.0), None
            in_w = set(W)
            for i in np.flatnonzero(Gp > 1e-12):
                if i in in_w:
                    continue
                a = slack[i] / Gp[i]
                if a < alpha:
                    alpha, block = a, int(i)
            if not np.isfinite(alpha):
                raise NumericalFailure("QP objective is unbounded below on the feasible set")
            z = z + alpha * p
            if block is not None:
                W.append(block)

        raise NumericalFailure(f"active-set QP exceeded {max_iter} iterations")


def qp_solve(H, f, ineq: Polytope, eq: Optional[Tuple[np.ndarray, np.ndarray]] = None,
             config: Optional[QpConfig] = None, start=None) -> QpResult:
    """min 1/2 z.H z + f.z over ineq (optionally with E z = e)."""
    if np.asarray(f).size != ineq.dim:
        raise DimensionMismatch(f"linear term has length {np.asarray(f).size}, polytope dim {ineq.dim}")
    E, e = (None, None) if eq is None else eq
    return ActiveSetSolver(config).solve(H, f, ineq.G, ineq.h, E, e, start=start)
