#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
H-representation polytope arithmetic

A Polytope is the set {z : G z <= h}. Every query here reduces to the dense
simplex core in lp_solver: feasibility, containment, redundancy removal,
Fourier-Motzkin projection (with per-step pruning and a row cap), support-
function projection onto low-dimensional targets, bounding boxes, vertex
enumeration for small dimensions and hit-and-run sampling.

Conventions:
- zero rows are allowed; a polytope with no rows is the whole space
- empty polytopes are representable and propagate through intersect/project
- polytopes are immutable (their arrays are read-only)

Author: Implicit RCIS Research Team
Date: 2026-10-16
"""

from __future__ import annotations
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging
import os

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial import QhullError

from lp_solver import EPS_FEAS, LpResult, LpStatus, lp_solve
from rcis_errors import (DimensionMismatch, DimensionTooHigh, EmptyPolytope, ExplosionLimit,
                         NumericalFailure, UnboundedDirection)

logger = logging.getLogger(__name__)

EPS_RED = 1e-8
EPS_VERT = 1e-7
VERTEX_ENUM_DIM_CAP = 4
DEFAULT_ROW_CAP = 100_000
BOX_MARGIN = 1.0 + 1e-6
ROW_CAP_ENV = "RCIS_ROW_CAP"

__all__ = [
    "Box", "Polytope", "LpResult", "LpStatus", "lp_solve", "is_empty", "contains",
    "project", "remove_redundancy", "bounding_box", "intersect", "vertices",
    "chebyshev_center", "hit_and_run", "fiber", "affine_preimage", "fm_row_cap",
]


def fm_row_cap() -> int:
    """Fourier-Motzkin intermediate row cap, overridable through RCIS_ROW_CAP."""
    raw = os.environ.get(ROW_CAP_ENV)
    if raw:
        try:
            return max(1, int(float(raw)))
        except ValueError:
            logger.warning("ignoring non-numeric %s=%r", ROW_CAP_ENV, raw)
    return DEFAULT_ROW_CAP


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(self.lower))
        hi = _frozen(np.atleast_1d(self.upper))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch(f"box bounds have shapes {lo.shape} and {hi.shape}")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return int(self.lower.size)

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def hull(self, other: "Box") -> "Box":
        return Box(np.minimum(self.lower, other.lower), np.maximum(self.upper, other.upper))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def to_polytope(self) -> "Polytope":
        return Polytope.from_box(self)

    def to_dict(self) -> Dict[str, Any]:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Box":
        return cls(np.asarray(data["lower"], dtype=float), np.asarray(data["upper"], dtype=float))


class Polytope:
    """The set {z in R^dim : G z <= h}."""

    __slots__ = ("G", "h", "dim")

    def __init__(self, G, h, dim: Optional[int] = None):
        G = np.asarray(G, dtype=float)
        h = np.asarray(h, dtype=float).ravel()
        if G.size == 0:
            if dim is None:
                dim = G.shape[1] if G.ndim == 2 else 0
            G = np.zeros((0, dim))
        if G.ndim != 2:
            raise DimensionMismatch(f"constraint matrix must be 2-D, got shape {G.shape}")
        if dim is not None and G.shape[1] != dim:
            raise DimensionMismatch(f"constraint matrix has {G.shape[1]} columns, expected {dim}")
        if G.shape[0] != h.size:
            raise DimensionMismatch(f"G has {G.shape[0]} rows but h has {h.size} entries")
        if G.shape[1] < 1:
            raise DimensionMismatch("polytope dimension must be at least 1")
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(h))):
            raise ValueError("polytope data contains NaN or Inf")
        object.__setattr__(self, "G", _frozen(G))
        object.__setattr__(self, "h", _frozen(h))
        object.__setattr__(self, "dim", int(G.shape[1]))

    def __setattr__(self, key, value):
        raise AttributeError("Polytope is immutable")

    def __repr__(self) -> str:
        return f"Polytope(dim={self.dim}, rows={self.n_rows})"

    @property
    def n_rows(self) -> int:
        return int(self.G.shape[0])

    # constructors
    @classmethod
    def universe(cls, dim: int) -> "Polytope":
        return cls(np.zeros((0, dim)), np.zeros(0), dim=dim)

    @classmethod
    def empty(cls, dim: int) -> "Polytope":
        """Canonical empty set: z_1 <= -1 and -z_1 <= -1."""
        G = np.zeros((2, dim))
        G[0, 0], G[1, 0] = 1.0, -1.0
        return cls(G, np.array([-1.0, -1.0]))

    @classmethod
    def from_bounds(cls, lower, upper) -> "Polytope":
        lower = np.asarray(lower, dtype=float).ravel()
        upper = np.asarray(upper, dtype=float).ravel()
        n = lower.size
        G = np.vstack([np.eye(n), -np.eye(n)])
        h = np.concatenate([upper, -lower])
        keep = np.isfinite(h)
        return cls(G[keep], h[keep], dim=n)

    @classmethod
    def from_box(cls, box: Box) -> "Polytope":
        return cls.from_bounds(box.lower, box.upper)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Polytope":
        G = np.asarray(data["G"], dtype=float)
        h = np.asarray(data["h"], dtype=float)
        dim = data.get("dim")
        if G.size == 0 and dim is None:
            raise DimensionMismatch("a polytope without rows needs an explicit 'dim'")
        return cls(G.reshape(-1, dim) if G.size == 0 else G, h, dim=dim)

    def to_dict(self) -> Dict[str, Any]:
        return {"G": self.G.tolist(), "h": self.h.tolist(), "dim": self.dim}

    # membership
    def contains_point(self, x, tol: float = EPS_FEAS) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise DimensionMismatch(f"point has length {x.size}, polytope dim {self.dim}")
        if self.n_rows == 0:
            return True
        return bool(np.all(self.G @ x <= self.h + tol))

    def contains_points(self, X, tol: float = EPS_FEAS) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"points have {X.shape[1]} columns, polytope dim {self.dim}")
        if self.n_rows == 0:
            return np.ones(X.shape[0], dtype=bool)
        return np.all(X @ self.G.T <= self.h + tol, axis=1)


def _check_same_dim(a: Polytope, b: Polytope) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"polytope dims differ: {a.dim} vs {b.dim}")


def intersect(a: Polytope, b: Polytope) -> Polytope:
    """Row concatenation; redundancy is left to the caller."""
    _check_same_dim(a, b)
    return Polytope(np.vstack([a.G, b.G]), np.concatenate([a.h, b.h]), dim=a.dim)


def is_empty(poly: Polytope) -> bool:
    res = lp_solve(np.zeros(poly.dim), "max", poly)
    return res.status == LpStatus.INFEASIBLE


def contains(outer: Polytope, inner: Polytope, tol: float = EPS_FEAS) -> bool:
    """True iff inner is a subset of outer (each outer facet maximized over inner)."""
    _check_same_dim(outer, inner)
    if outer.n_rows == 0 or is_empty(inner):
        return True
    for g, h in zip(outer.G, outer.h):
        res = lp_solve(g, "max", inner)
        if res.status == LpStatus.UNBOUNDED:
            return False
        scale = max(1.0, float(np.linalg.norm(g)))
        if res.objective > h + tol * scale:
            return False
    return True


def chebyshev_center(poly: Polytope, radius_cap: float = 1.0) -> Tuple[Optional[np.ndarray], float]:
    """Center and radius of the largest inscribed ball (radius capped).

    Returns (None, -inf) for an empty polytope. A flat polytope has radius ~0.
    """
    norms = np.linalg.norm(poly.G, axis=1)
    G = np.hstack([poly.G, norms[:, None]])
    cap_row = np.zeros((1, poly.dim + 1))
    cap_row[0, -1] = 1.0
    aug = Polytope(np.vstack([G, cap_row]), np.concatenate([poly.h, [radius_cap]]))
    c = np.zeros(poly.dim + 1)
    c[-1] = 1.0
    res = lp_solve(c, "max", aug)
    if res.status != LpStatus.OPTIMAL or res.objective < -EPS_FEAS:
        return None, float("-inf")
    return res.primal[:-1], float(res.objective)


def bounding_box(poly: Polytope, margin: float = BOX_MARGIN) -> Box:
    """Tight componentwise box via 2*dim LPs, widened about its center by margin."""
    lower = np.empty(poly.dim)
    upper = np.empty(poly.dim)
    for i in range(poly.dim):
        e = np.zeros(poly.dim)
        e[i] = 1.0
        hi = lp_solve(e, "max", poly)
        if hi.status == LpStatus.INFEASIBLE:
            raise EmptyPolytope("bounding box of an empty polytope")
        if hi.status == LpStatus.UNBOUNDED:
            raise UnboundedDirection(i, "max")
        lo = lp_solve(e, "min", poly)
        if lo.status == LpStatus.UNBOUNDED:
            raise UnboundedDirection(i, "min")
        lower[i], upper[i] = lo.objective, hi.objective
    if margin != 1.0:
        mid = 0.5 * (lower + upper)
        half = 0.5 * (upper - lower) * margin + 1e-12
        lower, upper = mid - half, mid + half
    return Box(lower, np.maximum(upper, lower))


def _normalized_unique_rows(G: np.ndarray, h: np.ndarray, dedup_tol: float = 1e-9):
    """Normalize rows, drop zero rows and keep the tightest copy of duplicates.

    Returns (G, h) or None when a zero row certifies emptiness.
    """
    norms = np.linalg.norm(G, axis=1)
    zero = norms <= 1e-14
    if np.any(h[zero] < -EPS_FEAS):
        return None
    G = G[~zero] / norms[~zero, None]
    h = h[~zero] / norms[~zero]
    if G.shape[0] == 0:
        return G, h
    keys = np.round(G / dedup_tol).astype(np.int64)
    order = np.lexsort(np.vstack([h, keys.T[::-1]]))
    G, h, keys = G[order], h[order], keys[order]
    first = np.ones(G.shape[0], dtype=bool)
    first[1:] = np.any(keys[1:] != keys[:-1], axis=1)
    return G[first], h[first]


def _row_is_needed(G: np.ndarray, h: np.ndarray, rows: Sequence[int], i: int, eps_red: float) -> bool:
    """LP certificate: maximize row i over the other rows with row i relaxed by 1."""
    others = [j for j in rows if j != i]
    sub_G = np.vstack([G[others], G[i:i + 1]]) if others else G[i:i + 1]
    sub_h = np.concatenate([h[others], [h[i] + 1.0]]) if others else np.array([h[i] + 1.0])
    res = lp_solve(G[i], "max", Polytope(sub_G, sub_h))
    if res.status == LpStatus.INFEASIBLE:
        raise NumericalFailure("redundancy test met an infeasible subsystem of a nonempty polytope")
    return res.status == LpStatus.UNBOUNDED or res.objective > h[i] + eps_red


def _ray_shoot_rows(G: np.ndarray, h: np.ndarray, candidates: np.ndarray,
                    center: np.ndarray, eps_red: float) -> List[int]:
    """Incremental certificate scheme started from an interior point.

    Each candidate is tested against the rows confirmed so far; when it is
    not implied, the ray from the center to the LP witness names a facet of
    the full system, which is confirmed and the test repeated.
    """
    confirmed: List[int] = []
    in_confirmed = np.zeros(G.shape[0], dtype=bool)
    alive = np.zeros(G.shape[0], dtype=bool)
    alive[candidates] = True
    slack_c = h - G @ center

    for i in candidates:
        if in_confirmed[i]:
            continue
        while True:
            rows = confirmed + [i]
            sub_h = h[rows].copy()
            sub_h[-1] += 1.0
            res = lp_solve(G[i], "max", Polytope(G[rows], sub_h))
            if res.status != LpStatus.OPTIMAL:
                raise NumericalFailure(f"ray-shooting LP returned {res.status.value}")
            if res.objective <= h[i] + eps_red:
                alive[i] = False
                break
            direction = res.primal - center
            Gd = G @ direction
            t = np.full(G.shape[0], np.inf)
            hit = alive & ~in_confirmed & (Gd > 1e-14)
            t[hit] = slack_c[hit] / Gd[hit]
            j = int(np.argmin(t))
            if not np.isfinite(t[j]) or t[i] <= t[j] * (1.0 + 1e-12) + 1e-15:
                j = i
            confirmed.append(j)
            in_confirmed[j] = True
            if j == i:
                break
    return confirmed


def remove_redundancy(poly: Polytope, eps_red: float = EPS_RED) -> Polytope:
    """Same point set, every retained facet certified non-redundant."""
    if poly.n_rows == 0:
        return poly
    rows = _normalized_unique_rows(poly.G, poly.h)
    if rows is None:
        return Polytope.empty(poly.dim)
    G, h = rows
    if G.shape[0] == 0:
        return Polytope.universe(poly.dim)
    P = Polytope(G, h)
    center, radius = chebyshev_center(P)
    if center is None:
        return Polytope.empty(poly.dim)
    if G.shape[0] == 1:
        return P

    candidates = np.arange(G.shape[0])
    try:
        box = bounding_box(P, margin=1.0)
        box_max = np.maximum(G * box.lower, G * box.upper).sum(axis=1)
        candidates = candidates[~(box_max < h - eps_red)]
    except UnboundedDirection:
        pass

    if radius > 1e-9:
        kept = _ray_shoot_rows(G, h, candidates, center, eps_red)
    else:
        kept = list(candidates)

    final = list(kept)
    for i in list(kept):
        if len(final) > 1 and not _row_is_needed(G, h, final, i, eps_red):
            final.remove(i)
    final.sort()
    logger.debug("redundancy removal: %d -> %d rows", poly.n_rows, len(final))
    return Polytope(G[final], h[final], dim=poly.dim)


def _fm_eliminate(G: np.ndarray, h: np.ndarray, k: int, row_cap: int, tol: float = 1e-12):
    a = G[:, k]
    pos = np.flatnonzero(a > tol)
    neg = np.flatnonzero(a < -tol)
    zero = np.flatnonzero(np.abs(a) <= tol)
    n_new = pos.size * neg.size + zero.size
    if n_new > row_cap:
        raise ExplosionLimit(
            f"Fourier-Motzkin step would create {n_new} rows (cap {row_cap}); "
            f"raise {ROW_CAP_ENV} or use another projection method"
        )
    Gp = G[pos] / a[pos, None]
    hp = h[pos] / a[pos]
    Gn = G[neg] / -a[neg, None]
    hn = h[neg] / -a[neg]
    combo_G = (Gp[:, None, :] + Gn[None, :, :]).reshape(-1, G.shape[1])
    combo_h = (hp[:, None] + hn[None, :]).ravel()
    new_G = np.vstack([G[zero], combo_G])
    new_h = np.concatenate([h[zero], combo_h])
    return np.delete(new_G, k, axis=1), new_h


def _project_fm(poly: Polytope, keep: List[int], row_cap: int, prune: bool = True) -> Polytope:
    cols = list(range(poly.dim))
    G, h = poly.G.copy(), poly.h.copy()
    while len(cols) > len(keep):
        best, best_cost = None, None
        for pos_in_cols, c in enumerate(cols):
            if c in keep:
                continue
            a = G[:, pos_in_cols]
            cost = int(np.sum(a > 1e-12)) * int(np.sum(a < -1e-12))
            if best_cost is None or cost < best_cost:
                best, best_cost = pos_in_cols, cost
        G, h = _fm_eliminate(G, h, best, row_cap)
        del cols[best]
        step = Polytope(G, h, dim=len(cols))
        if prune:
            step = remove_redundancy(step)
        G, h = step.G.copy(), step.h.copy()
        logger.debug("FM eliminated a coordinate, %d remain, %d rows", len(cols), G.shape[0])
    order = [cols.index(k) for k in keep]
    return remove_redundancy(Polytope(G[:, order], h, dim=len(keep)))


class _FlatProjection(Exception):
    pass


def _project_support_1d(poly: Polytope, k: int) -> Polytope:
    e = np.zeros(poly.dim)
    e[k] = 1.0
    rows, rhs = [], []
    hi = lp_solve(e, "max", poly)
    if hi.status == LpStatus.OPTIMAL:
        rows.append([1.0])
        rhs.append(hi.objective)
    lo = lp_solve(e, "min", poly)
    if lo.status == LpStatus.OPTIMAL:
        rows.append([-1.0])
        rhs.append(-lo.objective)
    return Polytope(np.array(rows).reshape(-1, 1), np.array(rhs), dim=1)


def _project_iterhull(poly: Polytope, keep: List[int], tol: float = 1e-9,
                      max_rounds: int = 500) -> Polytope:
    """Convex hull of support points, refined until every facet is supported."""
    k = len(keep)

    def support(a: np.ndarray) -> Tuple[np.ndarray, float]:
        c = np.zeros(poly.dim)
        c[keep] = a
        res = lp_solve(c, "max", poly)
        if res.status == LpStatus.UNBOUNDED:
            raise UnboundedDirection(int(np.argmax(np.abs(a))), "support")
        return res.primal[keep], res.objective

    directions = [s * np.eye(k)[i] for i in range(k) for s in (1.0, -1.0)]
    ones = np.ones(k) / np.sqrt(k)
    directions += [ones, -ones]
    points = [support(d)[0] for d in directions]
    scale = max(1.0, float(np.max(np.abs(points))))

    for _ in range(max_rounds):
        try:
            hull = ConvexHull(np.asarray(points))
        except (QhullError, ValueError) as exc:
            raise _FlatProjection(str(exc))
        eqs = np.unique(np.round(hull.equations, 12), axis=0)
        added = False
        for eq in eqs:
            a, b = eq[:-1], -eq[-1]
            p, val = support(a)
            if val > b + tol * scale:
                points.append(p)
                added = True
        if not added:
            return remove_redundancy(Polytope(eqs[:, :-1], -eqs[:, -1]))
    raise NumericalFailure(f"support-function projection did not settle in {max_rounds} rounds")


def project(poly: Polytope, keep: Sequence[int], method: str = "auto",
            row_cap: Optional[int] = None) -> Polytope:
    """Projection onto the coordinates in keep (in that order).

    method: "fm" (Fourier-Motzkin), "iterhull" (support functions and convex
    hulls, bounded full-dimensional targets of dimension 2 or 3) or "auto".
    """
    keep = [int(k) for k in keep]
    if not keep or len(set(keep)) != len(keep) or min(keep) < 0 or max(keep) >= poly.dim:
        raise DimensionMismatch(f"invalid coordinate selection {keep} for dim {poly.dim}")
    if is_empty(poly):
        return Polytope.empty(len(keep))
    row_cap = fm_row_cap() if row_cap is None else row_cap
    n_elim = poly.dim - len(keep)

    if method == "fm":
        return _project_fm(poly, keep, row_cap)
    if method == "iterhull":
        if len(keep) == 1:
            return _project_support_1d(poly, keep[0])
        return _project_iterhull(poly, keep)
    if method != "auto":
        raise ValueError(f"unknown projection method {method!r}")

    if len(keep) == 1:
        return _project_support_1d(poly, keep[0])
    if len(keep) <= 3 and n_elim > 2:
        try:
            return _project_iterhull(poly, keep)
        except (_FlatProjection, UnboundedDirection) as exc:
            logger.debug("support projection unavailable (%s); using Fourier-Motzkin", exc)
    return _project_fm(poly, keep, row_cap)


def vertices(poly: Polytope, dim_cap: int = VERTEX_ENUM_DIM_CAP,
             eps_vert: float = EPS_VERT) -> List[np.ndarray]:
    """All vertices of a bounded polytope by facet-subset enumeration."""
    if poly.dim > dim_cap:
        raise DimensionTooHigh(f"vertex enumeration limited to dim <= {dim_cap}, got {poly.dim}")
    if is_empty(poly):
        return []
    bounding_box(poly, margin=1.0)
    P = remove_redundancy(poly)
    found: List[np.ndarray] = []
    for rows in combinations(range(P.n_rows), P.dim):
        A = P.G[list(rows)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        v = np.linalg.solve(A, P.h[list(rows)])
        if np.any(P.G @ v > P.h + eps_vert):
            continue
        if all(np.max(np.abs(v - w)) > eps_vert for w in found):
            found.append(v)
    found.sort(key=lambda v: tuple(v))
    return found


def fiber(poly: Polytope, indices: Sequence[int], values) -> Polytope:
    """The section obtained by pinning coordinates `indices` to `values`.

    The result lives on the remaining coordinates, in their original order.
    """
    indices = list(indices)
    values = np.asarray(values, dtype=float).ravel()
    if len(indices) != values.size:
        raise DimensionMismatch(f"{len(indices)} indices but {values.size} values")
    rest = [i for i in range(poly.dim) if i not in set(indices)]
    if not rest:
        raise DimensionMismatch("fiber would pin every coordinate")
    h = poly.h - poly.G[:, indices] @ values
    return Polytope(poly.G[:, rest], h, dim=len(rest))


def affine_preimage(poly: Polytope, M: np.ndarray, c: Optional[np.ndarray] = None) -> Polytope:
    """{z : M z + c in poly}."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != poly.dim:
        raise DimensionMismatch(f"map has {M.shape[0]} outputs, polytope dim {poly.dim}")
    c = np.zeros(poly.dim) if c is None else np.asarray(c, dtype=float).ravel()
    return Polytope(poly.G @ M, poly.h - poly.G @ c, dim=M.shape[1])


def hit_and_run(poly: Polytope, n: int, rng: np.random.Generator, burn_in: int = 50,
                thin: int = 1, start: Optional[np.ndarray] = None) -> np.ndarray:
    """Hit-and-run samples from a bounded polytope (n x dim array)."""
    if start is None:
        start, radius = chebyshev_center(poly)
        if start is None:
            return np.empty((0, poly.dim))
        if radius <= 1e-12:
            logger.warning("hit-and-run on a flat polytope; returning the center only")
            return np.repeat(start[None, :], n, axis=0)
    x = np.array(start, dtype=float)
    G, h = poly.G, poly.h
    out = np.empty((n, poly.dim))
    total = burn_in + n * thin
    for step in range(total):
        d = rng.standard_normal(poly.dim)
        d /= np.linalg.norm(d)
        Gd = G @ d
        slack = np.maximum(h - G @ x, 0.0)
        up = Gd > 1e-14
        down = Gd < -1e-14
        if not up.any() or not down.any():
            raise UnboundedDirection(int(np.argmax(np.abs(d))), "hit-and-run chord")
        hi = np.min(slack[up] / Gd[up])
        lo = np.max(slack[down] / Gd[down])
        x = x + rng.uniform(lo, hi) * d
        k = step - burn_in
        if k >= 0 and k % thin == 0:
            out[k // thin] = x
    return out
