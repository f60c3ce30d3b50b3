#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Implicit robust controlled invariant sets from Mealy-machine controllers

The plant in closed loop with a machine whose output symbols carry free
parameters theta = (u_1, ..., u_L) has a finite reachable set whenever A is
nilpotent. Every reachable plant state is affine in (x, theta):

    x' = Cx x + Ctheta theta + c

so "the whole reachable set stays safe" is a finite list of linear
constraints on (x, theta). That polytope, C_sub(s), is built per start state;
a dominant state needs just one, otherwise the bounded blocks over the
maximal-state partition are glued into one lifted polytope C_lambda whose
x-projection is the convex hull of their union.

Author: Implicit RCIS Research Team
Date: 2026-10-16
"""

from __future__ import annotations
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging
import time

import numpy as np

from linear_system import DisturbanceMode, LinearSystem, plant_hash
from lp_solver import LpStatus, lp_solve
from mealy_machine import MealyMachine, find_dominant, maximal_partition
from polytope import (Box, Polytope, bounding_box, fiber, intersect, is_empty, project,
                      remove_redundancy)
from rcis_errors import (ConfigError, DimensionMismatch, NotNilpotent, ReachSetExceedsCap,
                         UnboundedCsub, UnboundedDirection)

logger = logging.getLogger(__name__)


@dataclass
class RcisConfig:
    eps_dedup: float = 1e-9          # grid for merging symbolic states
    reach_cap: int = 1_000_000       # symbolic states per start state
    prune: bool = True               # redundancy removal on each C_sub
    workers: int = 1                 # threads for building C_sub over Q0


class RcisKind(str, Enum):
    SINGLE_CSUB = "single_csub"
    LAMBDA = "lambda"


@dataclass(frozen=True, eq=False)
class AugmentedSystem:
    """Plant and machine in closed loop; theta has m * |Theta| entries."""

    plant: LinearSystem
    machine: MealyMachine

    def __post_init__(self):
        if not self.plant.is_nilpotent:
            raise NotNilpotent("closed-loop reachable set is finite only for nilpotent A; "
                               "apply deadbeat prefeedback first")
        if self.plant.disturbance_mode != DisturbanceMode.MEASURABLE:
            raise ConfigError("non-measurable disturbances must be lifted before synthesis")
        if self.machine.num_actions != self.plant.num_disturbances:
            raise DimensionMismatch(
                f"machine reads {self.machine.num_actions} actions, plant has "
                f"{self.plant.num_disturbances} disturbance vertices"
            )
        if self.machine.m != self.plant.m:
            raise DimensionMismatch(
                f"machine symbols are {self.machine.m}-dim, plant input is {self.plant.m}-dim"
            )

    @property
    def n(self) -> int:
        return self.plant.n

    @property
    def m(self) -> int:
        return self.plant.m

    @property
    def L(self) -> int:
        return self.machine.n_symbols

    @property
    def param_dim(self) -> int:
        return self.m * self.L

    def symbol_selector(self, k: int) -> np.ndarray:
        """m x (m L) matrix picking the k-th block of theta."""
        E = np.zeros((self.m, self.param_dim))
        E[:, k * self.m:(k + 1) * self.m] = np.eye(self.m)
        return E


@dataclass(frozen=True, eq=False)
class SymbolicReachState:
    state: int
    Cx: np.ndarray
    Ctheta: np.ndarray
    c: np.ndarray
    depth: int

    def evaluate(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return self.Cx @ x + self.Ctheta @ theta + self.c


def _dedup_key(state: int, Cx, Ctheta, c, eps: float) -> Tuple[int, bytes]:
    flat = np.concatenate([Cx.ravel(), Ctheta.ravel(), c])
    return state, np.round(flat / eps).astype(np.int64).tobytes()


def enumerate_reachable(aug: AugmentedSystem, s0: int,
                        config: Optional[RcisConfig] = None) -> List[SymbolicReachState]:
    """Breadth-first symbolic reachable set from (x, theta, s0), start included.

    Actions are expanded in ascending index order; states that agree on the
    machine state and on every coefficient within eps_dedup are merged.
    """
    config = config or RcisConfig()
    plant, machine = aug.plant, aug.machine
    A, B = plant.A, plant.B
    start = SymbolicReachState(s0, np.eye(aug.n), np.zeros((aug.n, aug.param_dim)), np.zeros(aug.n), 0)
    seen = {_dedup_key(s0, start.Cx, start.Ctheta, start.c, config.eps_dedup)}
    found = [start]
    queue = deque([start])

    while queue:
        cur = queue.popleft()
        Cx_next = A @ cur.Cx
        Ctheta_base = A @ cur.Ctheta
        c_base = A @ cur.c
        for j in range(machine.num_actions):
            k = machine.emit(cur.state, j)
            Ctheta = Ctheta_base.copy()
            Ctheta[:, k * aug.m:(k + 1) * aug.m] += B
            c = c_base + plant.D_v[j]
            q = machine.step(cur.state, j)
            key = _dedup_key(q, Cx_next, Ctheta, c, config.eps_dedup)
            if key in seen:
                continue
            seen.add(key)
            nxt = SymbolicReachState(q, Cx_next, Ctheta, c, cur.depth + 1)
            found.append(nxt)
            queue.append(nxt)
            if len(found) > config.reach_cap:
                raise ReachSetExceedsCap(
                    f"reachable set from {machine.states[s0]} exceeds {config.reach_cap} symbolic states"
                )
    logger.debug("reachable set from %s: %d symbolic states, depth %d",
                 machine.states[s0], len(found), found[-1].depth)
    return found


def _csub_rows(aug: AugmentedSystem, reach: Sequence[SymbolicReachState]) -> Tuple[np.ndarray, np.ndarray]:
    n = aug.n
    S = aug.plant.S
    Gx, Gu, hS = S.G[:, :n], S.G[:, n:], S.h
    selectors = [Gu @ aug.symbol_selector(k) for k in range(aug.L)]
    blocks_G, blocks_h = [], []
    emitted = set()
    for r in reach:
        left = Gx @ r.Cx
        mid = Gx @ r.Ctheta
        rhs = hS - Gx @ r.c
        for j in range(aug.machine.num_actions):
            k = aug.machine.emit(r.state, j)
            emitted.add(k)
            blocks_G.append(np.hstack([left, mid + selectors[k]]))
            blocks_h.append(rhs)
    # symbols never emitted from this start enter no constraint; pin them to 0
    for k in sorted(set(range(aug.L)) - emitted):
        E = np.hstack([np.zeros((aug.m, n)), aug.symbol_selector(k)])
        blocks_G.extend([E, -E])
        blocks_h.extend([np.zeros(aug.m), np.zeros(aug.m)])
    return np.vstack(blocks_G), np.concatenate(blocks_h)


def build_csub(aug: AugmentedSystem, s_i: int, reach: Optional[Sequence[SymbolicReachState]] = None,
               config: Optional[RcisConfig] = None) -> Polytope:
    """{(x, theta) : every reachable (x', o(s', d; theta)) lies in S} over (x, theta)."""
    config = config or RcisConfig()
    if reach is None:
        reach = enumerate_reachable(aug, s_i, config)
    G, h = _csub_rows(aug, reach)
    poly = Polytope(G, h, dim=aug.n + aug.param_dim)
    return remove_redundancy(poly) if config.prune else poly


def build_clambda(csubs: Sequence[Polytope], boxes: Sequence[Box]) -> Polytope:
    """Lifted polytope whose z-projection is CH(union of csub_i cut by box_i).

    Variables are laid out as (z, z_1, ..., z_q, lambda_1, ..., lambda_q) with
    [G_i; I; -I] z_i <= lambda_i [h_i; upper_i; -lower_i], lambda >= 0,
    sum lambda = 1 and sum z_i = z (equalities as inequality pairs).
    """
    if not csubs:
        raise ValueError("build_clambda needs at least one block")
    if len(csubs) != len(boxes):
        raise DimensionMismatch(f"{len(csubs)} blocks but {len(boxes)} boxes")
    d = csubs[0].dim
    q = len(csubs)
    dim = d * (1 + q) + q
    rows: List[np.ndarray] = []
    rhs: List[np.ndarray] = []

    for i, (P, box) in enumerate(zip(csubs, boxes)):
        if P.dim != d or box.dim != d:
            raise DimensionMismatch(f"block {i} has dim {P.dim}, box dim {box.dim}, expected {d}")
        Gi = np.vstack([P.G, np.eye(d), -np.eye(d)])
        hi = np.concatenate([P.h, box.upper, -box.lower])
        block = np.zeros((Gi.shape[0], dim))
        block[:, d * (1 + i):d * (2 + i)] = Gi
        block[:, d * (1 + q) + i] = -hi
        rows.append(block)
        rhs.append(np.zeros(Gi.shape[0]))

    lam = np.zeros((q, dim))
    lam[:, d * (1 + q):] = -np.eye(q)
    rows.append(lam)
    rhs.append(np.zeros(q))

    total = np.zeros((1, dim))
    total[0, d * (1 + q):] = 1.0
    rows.extend([total, -total])
    rhs.extend([np.ones(1), -np.ones(1)])

    link = np.zeros((d, dim))
    link[:, :d] = -np.eye(d)
    for i in range(q):
        link[:, d * (1 + i):d * (2 + i)] = np.eye(d)
    rows.extend([link, -link])
    rhs.extend([np.zeros(d), np.zeros(d)])
    return Polytope(np.vstack(rows), np.concatenate(rhs), dim=dim)


@dataclass
class ComputationReport:
    kind: str
    empty: bool
    machine: str
    plant_hash: str
    start_states: List[str]
    reach_sizes: Dict[str, int] = field(default_factory=dict)
    rows_raw: Dict[str, int] = field(default_factory=dict)
    rows_pruned: Dict[str, int] = field(default_factory=dict)
    empty_blocks: List[str] = field(default_factory=list)
    polytope_dim: int = 0
    polytope_rows: int = 0
    timings: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class ImplicitRcis:
    """The stored set lives over (x, theta[, lift variables]).

    state_dim is the synthesis plant's state dimension; projection_dim is the
    number of leading coordinates that form the reported state (smaller than
    state_dim for the one-step-delay lift).
    """

    kind: RcisKind
    polytope: Polytope
    state_dim: int
    projection_dim: int
    m: int
    L: int
    blocks: Tuple[Polytope, ...] = ()
    block_states: Tuple[str, ...] = ()
    empty: bool = False
    provenance: Dict[str, Any] = field(default_factory=dict)
    report: Optional[ComputationReport] = None

    @property
    def param_dim(self) -> int:
        return self.m * self.L

    @property
    def lift_dim(self) -> int:
        return self.polytope.dim - self.projection_dim

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "empty": self.empty,
            "state_dim": self.state_dim,
            "projection_dim": self.projection_dim,
            "m": self.m,
            "L": self.L,
            "polytope": self.polytope.to_dict(),
            "blocks": [b.to_dict() for b in self.blocks],
            "block_states": list(self.block_states),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ImplicitRcis":
        return cls(
            kind=RcisKind(data["kind"]),
            polytope=Polytope.from_dict(data["polytope"]),
            state_dim=int(data["state_dim"]),
            projection_dim=int(data["projection_dim"]),
            m=int(data["m"]),
            L=int(data["L"]),
            blocks=tuple(Polytope.from_dict(b) for b in data.get("blocks", [])),
            block_states=tuple(data.get("block_states", [])),
            empty=bool(data.get("empty", False)),
            provenance=dict(data.get("provenance", {})),
        )


def _empty_rcis(kind: RcisKind, aug: AugmentedSystem, provenance, report) -> ImplicitRcis:
    dim = aug.n + aug.param_dim
    return ImplicitRcis(kind, Polytope.empty(dim), aug.n, aug.plant.reported_dim, aug.m, aug.L,
                        empty=True, provenance=provenance, report=report)


def compute_implicit_rcis(plant: LinearSystem, machine: MealyMachine,
                          config: Optional[RcisConfig] = None) -> ImplicitRcis:
    """Dominant state -> its C_sub; otherwise C_lambda over the maximal partition Q0.

    An all-empty outcome is returned as an ImplicitRcis with empty=True.
    """
    config = config or RcisConfig()
    t_start = time.perf_counter()
    aug = AugmentedSystem(plant, machine)

    s_dom = find_dominant(machine)
    if s_dom is not None:
        kind, starts = RcisKind.SINGLE_CSUB, [s_dom]
    else:
        kind, starts = RcisKind.LAMBDA, maximal_partition(machine)
    names = [machine.states[s] for s in starts]
    provenance = {
        "machine": {"kind": machine.kind, **machine.params, "label": machine.label},
        "plant_hash": plant_hash(plant),
    }
    report = ComputationReport(kind.value, False, machine.label, provenance["plant_hash"], names)
    logger.info("%s: %s over %s", machine.label,
                "dominant state" if s_dom is not None else "no dominant state", names)

    def build(s: int) -> Tuple[int, int, int, Polytope]:
        reach = enumerate_reachable(aug, s, config)
        G, h = _csub_rows(aug, reach)
        raw = Polytope(G, h, dim=aug.n + aug.param_dim)
        return len(reach), raw.n_rows, s, remove_redundancy(raw) if config.prune else raw

    t0 = time.perf_counter()
    if config.workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            built = list(pool.map(build, starts))
    else:
        built = [build(s) for s in starts]
    report.timings["csub_s"] = time.perf_counter() - t0

    csubs: List[Tuple[str, Polytope]] = []
    for n_reach, n_raw, s, P in built:
        name = machine.states[s]
        report.reach_sizes[name] = n_reach
        report.rows_raw[name] = n_raw
        report.rows_pruned[name] = P.n_rows
        if is_empty(P):
            report.empty_blocks.append(name)
        else:
            csubs.append((name, P))
        logger.info("C_sub(%s): %d symbolic states, %d -> %d rows", name, n_reach, n_raw, P.n_rows)

    if not csubs:
        report.empty = True
        report.timings["total_s"] = time.perf_counter() - t_start
        logger.warning("every C_sub is empty; the invariant set is empty")
        return _empty_rcis(kind, aug, provenance, report)

    if kind == RcisKind.SINGLE_CSUB:
        name, polytope = csubs[0]
        blocks = (polytope,)
    else:
        t0 = time.perf_counter()
        blocks_list, boxes = [], []
        for name, P in csubs:
            try:
                box = bounding_box(P)
            except UnboundedDirection as exc:
                raise UnboundedCsub(f"C_sub({name}) is unbounded along coordinate {exc.coordinate}")
            boxes.append(box)
            blocks_list.append(intersect(P, box.to_polytope()))
        polytope = build_clambda(blocks_list, boxes)
        blocks = tuple(blocks_list)
        report.timings["clambda_s"] = time.perf_counter() - t0

    report.polytope_dim = polytope.dim
    report.polytope_rows = polytope.n_rows
    report.timings["total_s"] = time.perf_counter() - t_start
    return ImplicitRcis(kind, polytope, aug.n, plant.reported_dim, aug.m, aug.L,
                        blocks=blocks, block_states=tuple(name for name, _ in csubs),
                        provenance=provenance, report=report)


@dataclass(frozen=True)
class MembershipCertificate:
    member: bool
    theta: Optional[np.ndarray] = None
    witness: Optional[np.ndarray] = None     # every stored coordinate after the reported state


def _reported_fiber(rcis: ImplicitRcis, x) -> Polytope:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != rcis.projection_dim:
        raise DimensionMismatch(f"point has length {x.size}, set lives in dim {rcis.projection_dim}")
    return fiber(rcis.polytope, range(rcis.projection_dim), x)


def membership(rcis: ImplicitRcis, x) -> bool:
    """x belongs to the reported projection of the stored set."""
    if rcis.empty:
        _reported_fiber(rcis, x)
        return False
    return not is_empty(_reported_fiber(rcis, x))


def membership_certificate(rcis: ImplicitRcis, x) -> MembershipCertificate:
    F = _reported_fiber(rcis, x)
    if rcis.empty:
        return MembershipCertificate(False)
    res = lp_solve(np.zeros(F.dim), "max", F)
    if res.status != LpStatus.OPTIMAL:
        return MembershipCertificate(False)
    hidden = rcis.state_dim - rcis.projection_dim
    theta = res.primal[hidden:hidden + rcis.param_dim]
    return MembershipCertificate(True, theta=theta, witness=res.primal)


def successor_fiber(target: Union[ImplicitRcis, Polytope], plant: LinearSystem, x, d) -> Polytope:
    """Inputs keeping the successor inside target while (x, u) stays in S.

    For an ImplicitRcis the result is over (u, w) where w are the stored
    variables after the full plant state; for a Polytope over plant states it
    is over u alone.
    """
    x = np.asarray(x, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    if isinstance(target, ImplicitRcis):
        if target.state_dim != plant.n:
            raise DimensionMismatch(f"set was built for {target.state_dim} states, plant has {plant.n}")
        P = target.polytope
    else:
        P = target
    if x.size != plant.n or d.size != plant.n:
        raise DimensionMismatch(f"state and disturbance must have length {plant.n}")
    if P.dim < plant.n:
        raise DimensionMismatch(f"set dim {P.dim} is smaller than the plant state {plant.n}")

    n, m = plant.n, plant.m
    Gz, Gw = P.G[:, :n], P.G[:, n:]
    w_dim = P.dim - n
    drift = plant.A @ x + d
    top = np.hstack([Gz @ plant.B, Gw])
    top_h = P.h - Gz @ drift
    Gx, Gu = plant.S.G[:, :n], plant.S.G[:, n:]
    bottom = np.hstack([Gu, np.zeros((plant.S.n_rows, w_dim))])
    bottom_h = plant.S.h - Gx @ x
    return Polytope(np.vstack([top, bottom]), np.concatenate([top_h, bottom_h]), dim=m + w_dim)


def explicit_projection(rcis: ImplicitRcis, method: str = "auto") -> Polytope:
    """H-representation of the reported state set."""
    if rcis.empty:
        return Polytope.empty(rcis.projection_dim)
    return project(rcis.polytope, list(range(rcis.projection_dim)), method=method)
