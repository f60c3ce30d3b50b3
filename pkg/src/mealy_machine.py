#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Finite Mealy-machine controllers

A machine (Q, D, T, Theta, o) reads the index of the disturbance vertex that
occurred and emits an output symbol; symbols are ids only, the numeric
parameter vector behind them lives in implicit_rcis.

Provided here:
- the simple-loop and tree-structure families
- nested outputs o*(s, d_0..d_k)
- the synchronized self-product
- the dominance preorder, decided on the product graph, plus a brute-force
  sequence oracle for small machines
- dominant state detection and the maximal-state partition Q0

Author: Implicit RCIS Research Team
Date: 2026-10-16
"""

from __future__ import annotations
from dataclasses import dataclass, field
from itertools import product as iter_product
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple
import logging
import math

import networkx as nx
import numpy as np

from rcis_errors import ConfigError, StateCountExceedsCap

logger = logging.getLogger(__name__)


@dataclass
class MealyConfig:
    state_cap: int = 100_000          # |Q| guard for constructors
    product_cap: int = 1_000_000      # |Q|^2 guard for the product machine
    naive_cap: int = 7                # largest |Q| for sequence enumeration
    naive_budget: int = 4096          # sequences enumerated per naive query


@dataclass(frozen=True, eq=False)
class MealyMachine:
    states: Tuple[str, ...]
    num_actions: int
    transition: np.ndarray            # |Q| x K, next state index
    output: np.ndarray                # |Q| x K, symbol index
    symbols: Tuple[str, ...]
    m: int = 1
    kind: str = "custom"
    params: Dict[str, Any] = field(default_factory=dict)
    _product: Optional["ProductMachine"] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        T = np.asarray(self.transition, dtype=np.int64)
        O = np.asarray(self.output, dtype=np.int64)
        if len(self.states) == 0 or self.num_actions < 1:
            raise ConfigError("a machine needs at least one state and one action")
        shape = (len(self.states), self.num_actions)
        if T.shape != shape or O.shape != shape:
            raise ConfigError(f"transition/output tables must be {shape}, got {T.shape} and {O.shape}")
        if T.min() < 0 or T.max() >= len(self.states):
            raise ConfigError("transition refers to an unknown state")
        if O.min() < 0 or O.max() >= len(self.symbols):
            raise ConfigError("output refers to an unknown symbol")
        if self.m < 1:
            raise ConfigError("input dimension m must be positive")
        T.setflags(write=False)
        O.setflags(write=False)
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "output", O)
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "symbols", tuple(self.symbols))
        unused = self.unused_symbols()
        if unused:
            logger.warning("machine %s has unused output symbols: %s", self.label, unused)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_symbols(self) -> int:
        return len(self.symbols)

    @property
    def param_dim(self) -> int:
        """Length of theta = (u_1, ..., u_L)."""
        return self.m * self.n_symbols

    @property
    def label(self) -> str:
        if "L" in self.params:
            return f"{self.kind}(L={self.params['L']})"
        return self.kind

    def step(self, s: int, d: int) -> int:
        return int(self.transition[s, d])

    def emit(self, s: int, d: int) -> int:
        return int(self.output[s, d])

    def unused_symbols(self) -> List[str]:
        used = set(np.unique(self.output).tolist())
        return [sym for k, sym in enumerate(self.symbols) if k not in used]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "num_actions": self.num_actions,
            "m": self.m,
            "states": list(self.states),
            "symbols": list(self.symbols),
            "transition": self.transition.tolist(),
            "output": self.output.tolist(),
        }


def _check_state_count(n_states: int, config: MealyConfig) -> None:
    if n_states > config.state_cap:
        raise StateCountExceedsCap(f"machine would have {n_states} states (cap {config.state_cap})")


def simple_loop(L: int, num_actions: int, m: int = 1, config: Optional[MealyConfig] = None) -> MealyMachine:
    """L states in a cycle; s_i emits u_{i+1} (s_L emits u_1) whatever the action."""
    if L < 1 or num_actions < 1:
        raise ConfigError("simple_loop needs L >= 1 and at least one action")
    _check_state_count(L, config or MealyConfig())
    nxt = (np.arange(L) + 1) % L
    table = np.repeat(nxt[:, None], num_actions, axis=1)
    return MealyMachine(
        states=tuple(f"s{i + 1}" for i in range(L)),
        num_actions=num_actions,
        transition=table,
        output=table.copy(),
        symbols=tuple(f"u{i + 1}" for i in range(L)),
        m=m,
        kind="simple_loop",
        params={"L": L},
    )


def _tree_state_id(word: Tuple[int, ...]) -> str:
    return "s0" if not word else "".join(f"d{a + 1}" for a in word)


def tree_machine(L: int, num_actions: int, m: int = 1, config: Optional[MealyConfig] = None) -> MealyMachine:
    """Root s0 plus every action string of length <= L, one symbol per non-root state.

    Reading d appends it to the remembered string, dropping the oldest action
    once the string has length L; o(s, d) is the symbol of T(s, d).
    """
    if L < 1 or num_actions < 1:
        raise ConfigError("tree_machine needs L >= 1 and at least one action")
    counts = tree_parameter_counts(L, num_actions)
    _check_state_count(counts.n_states, config or MealyConfig())

    words: List[Tuple[int, ...]] = [()]
    for length in range(1, L + 1):
        words.extend(iter_product(range(num_actions), repeat=length))
    index = {w: i for i, w in enumerate(words)}

    T = np.empty((len(words), num_actions), dtype=np.int64)
    for i, w in enumerate(words):
        base = w if len(w) < L else w[1:]
        for d in range(num_actions):
            T[i, d] = index[base + (d,)]
    return MealyMachine(
        states=tuple(_tree_state_id(w) for w in words),
        num_actions=num_actions,
        transition=T,
        output=T - 1,
        symbols=tuple(f"u{i}" for i in range(1, len(words))),
        m=m,
        kind="tree",
        params={"L": L},
    )


class TreeCounts(NamedTuple):
    n_states: int
    n_symbols: int
    N: int          # (K^L - 1) / (K - 1), or L when K = 1


def tree_parameter_counts(L: int, K: int) -> TreeCounts:
    n_states = 1 + sum(K ** i for i in range(1, L + 1))
    N = L if K == 1 else (K ** L - 1) // (K - 1)
    assert n_states - 1 == K * N
    return TreeCounts(n_states, n_states - 1, N)


def nested_output(machine: MealyMachine, s: int, dseq: Sequence[int]) -> int:
    """Symbol emitted on the last action of dseq after running the others from s."""
    if len(dseq) == 0:
        raise ValueError("nested_output needs a nonempty action sequence")
    for d in dseq[:-1]:
        s = machine.step(s, d)
    return machine.emit(s, dseq[-1])


@dataclass(frozen=True, eq=False)
class ProductMachine:
    """Synchronized self-product; pair (a, b) has index a * |Q| + b."""

    base: MealyMachine
    transition: np.ndarray      # |Q|^2 x K
    graph: nx.DiGraph

    @property
    def n_states(self) -> int:
        return self.base.n_states ** 2

    def pair(self, p: int) -> Tuple[int, int]:
        return divmod(p, self.base.n_states)

    def index(self, a: int, b: int) -> int:
        return a * self.base.n_states + b

    def output_pair(self, p: int, d: int) -> Tuple[int, int]:
        a, b = self.pair(p)
        return self.base.emit(a, d), self.base.emit(b, d)


def product(machine: MealyMachine, config: Optional[MealyConfig] = None) -> ProductMachine:
    config = config or MealyConfig()
    n = machine.n_states
    if n * n > config.product_cap:
        raise StateCountExceedsCap(f"product machine would have {n * n} states (cap {config.product_cap})")
    T = machine.transition
    # T_pd((a, b), d) = (T(a, d), T(b, d))
    T_pd = (T[:, None, :] * n + T[None, :, :]).reshape(n * n, machine.num_actions)
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n * n))
    for d in range(machine.num_actions):
        graph.add_edges_from(zip(range(n * n), T_pd[:, d].tolist()))
    return ProductMachine(machine, T_pd, graph)


def _cached_product(machine: MealyMachine) -> ProductMachine:
    if machine._product is None:
        object.__setattr__(machine, "_product", product(machine))
    return machine._product


def _is_function(pairs) -> bool:
    image: Dict[int, int] = {}
    for a, b in pairs:
        if image.setdefault(a, b) != b:
            return False
    return True


def dominates(machine: MealyMachine, s1: int, s2: int) -> bool:
    """s1 dominates s2.

    Every action sequence q yields the pair (o*(s1, q), o*(s2, q)); these are
    exactly the output pairs of product states reachable from (s1, s2). s1
    dominates s2 iff equal first components never meet distinct second ones.
    """
    if s1 == s2:
        return True
    pm = _cached_product(machine)
    start = pm.index(s1, s2)
    reach = nx.descendants(pm.graph, start) | {start}
    pairs = (pm.output_pair(p, d) for p in reach for d in range(machine.num_actions))
    return _is_function(pairs)


def dominates_naive(machine: MealyMachine, s1: int, s2: int, max_len: Optional[int] = None,
                    config: Optional[MealyConfig] = None) -> bool:
    """Dominance by enumerating every action sequence up to max_len.

    The default length is |Q|^2, shortened so that at most naive_budget
    sequences are enumerated. The answer is exact whenever every product state
    reachable from (s1, s2) is reached within that length.
    """
    config = config or MealyConfig()
    if machine.n_states > config.naive_cap:
        raise StateCountExceedsCap(
            f"sequence enumeration limited to {config.naive_cap} states, machine has {machine.n_states}"
        )
    K = machine.num_actions
    if max_len is None:
        max_len = machine.n_states ** 2
        if K > 1:
            max_len = min(max_len, max(1, int(math.log(config.naive_budget, K))))
    pairs = set()
    for length in range(1, max_len + 1):
        for seq in iter_product(range(K), repeat=length):
            pairs.add((nested_output(machine, s1, seq), nested_output(machine, s2, seq)))
    return _is_function(pairs)


def dominance_matrix(machine: MealyMachine) -> np.ndarray:
    """M[i, j] is True iff state i dominates state j."""
    n = machine.n_states
    M = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            M[i, j] = dominates(machine, i, j)
    return M


def find_dominant(machine: MealyMachine) -> Optional[int]:
    """Lowest-index state dominating every state, or None."""
    for s in range(machine.n_states):
        if all(dominates(machine, s, t) for t in range(machine.n_states)):
            return s
    return None


def maximal_partition(machine: MealyMachine) -> List[int]:
    """One representative (lowest index) per component of the maximal states.

    A state is maximal when nothing strictly dominates it. Components are
    the connected components of the dominance relation restricted to the
    maximal states, which also closes the relation transitively.
    """
    M = dominance_matrix(machine)
    strict = M & ~M.T
    q_max = [s for s in range(machine.n_states) if not strict[:, s].any()]
    graph = nx.Graph()
    graph.add_nodes_from(q_max)
    for i in q_max:
        for j in q_max:
            if i < j and (M[i, j] or M[j, i]):
                graph.add_edge(i, j)
    reps = sorted(min(component) for component in nx.connected_components(graph))
    logger.info("machine %s: %d maximal states, Q0 = %s", machine.label, len(q_max),
                [machine.states[s] for s in reps])
    return reps


def machine_from_config(cfg: Dict[str, Any], num_actions: int, m: int = 1,
                        config: Optional[MealyConfig] = None) -> MealyMachine:
    """Machine from {"kind": "simple_loop"|"tree", "L": int} or a custom table."""
    kind = cfg.get("kind")
    if kind == "simple_loop":
        return simple_loop(int(cfg["L"]), num_actions, m, config)
    if kind == "tree":
        return tree_machine(int(cfg["L"]), num_actions, m, config)
    if kind != "custom":
        raise ConfigError(f"unknown machine kind {kind!r}")

    transition = np.asarray(cfg["transition"], dtype=np.int64)
    output = np.asarray(cfg["output"], dtype=np.int64)
    if transition.ndim != 2 or transition.shape[1] != num_actions:
        raise ConfigError(
            f"custom machine tables need one column per disturbance vertex ({num_actions}), "
            f"got shape {transition.shape}"
        )
    states = cfg.get("states") or [f"s{i + 1}" for i in range(transition.shape[0])]
    n_symbols = int(cfg.get("n_symbols", output.max() + 1))
    symbols = cfg.get("symbols") or [f"u{k + 1}" for k in range(n_symbols)]
    return MealyMachine(tuple(str(s) for s in states), num_actions, transition, output,
                        tuple(symbols), m=m, kind="custom")


def parse_machine_spec(text: str) -> Dict[str, Any]:
    """'tree:4' or 'simple_loop:14' -> machine config dict."""
    kind, _, value = text.partition(":")
    if kind not in ("tree", "simple_loop") or not value.isdigit():
        raise ConfigError(f"machine spec must look like 'tree:4' or 'simple_loop:14', got {text!r}")
    return {"kind": kind, "L": int(value)}
