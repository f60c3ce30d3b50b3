#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Error hierarchy for the implicit-RCIS toolkit

Every failure the library can raise derives from RcisError. Each class
carries the process exit code the command line maps it to, so the CLI
never has to keep a separate table in sync.

Author: Implicit RCIS Research Team
Date: 2026-10-16
"""

from __future__ import annotations
from typing import Optional


class RcisError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 1


class ConfigError(RcisError):
    """Unreadable, malformed or schema-violating configuration."""

    exit_code = 2


class DimensionMismatch(RcisError, ValueError):
    exit_code = 3


class NotNilpotent(RcisError):
    """The dynamics matrix has no finite nilpotency index."""

    exit_code = 4


class NotControllable(RcisError):
    exit_code = 4

    def __init__(self, rank: int, n: int):
        super().__init__(
            f"(A, B) is not controllable: controllability matrix rank {rank} < n = {n}"
        )
        self.rank = rank
        self.n = n


class ExplosionLimit(RcisError):
    """Fourier-Motzkin produced more intermediate rows than the configured cap."""

    exit_code = 5


class StateCountExceedsCap(RcisError):
    exit_code = 5


class ReachSetExceedsCap(RcisError):
    exit_code = 5


class DimensionTooHigh(RcisError):
    exit_code = 5


class UnboundedDirection(RcisError):
    """A polytope is unbounded along a coordinate axis."""

    exit_code = 6

    def __init__(self, coordinate: int, sense: Optional[str] = None):
        where = f" ({sense})" if sense else ""
        super().__init__(f"polytope is unbounded along coordinate {coordinate}{where}")
        self.coordinate = coordinate
        self.sense = sense


class UnboundedCsub(RcisError):
    exit_code = 6


class EmptyPolytope(RcisError, ValueError):
    """A query that needs a nonempty polytope was given an empty one."""

    exit_code = 6


class NumericalFailure(RcisError):
    """Iteration caps, cycling or singular linear algebra inside a solver."""

    exit_code = 7


class ContractBreach(RcisError):
    """A supervision step was infeasible although its precondition promised otherwise."""

    exit_code = 8

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step
