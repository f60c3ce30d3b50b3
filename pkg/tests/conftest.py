#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Shared fixtures for the implicit-RCIS test suite."""

import os
import sys

import numpy as np
import pytest

# Add project src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))

from polytope import Polytope  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_square():
    return Polytope.from_bounds([0.0, 0.0], [1.0, 1.0])


@pytest.fixture(scope="session")
def integrator2():
    """Double integrator after deadbeat prefeedback (the synthesis plant)."""
    from linear_system import chain_of_integrators, prepare_for_synthesis
    return prepare_for_synthesis(chain_of_integrators(2)).plant


@pytest.fixture(scope="session")
def integrator2_rcis(integrator2):
    from implicit_rcis import compute_implicit_rcis
    from mealy_machine import tree_machine
    machine = tree_machine(4, len(integrator2.D_v), integrator2.m)
    return compute_implicit_rcis(integrator2, machine)


@pytest.fixture(scope="session")
def integrator2_oracle(integrator2):
    from maximal_rcis_oracle import maximal_rcis
    return maximal_rcis(integrator2)


@pytest.fixture(scope="session")
def integrator2_explicit(integrator2_rcis):
    from implicit_rcis import explicit_projection
    return explicit_projection(integrator2_rcis)
