#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Tests for plant containers, deadbeat prefeedback and the delay lift."""

import numpy as np
import pytest

from linear_system import (LANE_KEEPING_NOMINAL_GAIN, DisturbanceMode, FeedbackTransform,
                           LinearSystem, apply_prefeedback, chain_of_integrators,
                           controllability_rank, deadbeat_gain, disturbance_vertices,
                           lane_keeping_standin, lift_nonmeasurable, list_presets, nilpotency_index,
                           plant_hash, prepare_for_synthesis, system_from_config,
                           system_to_dict)
from polytope import Polytope
from rcis_errors import ConfigError, DimensionMismatch, NotControllable, NotNilpotent


def test_nilpotency_index_of_shift_matrices():
    assert nilpotency_index(np.zeros((3, 3))) == 1
    assert nilpotency_index(np.eye(3, k=1)) == 3
    assert nilpotency_index(np.array([[0.0, 1.0], [0.0, 0.0]])) == 2
    assert nilpotency_index(np.eye(2)) is None


def test_nilpotency_rejects_non_square():
    with pytest.raises(DimensionMismatch):
        nilpotency_index(np.zeros((2, 3)))


def test_double_integrator_deadbeat_gain():
    sys = chain_of_integrators(2)
    fb = deadbeat_gain(sys.A, sys.B)
    np.testing.assert_allclose(fb.K, [[-1.0, -2.0]], atol=1e-12)
    closed = sys.A + sys.B @ fb.K
    np.testing.assert_allclose(closed, [[1.0, 1.0], [-1.0, -1.0]], atol=1e-12)
    np.testing.assert_allclose(closed @ closed, np.zeros((2, 2)), atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_integrator_chains_become_nilpotent(n):
    sys = chain_of_integrators(n)
    plant = apply_prefeedback(sys, deadbeat_gain(sys.A, sys.B))
    assert plant.h_nilp is not None and plant.h_nilp <= n


def test_nilpotent_plant_gets_zero_gain():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    fb = deadbeat_gain(A, np.array([[0.0], [1.0]]))
    np.testing.assert_array_equal(fb.K, np.zeros((1, 2)))


def test_multi_input_deadbeat():
    A = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 1.0, 1.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 2.0]])
    B = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    fb = deadbeat_gain(A, B, seed=3)
    assert fb.K.shape == (2, 4)
    assert nilpotency_index(A + B @ fb.K, eps_nilp=1e-7) is not None


def test_uncontrollable_plant_reports_rank():
    A = np.diag([1.0, 2.0])
    B = np.array([[1.0], [0.0]])
    assert controllability_rank(A, B) == 1
    with pytest.raises(NotControllable) as info:
        deadbeat_gain(A, B)
    assert info.value.rank == 1
    assert info.value.exit_code == 4


def test_prefeedback_rewrites_safe_set():
    sys = chain_of_integrators(2)
    fb = deadbeat_gain(sys.A, sys.B)
    plant = apply_prefeedback(sys, fb)
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = rng.uniform(-1.2, 1.2, 2)
        v = rng.uniform(-3.0, 3.0, 1)
        u = fb.input_from(x, v)
        assert plant.state_input_safe(x, v) == sys.state_input_safe(x, u)
    assert plant.feedback is not None
    np.testing.assert_array_equal(plant.feedback.original_A, sys.A)
    assert plant.feedback.original_S is sys.S


def test_prefeedback_composes():
    sys = chain_of_integrators(2)
    first = apply_prefeedback(sys, FeedbackTransform([[-0.5, -1.0]]))
    second = apply_prefeedback(first, FeedbackTransform([[-0.5, -1.0]]))
    np.testing.assert_allclose(second.feedback.K, [[-1.0, -2.0]])
    np.testing.assert_allclose(second.A, sys.A + sys.B @ np.array([[-1.0, -2.0]]))
    assert second.feedback.original_S is sys.S


def test_prefeedback_shape_checked():
    sys = chain_of_integrators(2)
    with pytest.raises(DimensionMismatch):
        apply_prefeedback(sys, FeedbackTransform([[1.0, 2.0, 3.0]]))


def test_lift_structure():
    sys = chain_of_integrators(2, disturbance="non_measurable")
    lifted = lift_nonmeasurable(sys)
    assert lifted.n == 3 and lifted.m == 1
    assert lifted.disturbance_mode == DisturbanceMode.MEASURABLE
    assert lifted.projection_dim == 2
    np.testing.assert_array_equal(lifted.A[:2, :2], sys.A)
    np.testing.assert_array_equal(lifted.A[:2, 2:], sys.B)
    np.testing.assert_array_equal(lifted.A[2:], np.zeros((1, 3)))
    np.testing.assert_array_equal(lifted.D_v[:, 2], [0.0, 0.0])
    assert lifted.S.dim == 4
    # the new input is unconstrained by S
    assert np.all(lifted.S.G[:, 3] == 0.0)


def test_lift_preserves_nilpotency():
    sys = chain_of_integrators(3, disturbance="non_measurable")
    synth = prepare_for_synthesis(sys)
    assert synth.lifted
    assert synth.plant.h_nilp is not None
    assert synth.plant.h_nilp <= sys.n + 1


def test_lift_requires_non_measurable():
    with pytest.raises(ValueError):
        lift_nonmeasurable(chain_of_integrators(2))


def test_prepare_for_synthesis_modes():
    sys = chain_of_integrators(2)
    with pytest.raises(NotNilpotent, match=r"A \+ B K must be nilpotent.*spectral radius 1\b"):
        prepare_for_synthesis(sys, prefeedback="none")
    synth = prepare_for_synthesis(sys, prefeedback=[[-1.0, -2.0]])
    assert synth.plant.h_nilp == 2
    with pytest.raises(NotNilpotent, match=r"A \+ B K is not nilpotent after prefeedback"):
        prepare_for_synthesis(sys, prefeedback=[[-1.0, 0.0]])
    with pytest.raises(ConfigError):
        prepare_for_synthesis(sys, prefeedback="sometimes")
    with pytest.raises(ConfigError):
        prepare_for_synthesis(chain_of_integrators(2, disturbance="non_measurable"), lift="none")


def test_disturbance_vertices_of_box():
    V = disturbance_vertices(Polytope.from_bounds([-1.0, -2.0], [1.0, 2.0]))
    assert V.shape == (4, 2)
    assert {tuple(v) for v in V} == {(-1.0, -2.0), (-1.0, 2.0), (1.0, -2.0), (1.0, 2.0)}


def test_validation():
    S = Polytope.from_bounds([-1.0] * 3, [1.0] * 3)
    with pytest.raises(DimensionMismatch):
        LinearSystem(np.eye(2), np.ones((3, 1)), [[0.0, 0.0]], S)
    with pytest.raises(DimensionMismatch):
        LinearSystem(np.eye(2), np.ones((2, 1)), [[0.0, 0.0]], Polytope.universe(4))
    with pytest.raises(ValueError):
        LinearSystem(np.array([[np.nan, 0.0], [0.0, 0.0]]), np.ones((2, 1)), [[0.0, 0.0]], S)


def test_lane_keeping_standin_shapes():
    sys = lane_keeping_standin(0.03)
    assert (sys.n, sys.m, sys.num_disturbances) == (4, 1, 2)
    np.testing.assert_allclose(sorted(sys.D_v[:, 2]), [-0.003, 0.003])
    assert LANE_KEEPING_NOMINAL_GAIN.shape == (1, 4)
    assert not sys.is_nilpotent
    assert prepare_for_synthesis(sys).plant.is_nilpotent


def test_config_round_trip_and_hash():
    sys = chain_of_integrators(3)
    rebuilt = system_from_config(system_to_dict(sys))
    assert plant_hash(rebuilt) == plant_hash(sys)
    assert plant_hash(chain_of_integrators(3, d_max=0.2)) != plant_hash(sys)


def test_config_presets_and_errors():
    assert system_from_config({"preset": "integrator", "n": 4}).n == 4
    assert system_from_config({"preset": "lane_keeping", "r_d_max": 0.05}).n == 4
    with pytest.raises(ConfigError, match="known presets: integrator, lane_keeping"):
        system_from_config({"preset": "truck"})
    assert list_presets() == ["integrator", "lane_keeping"]
    plant = system_from_config({
        "A": [[0.0, 1.0], [0.0, 0.0]],
        "B": [0.0, 1.0],
        "D": {"polytope": Polytope.from_bounds([0.0, -0.1], [0.0, 0.1]).to_dict()},
        "S": Polytope.from_bounds([-1.0] * 3, [1.0] * 3).to_dict(),
    })
    assert plant.B.shape == (2, 1)
    assert plant.num_disturbances == 2
