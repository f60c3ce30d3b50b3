#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Tests for H-representation polytope arithmetic."""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polytope import (Box, Polytope, bounding_box, chebyshev_center, contains, fiber,
                      fm_row_cap, hit_and_run, intersect, is_empty, lp_solve, project,
                      remove_redundancy, vertices, EPS_FEAS)
from rcis_errors import (DimensionMismatch, DimensionTooHigh, EmptyPolytope, ExplosionLimit,
                         RcisError, UnboundedDirection)


def random_polytope(rng, dim, rows):
    """Random bounded polytope containing the origin."""
    G = rng.standard_normal((rows, dim))
    h = rng.uniform(0.5, 1.5, rows)
    box = Polytope.from_bounds(-3 * np.ones(dim), 3 * np.ones(dim))
    return intersect(Polytope(G, h), box)


def completion_feasible(poly, keep, y):
    return not is_empty(fiber(poly, keep, y))


# --- emptiness and containment -------------------------------------------------

def test_whole_space_is_not_empty():
    assert not is_empty(Polytope.universe(2))


def test_contradictory_interval_is_empty():
    assert is_empty(Polytope([[1.0], [-1.0]], [-1.0, -1.0]))
    assert is_empty(Polytope.empty(3))


def test_square_containment(unit_square):
    big = Polytope.from_bounds([-2.0, -2.0], [2.0, 2.0])
    assert contains(big, unit_square)
    assert not contains(unit_square, big)


def test_contains_half_space_is_false(unit_square):
    assert not contains(unit_square, Polytope([[1.0, 0.0]], [0.5]))


def test_empty_set_is_contained_everywhere(unit_square):
    assert contains(unit_square, Polytope.empty(2))


def test_contains_requires_equal_dims(unit_square):
    with pytest.raises(DimensionMismatch):
        contains(unit_square, Polytope.from_bounds([0.0], [1.0]))


# --- projection ---------------------------------------------------------------

@pytest.mark.parametrize("method", ["fm", "iterhull", "auto"])
def test_project_square_onto_axis(unit_square, method):
    interval = project(unit_square, [0], method=method)
    assert interval.dim == 1
    assert contains(interval, Polytope.from_bounds([0.0], [1.0]))
    assert contains(Polytope.from_bounds([0.0], [1.0]), interval)


def test_project_diagonal_segment():
    # {(x, t) : x = t, 0 <= t <= 1}
    poly = Polytope([[1.0, -1.0], [-1.0, 1.0], [0.0, 1.0], [0.0, -1.0]], [0.0, 0.0, 1.0, 0.0])
    seg = project(poly, [0], method="fm")
    ref = Polytope.from_bounds([0.0], [1.0])
    assert contains(seg, ref) and contains(ref, seg)


def test_project_keeps_requested_order():
    poly = Polytope.from_bounds([0.0, 10.0, -5.0], [1.0, 20.0, 5.0])
    out = project(poly, [1, 0], method="fm")
    ref = Polytope.from_bounds([10.0, 0.0], [20.0, 1.0])
    assert contains(out, ref) and contains(ref, out)


def test_project_empty_stays_empty():
    assert is_empty(project(Polytope.empty(3), [0, 2]))


def test_fm_row_cap_is_enforced(rng):
    poly = random_polytope(rng, 4, 40)
    with pytest.raises(ExplosionLimit):
        project(poly, [0], method="fm", row_cap=5)


def test_row_cap_environment_override(monkeypatch):
    monkeypatch.setenv("RCIS_ROW_CAP", "1234")
    assert fm_row_cap() == 1234
    monkeypatch.delenv("RCIS_ROW_CAP")
    assert fm_row_cap() == 100_000


@pytest.mark.parametrize("method", ["fm", "iterhull"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_projection_sound_and_complete_on_samples(seed, method):
    rng = np.random.default_rng(seed)
    dim = 4 + seed % 3
    poly = random_polytope(rng, dim, 12)
    keep = [0, 1]
    proj = project(poly, keep, method=method)
    box = bounding_box(proj)
    samples = box.sample(300, rng)
    inside = proj.contains_points(samples, tol=-1e-7)
    outside_far = ~proj.contains_points(samples, tol=1e-6)
    for y, is_in, is_out in zip(samples, inside, outside_far):
        if is_in:
            assert completion_feasible(poly, keep, y)
        elif is_out:
            assert not completion_feasible(poly, keep, y)


def test_fm_and_iterhull_agree(rng):
    poly = random_polytope(rng, 5, 15)
    a = project(poly, [0, 2], method="fm")
    b = project(poly, [0, 2], method="iterhull")
    assert contains(a, b, tol=1e-6) and contains(b, a, tol=1e-6)


# --- redundancy ---------------------------------------------------------------

def test_redundant_bound_is_dropped():
    out = remove_redundancy(Polytope([[1.0], [1.0]], [1.0, 2.0]))
    assert out.n_rows == 1
    assert out.h[0] == pytest.approx(1.0)


def test_duplicate_rows_collapse(unit_square):
    doubled = intersect(unit_square, unit_square)
    assert remove_redundancy(doubled).n_rows == 4


def test_scaled_duplicates_collapse():
    poly = Polytope([[1.0, 0.0], [2.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
                    [1.0, 2.0, 0.0, 1.0, 0.0])
    assert remove_redundancy(poly).n_rows == 4


def test_redundancy_of_empty_polytope():
    out = remove_redundancy(Polytope([[1.0], [-1.0], [1.0]], [-1.0, -1.0, 5.0]))
    assert is_empty(out)


def test_redundancy_on_unbounded_polytope():
    poly = Polytope([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [1.0, 3.0, 2.0])
    out = remove_redundancy(poly)
    assert out.n_rows == 2


def test_redundancy_on_flat_polytope():
    # segment {x2 = 0, 0 <= x1 <= 1} plus a redundant x1 <= 5
    poly = Polytope([[0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]],
                    [0.0, 0.0, 1.0, 0.0, 5.0])
    out = remove_redundancy(poly)
    assert out.n_rows == 4


def test_redundancy_preserves_membership(rng):
    dim = 3
    G = rng.standard_normal((60, dim))
    h = rng.uniform(0.5, 1.5, 60)
    poly = Polytope(G, h)
    reduced = remove_redundancy(poly)
    assert reduced.n_rows < poly.n_rows
    samples = rng.uniform(-2.0, 2.0, size=(10_000, dim))
    before = poly.contains_points(samples, tol=0.0)
    after = reduced.contains_points(samples, tol=1e-9)
    # points within 1e-9 of the boundary may flip; none should further away
    margin = np.min((h - samples @ G.T) / np.linalg.norm(G, axis=1), axis=1)
    clear = np.abs(margin) > 1e-7
    assert np.array_equal(before[clear], after[clear])


def test_retained_rows_are_certified(rng):
    poly = random_polytope(rng, 3, 30)
    reduced = remove_redundancy(poly)
    for i in range(reduced.n_rows):
        others = [j for j in range(reduced.n_rows) if j != i]
        relaxed = Polytope(np.vstack([reduced.G[others], reduced.G[i:i + 1]]),
                           np.concatenate([reduced.h[others], [reduced.h[i] + 1.0]]))
        res = lp_solve(reduced.G[i], "max", relaxed)
        assert res.objective > reduced.h[i] + 1e-8


# --- bounding boxes, intersection, vertices -----------------------------------

def test_bounding_box_unit_square(unit_square):
    box = bounding_box(unit_square, margin=1.0)
    np.testing.assert_allclose(box.lower, [0.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(box.upper, [1.0, 1.0], atol=1e-9)


def test_bounding_box_rotated_square():
    G = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    box = bounding_box(Polytope(G, np.ones(4)), margin=1.0)
    np.testing.assert_allclose(box.lower, [-1.0, -1.0], atol=1e-9)
    np.testing.assert_allclose(box.upper, [1.0, 1.0], atol=1e-9)


def test_bounding_box_margin_inflates(unit_square):
    box = bounding_box(unit_square)
    assert np.all(box.lower < 0.0) and np.all(box.upper > 1.0)
    assert np.all(box.upper - 1.0 < 1e-5)


def test_bounding_box_of_empty_polytope_raises():
    empty = Polytope([[1.0], [-1.0]], [-1.0, -1.0])
    with pytest.raises(EmptyPolytope) as info:
        bounding_box(empty)
    assert isinstance(info.value, RcisError)
    assert info.value.exit_code == 6


def test_bounding_box_half_space_raises():
    with pytest.raises(UnboundedDirection) as info:
        bounding_box(Polytope([[0.0, 1.0], [0.0, -1.0], [1.0, 0.0]], [1.0, 1.0, 0.0]))
    assert info.value.coordinate == 0


def test_interval_intersection():
    a = Polytope.from_bounds([0.0], [2.0])
    b = Polytope.from_bounds([1.0], [3.0])
    ab = intersect(a, b)
    ref = Polytope.from_bounds([1.0], [2.0])
    assert contains(ab, ref) and contains(ref, ab)


def test_intersect_with_universe(unit_square):
    both = intersect(unit_square, Polytope.universe(2))
    assert both.n_rows == unit_square.n_rows


def test_intersection_membership_matches_conjunction(rng):
    a = random_polytope(rng, 2, 8)
    b = Polytope.from_bounds([-0.5, -0.2], [0.7, 0.9])
    ab = intersect(a, b)
    X = rng.uniform(-3, 3, size=(1000, 2))
    np.testing.assert_array_equal(ab.contains_points(X),
                                  a.contains_points(X) & b.contains_points(X))


def test_vertices_of_interval():
    vs = vertices(Polytope.from_bounds([-0.1], [0.1]))
    np.testing.assert_allclose(np.vstack(vs).ravel(), [-0.1, 0.1])


def test_vertices_of_square(unit_square):
    assert len(vertices(unit_square)) == 4


def test_vertices_of_simplex():
    G = np.vstack([-np.eye(3), np.ones((1, 3))])
    vs = vertices(Polytope(G, [0.0, 0.0, 0.0, 1.0]))
    assert len(vs) == 4
    for v in vs:
        active = np.sum(np.abs(G @ v - np.array([0.0, 0.0, 0.0, 1.0])) <= 1e-7)
        assert active >= 3


def test_vertices_rejects_high_dimension():
    with pytest.raises(DimensionTooHigh):
        vertices(Polytope.from_bounds(np.zeros(5), np.ones(5)))


def test_vertices_rejects_unbounded():
    with pytest.raises(UnboundedDirection):
        vertices(Polytope([[1.0, 0.0]], [1.0]))


def test_vertex_hull_equals_polytope(rng):
    poly = random_polytope(rng, 2, 7)
    vs = np.vstack(vertices(poly))
    from scipy.spatial import Delaunay
    tri = Delaunay(vs)
    X = bounding_box(poly).sample(2000, rng)
    in_hull = tri.find_simplex(X, tol=1e-12) >= 0
    margin = np.min((poly.h - X @ poly.G.T) / np.linalg.norm(poly.G, axis=1), axis=1)
    clear = np.abs(margin) > 1e-6
    np.testing.assert_array_equal(in_hull[clear], poly.contains_points(X)[clear])


# --- misc helpers -------------------------------------------------------------

def test_json_round_trip_preserves_membership(rng):
    poly = random_polytope(rng, 3, 10)
    again = Polytope.from_dict(json.loads(json.dumps(poly.to_dict())))
    X = rng.uniform(-3, 3, size=(500, 3))
    np.testing.assert_array_equal(poly.contains_points(X), again.contains_points(X))
    assert Polytope.from_dict(Polytope.universe(2).to_dict()).dim == 2


def test_polytope_validates_shapes():
    with pytest.raises(DimensionMismatch):
        Polytope([[1.0, 0.0]], [1.0, 2.0])
    with pytest.raises(ValueError):
        Polytope([[np.nan]], [1.0])


def test_polytope_is_immutable(unit_square):
    with pytest.raises(AttributeError):
        unit_square.h = np.zeros(4)
    with pytest.raises(ValueError):
        unit_square.G[0, 0] = 5.0


def test_chebyshev_center_of_square(unit_square):
    center, radius = chebyshev_center(unit_square)
    np.testing.assert_allclose(center, [0.5, 0.5], atol=1e-9)
    assert radius == pytest.approx(0.5)
    assert chebyshev_center(Polytope.empty(2))[0] is None


def test_hit_and_run_stays_inside(rng):
    poly = random_polytope(rng, 3, 10)
    X = hit_and_run(poly, 500, rng)
    assert X.shape == (500, 3)
    assert np.all(poly.contains_points(X, tol=1e-9))


def test_box_helpers():
    a = Box([0.0, 0.0], [1.0, 2.0])
    b = Box([-1.0, 1.0], [0.5, 3.0])
    assert a.volume == pytest.approx(2.0)
    hull = a.hull(b)
    np.testing.assert_allclose(hull.lower, [-1.0, 0.0])
    np.testing.assert_allclose(hull.upper, [1.0, 3.0])
    assert a.to_polytope().contains_point([0.5, 1.5])
    with pytest.raises(ValueError):
        Box([1.0], [0.0])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=5000))
def test_mutual_containment_matches_sampled_membership(seed):
    rng = np.random.default_rng(seed)
    a = random_polytope(rng, 2, 6)
    b = remove_redundancy(intersect(a, Polytope.from_bounds([-10, -10], [10, 10])))
    assert contains(a, b) and contains(b, a)
    X = rng.uniform(-3.5, 3.5, size=(400, 2))
    margin = np.min((a.h - X @ a.G.T) / np.linalg.norm(a.G, axis=1), axis=1)
    clear = np.abs(margin) > 1e-6
    np.testing.assert_array_equal(a.contains_points(X)[clear], b.contains_points(X)[clear])
    assert EPS_FEAS == 1e-7
