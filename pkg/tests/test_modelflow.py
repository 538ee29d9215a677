import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from attractor_lab.errors import InvalidInputError, SizeMismatchError
from attractor_lab.modelflow import (
    ModelState,
    conjugacy_graph_check,
    model_connection_search,
    model_equilibria,
    model_rhs,
    q_diag,
    simulate,
)
from attractor_lab.morse import ConnectionGraph, predicted_graph

import oracles


def test_rhs_example():
    th = np.array([1.0, 1.0]) / math.sqrt(2)
    dth, dr = model_rhs(ModelState(th, 0.5))
    assert np.allclose(dth, np.array([0.25, -0.25]) / math.sqrt(2), atol=1e-15)
    assert dr == 0.25


def test_rhs_matches_projected_gradient():
    # angular part is the sphere gradient of 1/2 <Q theta, theta>
    rng = np.random.default_rng(1)
    n = 4
    th = rng.standard_normal(n)
    th /= np.linalg.norm(th)
    h = 1e-6
    R = lambda v: 0.5 * float(q_diag(n) * (v / np.linalg.norm(v)) @ (v / np.linalg.norm(v)))  # noqa: E731
    grad = np.array([(R(th + h * e) - R(th - h * e)) / (2 * h) for e in np.eye(n)])
    dth, _ = model_rhs(ModelState(th, 0.3))
    assert np.allclose(dth, grad, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 5, elements=st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 0.1),
       st.floats(0.0, 1.0))
def test_rhs_tangent_to_sphere(v, r):
    th = v / np.linalg.norm(v)
    dth, dr = model_rhs(ModelState(th, r))
    assert abs(dth @ th) < 1e-14
    assert dr >= 0.0


def test_state_validation():
    with pytest.raises(InvalidInputError):
        ModelState([1.0, 1.0], 0.5)
    with pytest.raises(InvalidInputError):
        ModelState([1.0, 0.0], 1.5)
    with pytest.raises(SizeMismatchError):
        model_rhs(ModelState([1.0, 0.0], 0.5), 3)
    assert model_rhs(ModelState([1.0, 1.0], 0.0))[1] == 0.0


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_equilibria(n):
    eqs = model_equilibria(n)
    assert len(eqs) == 2 * n + 1
    for st_ in eqs.values():
        dth, dr = model_rhs(st_)
        assert np.all(dth == 0) and dr == 0


def test_flow_matches_closed_form():
    rng = np.random.default_rng(3)
    n = 3
    th0 = rng.standard_normal((4, n))
    th0 /= np.linalg.norm(th0, axis=1, keepdims=True)
    r0 = np.array([0.1, 0.5, 0.9, 0.01])
    run = simulate(th0, r0, n, T=5.0, capture=0.0, keep_every=1)
    assert run.times[-1] == pytest.approx(5.0)
    for k in range(4):
        assert run.radius[-1, k] == pytest.approx(oracles.logistic(r0[k], 5.0), abs=1e-9)
    # final angle from the matrix exponential
    fin = simulate(th0, r0, n, T=5.0, capture=0.0)
    th_ref = np.array([oracles.model_theta(t, 5.0, n) for t in th0])
    assert np.allclose(fin.r_final, [oracles.logistic(r, 5.0) for r in r0], atol=1e-9)
    ray_ref = np.sum(q_diag(n) * th_ref ** 2, axis=1)
    assert np.allclose(run.rayleigh[-1], ray_ref, atol=1e-9)


def test_unit_norm_rayleigh_and_radius_monotone():
    rng = np.random.default_rng(4)
    n = 4
    th0 = rng.standard_normal((8, n))
    run = simulate(th0, rng.uniform(0.01, 0.99, 8), n, T=100.0, capture=0.0)
    assert run.unit_defect < 1e-10
    assert np.all(np.diff(run.rayleigh, axis=0) >= -1e-12)
    assert np.all(np.diff(run.radius, axis=0) >= 0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_connection_graph_matches_prediction(n):
    s = model_connection_search(n)
    assert s.unresolved == 0
    assert s.graph == predicted_graph(n)
    rep = conjugacy_graph_check(predicted_graph(n), s.graph, n)
    assert rep.equal and rep.first_offending is None


def test_conjugacy_reports_first_offending_edge():
    full = predicted_graph(2)
    drop = sorted(full.edges)[3]
    rep = conjugacy_graph_check(full, ConnectionGraph(2, full.edges - {drop}), 2)
    assert not rep.equal and rep.missing == [drop] and rep.first_offending == drop
    assert rep.to_dict()["first_offending_edge"] == [str(drop[0]), str(drop[1])]
    with pytest.raises(SizeMismatchError):
        conjugacy_graph_check(predicted_graph(2), predicted_graph(3), 3)


def test_search_validation():
    with pytest.raises(InvalidInputError):
        model_connection_search(0)
