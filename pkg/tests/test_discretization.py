import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from attractor_lab import discretization as disc
from attractor_lab.discretization import Field, GridSample
from attractor_lab.errors import DegenerateFieldError, InvalidInputError, ResolutionError

coeffs = arrays(np.float64, st.integers(1, 40),
                elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False))


def test_field_is_immutable_and_finite():
    u = Field([1.0, 2.0])
    with pytest.raises(ValueError):
        u.coeffs[0] = 3.0
    with pytest.raises(InvalidInputError):
        Field([1.0, np.nan])
    with pytest.raises(InvalidInputError):
        Field([])


def test_mode_and_resize():
    u = Field.mode(3, 8, 2.0)
    assert u.coeffs[2] == 2.0 and u.K == 8
    assert u.resized(2).K == 2 and np.all(u.resized(2).coeffs == 0)
    assert np.array_equal(u.resized(16).coeffs[:8], u.coeffs)


def test_arithmetic_and_roundtrip_dict():
    u, v = Field([1.0, 2.0]), Field([0.5, -1.0])
    assert np.allclose((u + v).coeffs, [1.5, 1.0])
    assert np.allclose((u - v).coeffs, [0.5, 3.0])
    assert np.allclose((2 * u).coeffs, [2.0, 4.0])
    assert np.array_equal(Field.from_dict(u.to_dict()).coeffs, u.coeffs)
    with pytest.raises(InvalidInputError):
        Field.from_dict({"K": 3, "coeffs": [1.0]})


@settings(max_examples=50, deadline=None)
@given(coeffs)
def test_grid_roundtrip(c):
    K = c.size
    for P in (K, 2 * K, 4 * K + 3):
        back = disc.analyze(disc.synthesize(c, P), K)
        assert np.allclose(back, c, atol=1e-12 * (1 + np.abs(c).max()))


def test_synthesize_matches_pointwise_sum():
    c = np.array([0.3, -1.2, 0.7, 0.05])
    P = 17
    x = disc.grid_nodes(P)
    direct = np.sin(np.outer(x, np.arange(1, 5))) @ c
    assert np.allclose(disc.synthesize(c, P), direct, atol=1e-14)
    assert np.allclose(disc.to_grid(Field(c), P).values, direct)
    assert np.allclose(disc.evaluate(Field(c), x), direct)
    g = GridSample(direct)
    assert g.P == P and np.allclose(disc.from_grid(g, 4).coeffs, c)


def test_coarse_grid_rejected():
    with pytest.raises(ResolutionError):
        disc.synthesize(np.ones(8), 4)
    with pytest.raises(ResolutionError):
        disc.analyze(np.ones(4), 8)


def test_norms_against_quadrature():
    u = Field([0.4, -0.3, 0.2, 0.1])
    l2, _ = integrate.quad(lambda x: disc.evaluate(u, x) ** 2, 0, math.pi)
    k = np.arange(1, 5)
    dudx = lambda x: np.cos(np.outer(x, k)) @ (k * u.coeffs)  # noqa: E731
    h1, _ = integrate.quad(lambda x: float(dudx(np.array([x]))[0] ** 2), 0, math.pi)
    assert disc.l2_norm_sq(u) == pytest.approx(l2, rel=1e-12)
    assert disc.h1_seminorm_sq(u) == pytest.approx(h1, rel=1e-12)
    assert disc.h1_norm(u) == pytest.approx(math.sqrt(h1), rel=1e-12)
    assert disc.inner(u, u) == pytest.approx(l2, rel=1e-12)
    assert disc.coeff_h1_norm(u.coeffs) == pytest.approx(math.sqrt(h1), rel=1e-12)
    assert disc.h1_distance(u, u.resized(10)) == 0.0


def test_second_derivative():
    u = Field([1.0, 1.0, 1.0])
    assert np.allclose(disc.second_derivative(u).coeffs, [-1.0, -4.0, -9.0])


def test_grid_integral_exact_for_low_cosines():
    P = 31
    x = disc.grid_nodes(P)
    for m in range(0, 2 * (P + 1) - 1, 2):
        exact = math.pi if m == 0 else 0.0
        # 1 - cos(mx) vanishes at both ends when m is even
        assert disc.grid_integral(1.0 - np.cos(m * x)) == pytest.approx(math.pi - exact, abs=1e-12)


def test_dealiased_cubic_is_exact():
    rng = np.random.default_rng(3)
    K = 12
    c = rng.standard_normal(K) / np.arange(1, K + 1) ** 2
    P = disc.dealiased_size(K)
    coarse = disc.analyze(disc.synthesize(c, P) ** 3, K)
    fine = disc.analyze(disc.synthesize(c, 16 * K) ** 3, K)
    assert np.allclose(coarse, fine, atol=1e-14)
    # the 3/2 rule grid aliases the cubic back into the retained modes
    short = disc.analyze(disc.synthesize(c, 3 * K // 2) ** 3, K)
    assert np.max(np.abs(short - fine)) > 1e-8


@pytest.mark.parametrize("k", [1, 2, 5, 9])
def test_lap_number_of_modes(k):
    assert disc.lap_number(Field.mode(k, 16)) == k - 1


def test_lap_number_guards():
    with pytest.raises(ResolutionError):
        disc.lap_number(Field.mode(1, 16), P=32)
    with pytest.raises(DegenerateFieldError):
        disc.lap_number(Field.zeros(8))


def test_count_sign_changes_skips_tiny_values():
    assert disc.count_sign_changes(np.array([1.0, 1e-12, -1.0, -2.0, 3.0])) == 2
    assert disc.count_sign_changes(np.array([1e-12])) == 0


def test_project_recovers_modes():
    u = disc.project(lambda x: 2.0 * np.sin(x) - 0.5 * np.sin(4 * x), 8)
    assert np.allclose(u.coeffs, [2.0, 0, 0, -0.5, 0, 0, 0, 0], atol=1e-14)


def test_multiplier_matrix_against_quadrature():
    K = 6
    g = lambda x: 1.0 + 0.3 * np.cos(2 * x) - 0.2 * np.cos(4 * x)  # noqa: E731
    M = disc.multiplier_matrix(g(disc.grid_nodes(2 * K)), K)
    for k in range(1, K + 1):
        for m in range(1, K + 1):
            ref, _ = integrate.quad(lambda x: g(x) * math.sin(k * x) * math.sin(m * x), 0, math.pi)
            assert M[k - 1, m - 1] == pytest.approx(2 / math.pi * ref, abs=1e-13)
    assert np.allclose(M, M.T, atol=1e-14)
    S = disc.sine_matrix(2 * K, K)
    with pytest.raises(ValueError):
        S[0, 0] = 1.0
