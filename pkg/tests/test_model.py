import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from attractor_lab import discretization as disc
from attractor_lab.discretization import Field
from attractor_lab.errors import InvalidInputError
from attractor_lab.model import (
    ConstantDiffusion,
    Cubic,
    HomotopyDiffusion,
    Linear,
    ProblemSpec,
    SaturatingDiffusion,
    energy,
    potential_integral,
    reparam_rate,
    rhs_nonlocal,
    rhs_semilinear,
)

small_coeffs = arrays(np.float64, st.integers(1, 24),
                      elements=st.floats(-0.5, 0.5, allow_nan=False, allow_infinity=False))


def test_default_spec_satisfies_hypotheses():
    spec = ProblemSpec(10.0)
    assert spec.check_hypotheses() == []
    assert (spec.m, spec.M) == (1.0, 2.0)
    assert float(spec.a(0.0)) == 1.0


def test_linear_f_fails_concavity_and_dissipativity():
    bad = ProblemSpec(1.0, f=Linear()).check_hypotheses()
    assert "s f''(s) < 0 for s != 0" in bad
    assert "f(s)/s <= 0 for large |s|" in bad


def test_lambda_validation():
    with pytest.raises(InvalidInputError):
        ProblemSpec(-1.0)
    with pytest.raises(InvalidInputError):
        ProblemSpec(float("nan"))
    assert "lambda > 0" in ProblemSpec(0.0).check_hypotheses()


def test_diffusion_pieces():
    a = SaturatingDiffusion()
    s = np.linspace(0.1, 30, 300)
    assert np.all(np.diff(a(s)) > 0)
    h = 1e-6
    assert np.allclose((a(s + h) - a(s - h)) / (2 * h), a.derivative(s), atol=1e-8)
    for D in (0.0, 0.3, 2.5, 40.0):
        assert a.integral(D) == pytest.approx(a.primitive(D), abs=1e-11)
    c = ConstantDiffusion(1.5)
    assert c.integral(2.0) == 3.0 and c.bounds() == (1.5, 1.5)
    with pytest.raises(InvalidInputError):
        ConstantDiffusion(0.0)


def test_homotopy_endpoints():
    a = SaturatingDiffusion()
    s = np.linspace(0, 5, 11)
    assert np.array_equal(HomotopyDiffusion(a, 1.0, 2.0)(s), a(s))
    assert np.allclose(HomotopyDiffusion(a, 0.0, 2.0)(s), a(2.0))
    assert np.all(HomotopyDiffusion(a, 0.0, 2.0).derivative(s) == 0.0)
    with pytest.raises(InvalidInputError):
        HomotopyDiffusion(a, 1.5, 0.0)


def test_energy_closed_form_single_mode():
    spec = ProblemSpec(10.0)
    for A in (0.1, 0.5, 0.9):
        u = Field.mode(1, 16, A)
        D = math.pi * A * A / 2
        potential = A * A * math.pi / 4 - A ** 4 * 3 * math.pi / 32
        ref = 0.5 * (2 * D - math.log1p(D)) - 10.0 * potential
        assert energy(spec, u) == pytest.approx(ref, rel=1e-13, abs=1e-14)
        assert potential_integral(spec, u) == pytest.approx(potential, rel=1e-13)


@pytest.mark.parametrize("c", [0.1, 0.5, 1.0])
def test_energy_closed_form_constant_a(c):
    spec = ProblemSpec(10.0, a=ConstantDiffusion(1.0))
    ref = c * c * math.pi / 4 - 10.0 * (c * c * math.pi / 4 - 3 * c ** 4 * math.pi / 32)
    assert energy(spec, Field.mode(1, 8, c)) == pytest.approx(ref, abs=1e-10)


def test_energy_quad_route_agrees_with_primitive():
    u = Field([0.3, -0.2, 0.1, 0.05])
    spec = ProblemSpec(7.0)
    D = disc.h1_seminorm_sq(u)
    quad_route = 0.5 * spec.a.integral(D) - 7.0 * potential_integral(spec, u)
    assert energy(spec, u) == pytest.approx(quad_route, abs=1e-12)


def _fine_rhs(spec, u, P=4096):
    """Pointwise a(D) u'' + lam f(u) on a fine grid, projected."""
    x = disc.grid_nodes(P)
    k = disc.wavenumbers(u.K)
    S = np.sin(np.outer(x, k))
    uxx = S @ (-(k ** 2) * u.coeffs)
    vals = S @ u.coeffs
    D = disc.h1_seminorm_sq(u)
    return disc.analyze(float(spec.a(D)) * uxx + spec.lam * spec.f(vals), u.K)


def test_rhs_matches_fine_grid():
    rng = np.random.default_rng(1)
    spec = ProblemSpec(10.0)
    u = Field(rng.standard_normal(32) / np.arange(1, 33) ** 2)
    assert np.allclose(rhs_nonlocal(spec, u).coeffs, _fine_rhs(spec, u), atol=1e-11)


def test_semilinear_is_nonlocal_over_rate():
    rng = np.random.default_rng(2)
    spec = ProblemSpec(6.0)
    u = Field(rng.standard_normal(16) / np.arange(1, 17) ** 2)
    rate = reparam_rate(spec, u)
    assert np.allclose(rhs_semilinear(spec, u).coeffs * rate, rhs_nonlocal(spec, u).coeffs,
                       atol=1e-13)


def test_zero_is_stationary():
    spec = ProblemSpec(10.0)
    assert np.all(rhs_nonlocal(spec, Field.zeros(8)).coeffs == 0)
    assert energy(spec, Field.zeros(8)) == 0.0


@settings(max_examples=40, deadline=None)
@given(small_coeffs)
def test_flow_is_odd_and_energy_even(c):
    spec = ProblemSpec(10.0)
    u = Field(c)
    fwd = rhs_nonlocal(spec, u).coeffs
    scale = 1e-13 * (1.0 + np.abs(fwd).max())
    assert np.allclose(rhs_nonlocal(spec, -u).coeffs, -fwd, rtol=0, atol=scale)
    assert energy(spec, -u) == pytest.approx(energy(spec, u), rel=1e-13, abs=1e-15)
    assert np.isfinite(energy(spec, u))


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3, allow_nan=False))
def test_cubic_pieces(s):
    f = Cubic()
    h = 1e-6
    assert f.derivative(s) == pytest.approx((f(s + h) - f(s - h)) / (2 * h), abs=1e-6)
    assert f.second_derivative(s) == pytest.approx(-6 * s)
    assert f.primitive(s) == pytest.approx(s * s / 2 - s ** 4 / 4)
