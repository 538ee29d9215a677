import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attractor_lab import discretization as disc
from attractor_lab.discretization import Field
from attractor_lab.dynamics import (
    etdrk4_step,
    find_connections,
    integrate,
    invariant_mask,
    random_field,
    reclock_check,
    run_to_limit,
    step_nonlocal,
    step_semilinear,
)
from attractor_lab.errors import InvalidInputError, PreconditionError
from attractor_lab.model import ConstantDiffusion, Linear, ProblemSpec


def test_etdrk4_exact_for_constant_forcing():
    L = np.array([-1.0, -4.0, -25.0, 0.0])
    y0 = np.array([1.0, -2.0, 0.5, 3.0])
    c = np.array([0.3, 0.1, -1.0, 2.0])
    h = 0.7
    y = etdrk4_step(L, lambda z: c, y0, h)
    ref = np.exp(L * h) * y0 + np.where(L == 0, h, (np.exp(L * h) - 1) / np.where(L == 0, 1, L)) * c
    assert np.allclose(y, ref, atol=1e-13)


def test_zero_stays_fixed(spec10):
    u = Field.zeros(16)
    assert np.all(step_semilinear(spec10, u, 0.1).coeffs == 0)
    assert np.all(step_nonlocal(spec10, u, 0.1).coeffs == 0)
    with pytest.raises(InvalidInputError):
        step_semilinear(spec10, u, 0.0)


def test_heat_kernel():
    spec = ProblemSpec(0.0, f=Linear(), a=ConstantDiffusion(1.0))
    u0 = Field([1.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.2])
    for form in ("semilinear", "nonlocal"):
        out = integrate(spec, u0, 1.0, form, stops=[0.5])
        k = np.arange(1, 9)
        for t, c in zip(out.times, out.coeffs):
            assert np.allclose(c, np.exp(-k ** 2 * t) * u0.coeffs, atol=1e-10)


@pytest.mark.parametrize("form", ["semilinear", "nonlocal"])
@pytest.mark.parametrize("label", [(1, "+"), (2, "-"), (3, "+")])
def test_equilibria_do_not_drift(spec10, by_label, form, label):
    phi = by_label[label].profile
    out = integrate(spec10, phi, 10.0, form)
    drift = max(disc.coeff_h1_norm(c - phi.coeffs) for c in out.coeffs)
    assert drift < 1e-8


def test_constant_a_forms_coincide(const_spec10):
    u0 = Field.mode(1, 16, 0.2) + Field.mode(2, 16, 0.1)
    a = integrate(const_spec10, u0, 2.0, "semilinear", stops=[1.0])
    b = integrate(const_spec10, u0, 2.0, "nonlocal", stops=[1.0])
    assert a.times == b.times
    assert max(np.max(np.abs(x - y)) for x, y in zip(a.coeffs, b.coeffs)) < 1e-12
    assert b.clock[-1] == pytest.approx(2.0, abs=1e-12)


def test_reclocking(spec10):
    rng = np.random.default_rng(0)
    gap, rows = reclock_check(spec10, random_field(rng, 32), T=2.0)
    assert gap < 1e-5
    ts, alphas = [r[0] for r in rows], [r[1] for r in rows]
    # the clock runs at a(D) in [1, 2]
    assert all(t <= a <= 2 * t + 1e-12 for t, a in zip(ts, alphas))


@pytest.mark.parametrize("sign", ["+", "-"])
def test_small_data_goes_to_first_branch(spec10, eqs10, sign):
    s = 1.0 if sign == "+" else -1.0
    out = run_to_limit(spec10, Field.mode(1, 64, 0.01 * s), eqs10)
    assert out.terminal == (1, sign)
    assert out.max_energy_increase() <= 1e-10
    assert out.lap_increases() == 0


def test_perturbed_equilibrium_returns(spec10, by_label, eqs10):
    phi = by_label[(2, "+")].profile
    u0 = phi + Field.mode(2, 64, 1e-3)
    assert run_to_limit(spec10, u0, eqs10).terminal == (2, "+")


def test_sink_has_nothing_to_search(spec10, by_label, eqs10):
    with pytest.raises(PreconditionError):
        find_connections(spec10, by_label[(1, "+")], eqs10)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_flow_commutes_with_sign_flip(seed):
    spec = ProblemSpec(10.0)
    u0 = random_field(np.random.default_rng(seed), 16)
    a = integrate(spec, u0, 0.5, "nonlocal")
    b = integrate(spec, -u0, 0.5, "nonlocal")
    # step sequences may split at round-off level; compare at the common end time
    assert a.times[-1] == b.times[-1] == 0.5
    assert disc.coeff_h1_norm(a.coeffs[-1] + b.coeffs[-1]) < 1e-7
    assert a.energies[-1] == pytest.approx(b.energies[-1], abs=1e-7)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_energy_and_lap_number_never_increase(seed):
    spec = ProblemSpec(10.0)
    u0 = random_field(np.random.default_rng(seed), 32, scale=2.0)
    out = integrate(spec, u0, 3.0, "semilinear")
    assert out.max_energy_increase() <= 1e-10
    assert out.lap_increases() == 0


def test_invariant_mask(spec10):
    c = np.zeros(12)
    c[2] = 1.0
    m = invariant_mask(spec10, c)
    assert list(np.flatnonzero(m) + 1) == [3, 9]
    c[8] = 0.1
    assert list(np.flatnonzero(invariant_mask(spec10, c)) + 1) == [3, 9]
    c[5] = 0.1
    assert list(np.flatnonzero(invariant_mask(spec10, c)) + 1) == [3, 6, 9, 12]
    c[0] = 0.1
    assert invariant_mask(spec10, c) is None
    assert invariant_mask(spec10, np.zeros(4)) is None


def test_integrate_rejects_bad_input(spec10):
    with pytest.raises(InvalidInputError):
        integrate(spec10, Field.zeros(4), 0.0)
    with pytest.raises(InvalidInputError):
        integrate(spec10, Field.mode(1, 4), 1.0, form="implicit")


def test_stop_times_are_logged(spec10):
    out = integrate(spec10, Field.mode(1, 16, 0.1), 1.0, stops=[0.25, 0.5, 2.0, -1.0])
    for t in (0.0, 0.25, 0.5, 1.0):
        assert any(math.isclose(s, t, abs_tol=0) for s in out.times)
    assert out.times[-1] == 1.0
