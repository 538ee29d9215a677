"""Problem data (lambda, f, a), both right-hand sides, energy and clock rate.

The nonlocal form is ``u_t = a(|u_x|^2) u_xx + lam f(u)``; dividing by the
diffusion coefficient gives the semilinear form
``u_t = u_xx + lam f(u) / a(|u_x|^2)`` with the same orbits.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import discretization as disc
from .discretization import Field
from .errors import InvalidInputError

QUAD_TOL = 1e-12


# -- nonlinearities -----------------------------------------------------------

class Nonlinearity:
    name = "nonlinearity"

    def __eq__(self, other):
        return type(self) is type(other)

    def __hash__(self):
        return hash(type(self).__name__)

    def __repr__(self):
        return f"{type(self).__name__}()"


class Cubic(Nonlinearity):
    """``f(s) = s - s^3``."""

    name = "cubic"
    odd = True
    positive_zero = 1.0  # f(1) = 0 bounds the positive solutions
    dissipative_threshold = 1.0

    def __call__(self, s):
        return s - s ** 3

    def derivative(self, s):
        return 1.0 - 3.0 * s ** 2

    def second_derivative(self, s):
        return -6.0 * s

    def primitive(self, s):
        s2 = s * s
        return 0.5 * s2 - 0.25 * s2 * s2


class Linear(Nonlinearity):
    """``f(s) = s``; violates the concavity hypothesis, used for closed-form checks."""

    name = "linear"
    odd = True
    positive_zero = None
    dissipative_threshold = None

    def __call__(self, s):
        return s

    def derivative(self, s):
        return np.ones_like(s)

    def second_derivative(self, s):
        return np.zeros_like(s)

    def primitive(self, s):
        return 0.5 * s * s


# -- diffusion coefficients ---------------------------------------------------

class Diffusion:
    """Base class for ``a: [0, inf) -> [m, M]``."""

    name = "diffusion"
    monotone = True
    breakpoints: tuple = ()

    def __call__(self, s):
        raise NotImplementedError

    def derivative(self, s):
        raise NotImplementedError

    def bounds(self) -> tuple[float, float]:
        raise NotImplementedError

    def primitive(self, D: float) -> float | None:
        """Closed form of the integral of ``a`` over ``[0, D]`` if one is known."""
        return None

    def integral(self, D: float) -> float:
        pts = [p for p in self.breakpoints if 0.0 < p < D] or None
        val, _ = integrate.quad(self, 0.0, D, points=pts, epsabs=QUAD_TOL,
                                epsrel=QUAD_TOL, limit=200)
        return float(val)


class ConstantDiffusion(Diffusion):
    name = "constant"

    def __init__(self, value: float = 1.0):
        if not value > 0:
            raise InvalidInputError("constant diffusion must be positive")
        self.value = float(value)

    def __call__(self, s):
        return self.value + 0.0 * np.asarray(s, dtype=float)

    def derivative(self, s):
        return 0.0 * np.asarray(s, dtype=float)

    def bounds(self):
        return self.value, self.value

    def primitive(self, D):
        return self.value * D

    def integral(self, D):
        # exact; quad on a constant is the same number with extra cost
        return self.value * D


class SaturatingDiffusion(Diffusion):
    """``a(s) = 1 + s/(1+s)``: increasing, Lipschitz constant 1, values in [1, 2)."""

    name = "default"

    def __call__(self, s):
        return 1.0 + s / (1.0 + s)

    def derivative(self, s):
        return 1.0 / (1.0 + s) ** 2

    def bounds(self):
        return 1.0, 2.0

    def primitive(self, D):
        return 2.0 * D - np.log1p(D)


class HomotopyDiffusion(Diffusion):
    """``a_tau(s) = a(tau*s + (1 - tau)*anchor)``."""

    name = "homotopy"

    def __init__(self, base: Diffusion, tau: float, anchor: float):
        if not 0.0 <= tau <= 1.0:
            raise InvalidInputError("tau must lie in [0, 1]")
        self.base = base
        self.tau = float(tau)
        self.anchor = float(anchor)
        self.monotone = base.monotone

    def _arg(self, s):
        return self.tau * np.asarray(s, dtype=float) + (1.0 - self.tau) * self.anchor

    def __call__(self, s):
        return self.base(self._arg(s))

    def derivative(self, s):
        return self.tau * self.base.derivative(self._arg(s))

    def bounds(self):
        return self.base.bounds()


# -- problem ------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    lam: float
    f: object = field(default_factory=Cubic)
    a: Diffusion = field(default_factory=SaturatingDiffusion)

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise InvalidInputError("lambda must be a finite nonnegative number")

    @property
    def m(self) -> float:
        return self.a.bounds()[0]

    @property
    def M(self) -> float:
        return self.a.bounds()[1]

    def with_diffusion(self, a: Diffusion) -> ProblemSpec:
        return ProblemSpec(self.lam, self.f, a)

    def with_lambda(self, lam: float) -> ProblemSpec:
        return ProblemSpec(lam, self.f, self.a)

    def check_hypotheses(self, s_max: float = 50.0, n: int = 2001) -> list[str]:
        """Sampled check of the standing hypotheses; returns the violated ones."""
        bad = []
        s = np.linspace(0.0, s_max, n)
        av = np.asarray(self.a(s), dtype=float)
        m, M = self.a.bounds()
        if not self.lam > 0:
            bad.append("lambda > 0")
        if not (m > 0 and np.all(av >= m - 1e-14) and np.all(av <= M + 1e-14)):
            bad.append("0 < m <= a <= M")
        if self.a.monotone and np.any(np.diff(av) < -1e-14):
            bad.append("a non-decreasing")
        f = self.f
        t = np.linspace(-5.0, 5.0, 2001)
        nz = t[t != 0.0]
        if abs(f(0.0)) > 1e-14:
            bad.append("f(0) = 0")
        if abs(f.derivative(0.0) - 1.0) > 1e-14:
            bad.append("f'(0) = 1")
        if not np.all(nz * f.second_derivative(nz) < 0):
            bad.append("s f''(s) < 0 for s != 0")
        if np.max(np.abs(f(-t) + f(t))) > 1e-12:
            bad.append("f odd")
        thr = f.dissipative_threshold
        far = t[np.abs(t) >= thr] if thr is not None else np.array([])
        if thr is None or np.any(f(far) / far > 0):
            bad.append("f(s)/s <= 0 for large |s|")
        return bad


def _check(u: Field):
    if not np.all(np.isfinite(u.coeffs)):
        raise InvalidInputError("non-finite coefficients")


def nonlinear_coeffs(spec: ProblemSpec, c: np.ndarray, P: int | None = None) -> np.ndarray:
    """Dealiased Galerkin coefficients of ``f(u)``."""
    K = c.shape[-1]
    P = P or disc.dealiased_size(K)
    return disc.analyze(spec.f(disc.synthesize(c, P)), K)


def rhs_nonlocal(spec: ProblemSpec, u: Field) -> Field:
    _check(u)
    k2 = disc.wavenumbers(u.K) ** 2
    D = disc.h1_seminorm_sq(u)
    return Field(-spec.a(D) * k2 * u.coeffs + spec.lam * nonlinear_coeffs(spec, u.coeffs))


def rhs_semilinear(spec: ProblemSpec, u: Field) -> Field:
    _check(u)
    k2 = disc.wavenumbers(u.K) ** 2
    D = disc.h1_seminorm_sq(u)
    return Field(-k2 * u.coeffs + spec.lam * nonlinear_coeffs(spec, u.coeffs) / spec.a(D))


def reparam_rate(spec: ProblemSpec, u: Field) -> float:
    """Clock rate ``a(|u_x|^2)`` linking semilinear time to nonlocal time."""
    return float(spec.a(disc.h1_seminorm_sq(u)))


def potential_integral(spec: ProblemSpec, u: Field, P: int | None = None) -> float:
    """Integral over (0, pi) of ``F(u)``, ``F`` the primitive of ``f``.

    For the cubic the integrand has cosine modes up to 4K, which the
    trapezoid rule on ``P = 2K`` nodes integrates exactly.
    """
    P = P or disc.dealiased_size(u.K)
    return disc.grid_integral(spec.f.primitive(disc.synthesize(u.coeffs, P)))


def energy(spec: ProblemSpec, u: Field) -> float:
    """Lyapunov functional ``1/2 int_0^D a - lam int F(u)`` with ``D = |u_x|^2``."""
    _check(u)
    D = disc.h1_seminorm_sq(u)
    prim = spec.a.primitive(D)
    area = spec.a.integral(D) if prim is None else float(prim)
    return 0.5 * area - spec.lam * potential_integral(spec, u)
