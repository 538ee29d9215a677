"""Equilibria by shooting plus a scalar self-consistency solve.

A nonlocal equilibrium with ``D = |phi_x|^2`` is a classical Chafee-Infante
profile at the effective parameter ``lam / a(D)``.  So each branch reduces
to the scalar fixed point ``beta(D) = D`` where ``beta`` maps ``D`` to the
seminorm of the classical profile at ``lam / a(D)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import discretization as disc
from .discretization import Field
from .errors import (
    BranchNotBornError,
    ConstructionError,
    ContinuationBreakdownError,
    DegenerateParameterError,
    FixedPointNotFoundError,
    InvalidInputError,
    NumericalFailureError,
)
from .model import Cubic, Diffusion, HomotopyDiffusion, ProblemSpec, energy, rhs_nonlocal

SHOOT_ATOL = 1e-12
SHOOT_RTOL = 1e-10
BOUNDARY_TOL = 1e-8  # event-time noise; the Galerkin polish removes the rest
D_FLOOR = 1e-8
D_XTOL = 1e-12
RESIDUAL_TOL = 1e-8
POLISH_TOL = 1e-13
BIFURCATION_GUARD = 1e-9
SCAN_POINTS = 400

SIGNS = ("+", "-")


@dataclass(frozen=True)
class Shot:
    """Converged shooting data for one classical branch."""

    lambda_eff: float
    j: int
    sign: str
    slope: float
    amplitude: float
    boundary_value: float
    sol: object = field(repr=False, compare=False)


@dataclass(frozen=True)
class EquilibriumRecord:
    j: int
    sign: str  # "+", "-" or "0" for the zero solution
    profile: Field
    D: float
    interior_zeros: int
    energy: float
    residual: float
    morse_index: int | None = None
    fixed_point_defect: float = 0.0
    beta_slope: float = 0.0

    @property
    def label(self) -> tuple[int, str]:
        return (self.j, self.sign)

    @property
    def name(self) -> str:
        return "zero" if self.j == 0 else f"phi_{self.j}^{self.sign}"

    def to_dict(self) -> dict:
        return {
            "label": {"j": self.j, "sign": self.sign},
            "name": self.name,
            "D": self.D,
            "interior_zeros": self.interior_zeros,
            "energy": self.energy,
            "residual": self.residual,
            "morse_index": self.morse_index,
            "fixed_point_defect": self.fixed_point_defect,
            "beta_slope": self.beta_slope,
            "profile": self.profile.to_dict(),
        }


# -- classical shooting -------------------------------------------------------

def _descent(f, lam_eff, A, s_max, dense=False):
    """Integrate ``w'' = -lam f(w)`` from the peak ``(A, 0)`` until ``w`` hits zero."""
    def rhs(x, y):
        return (y[1], -lam_eff * f(y[0]))

    def crossing(x, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1.0 if A > 0 else 1.0
    # absolute tolerance scales with the peak so small humps near birth stay resolved
    return solve_ivp(rhs, (0.0, s_max), (A, 0.0), method="DOP853", rtol=SHOOT_RTOL,
                     atol=SHOOT_ATOL * abs(A), events=crossing, dense_output=dense)


def _quarter(f, lam_eff, A, s_max):
    s = _descent(f, lam_eff, A, s_max)
    return s.t_events[0][0] if s.t_events[0].size else s_max


@lru_cache(maxsize=4096)
def _shoot(lambda_eff: float, j: int, sign: str, f) -> Shot:
    if f.positive_zero is None or not f.odd:
        raise InvalidInputError(f"shooting needs a bounded odd nonlinearity, got {f.name}")
    if not lambda_eff > j * j:
        raise BranchNotBornError(
            f"branch {j} is not born at effective parameter {lambda_eff:.6g} <= {j * j}")
    s = 1.0 if sign == "+" else -1.0
    half = math.pi / j
    quarter = 0.5 * half
    # shoot in the peak value: the quarter wave grows like log(1/(z - A)) as A
    # nears the zero z of f, far better conditioned than the slope at x = 0
    z = f.positive_zero

    def excess(A):
        return _quarter(f, lambda_eff, s * A, 2.0 * quarter) - quarter

    lo, hi = 1e-9 * z, z * (1.0 - 1e-15)
    if not (excess(lo) < 0.0 < excess(hi)):
        raise NumericalFailureError(f"no shooting bracket for branch {j} at {lambda_eff}")
    A = brentq(excess, lo, hi, xtol=1e-17, rtol=1e-15, maxiter=200)
    sol = _descent(f, lambda_eff, s * A, quarter, dense=True)
    end = float(sol.y[0, -1])
    if abs(end) > BOUNDARY_TOL:
        raise NumericalFailureError(
            f"shooting residual {abs(end):.2e} exceeds {BOUNDARY_TOL:g} (branch {j})")
    return Shot(lambda_eff, j, sign, float(-sol.y[1, -1]), A, end,
                _assemble(sol.sol, quarter, j))


def _assemble(descent, quarter, j):
    """Whole profile from one quarter wave: even about each peak, odd about each zero."""
    half = 2.0 * quarter

    def sol(x):
        x = np.asarray(x, dtype=float)
        q = np.clip(np.floor(x / half), 0, j - 1)
        r = x - q * half
        return descent(np.abs(r - quarter)) * np.where(q % 2 == 0, 1.0, -1.0)

    return sol


def shoot(lambda_eff: float, j: int, sign: str = "+", f=None) -> Shot:
    return _shoot(float(lambda_eff), int(j), sign, f or _CUBIC)


_CUBIC = Cubic()


def classical_profile(lambda_eff: float, j: int, sign: str = "+", K: int = 64,
                      f=None) -> Field:
    """Solution of ``u'' + lambda_eff f(u) = 0`` with ``j - 1`` interior zeros."""
    shot = shoot(lambda_eff, j, sign, f)
    return _project(shot, K)


@lru_cache(maxsize=4096)
def _project_cached(shot: Shot, K: int) -> Field:
    P = 8 * K
    return Field(disc.analyze(shot.sol(disc.grid_nodes(P))[0], K))


def _project(shot, K):
    return _project_cached(shot, int(K))


def norm_map(lambda_eff: float, j: int, K: int = 64, f=None) -> float:
    """``|phi_x|^2`` of the classical profile; increasing in ``lambda_eff``."""
    return disc.h1_seminorm_sq(classical_profile(lambda_eff, j, "+", K, f))


def _beta(spec: ProblemSpec, j: int, D: float, K: int) -> float:
    lam_eff = spec.lam / float(spec.a(D))
    if lam_eff <= j * j:
        # continuous extension: the branch shrinks into zero at its birth
        return 0.0
    return norm_map(lam_eff, j, K, spec.f)


# -- nonlocal equilibria ------------------------------------------------------

def branch_count(spec: ProblemSpec) -> int:
    a0 = float(spec.a(0.0))
    k = 0
    while a0 * (k + 1) ** 2 < spec.lam:
        k += 1
    return k


def check_nondegenerate(spec: ProblemSpec, guard: float = BIFURCATION_GUARD):
    a0 = float(spec.a(0.0))
    k = max(1, int(math.floor(math.sqrt(spec.lam / a0))))
    for q in (k - 1, k, k + 1):
        if q >= 1 and abs(spec.lam - a0 * q * q) < guard:
            raise DegenerateParameterError(
                f"lambda = {spec.lam} sits on the bifurcation value a(0)*{q}^2")


def zero_record(spec: ProblemSpec, K: int = 64) -> EquilibriumRecord:
    z = Field.zeros(K)
    return EquilibriumRecord(0, "0", z, 0.0, 0, 0.0, 0.0)


def make_record(spec: ProblemSpec, j: int, sign: str, profile: Field) -> EquilibriumRecord:
    D = disc.h1_seminorm_sq(profile)
    residual = math.sqrt(disc.l2_norm_sq(rhs_nonlocal(spec, profile)))
    return EquilibriumRecord(
        j=j, sign=sign, profile=profile, D=D,
        interior_zeros=disc.lap_number(profile),
        energy=energy(spec, profile), residual=residual,
    )


def solve_nonlocal_equilibrium(spec: ProblemSpec, j: int, sign: str = "+",
                               K: int = 64) -> EquilibriumRecord:
    """Equilibrium on branch ``j`` via the bracketed fixed point of ``beta``."""
    if j == 0:
        return zero_record(spec, K)
    a0 = float(spec.a(0.0))
    if not spec.lam > a0 * j * j:
        raise BranchNotBornError(f"lambda = {spec.lam} <= a(0) j^2 = {a0 * j * j}")
    m = spec.m
    # a >= m, so the profile at lam/m bounds every attainable seminorm
    d_max = norm_map(spec.lam / m, j, K, spec.f)
    lo = D_FLOOR
    g_lo = _beta(spec, j, lo, K) - lo
    g_hi = _beta(spec, j, d_max, K) - d_max
    if g_lo < 0.0 or g_hi > 0.0:
        raise FixedPointNotFoundError(
            f"beta(D) - D has no sign change on [{lo}, {d_max}]", bracket=(lo, d_max))
    if g_hi == 0.0:
        D = d_max
    else:
        D = brentq(lambda d: _beta(spec, j, d, K) - d, lo, d_max, xtol=D_XTOL, rtol=1e-15)
    return _finish(spec, j, sign, D, K)


def polish(spec: ProblemSpec, profile: Field, tol: float = POLISH_TOL,
           max_iter: int = 8) -> Field:
    """Newton refinement onto the exact Galerkin equilibrium.

    The shooting profile carries interpolation noise of the ODE tolerance
    in every coefficient; ``k^2`` amplifies it in the residual, and the
    time stepper relaxes to the discrete equilibrium, not the projected one.
    """
    c = np.array(profile.coeffs)
    K = c.size
    k2 = disc.wavenumbers(K) ** 2
    P = disc.dealiased_size(K)
    for _ in range(max_iter):
        u = disc.synthesize(c, P)
        D = 0.5 * np.pi * float(np.sum(k2 * c * c))
        aD = float(spec.a(D))
        F = -aD * k2 * c + spec.lam * disc.analyze(spec.f(u), K)
        if np.linalg.norm(F) < tol:
            break
        jac = spec.lam * disc.multiplier_matrix(spec.f.derivative(u), K)
        jac[np.diag_indices(K)] -= aD * k2
        jac -= float(spec.a.derivative(D)) * np.outer(k2 * c, np.pi * k2 * c)
        c = c - np.linalg.solve(jac, F)
    return Field(c)


def _finish(spec, j, sign, D, K):
    lam_eff = spec.lam / float(spec.a(D))
    profile = polish(spec, classical_profile(lam_eff, j, sign, K, spec.f))
    rec = make_record(spec, j, sign, profile)
    rec = replace(rec, fixed_point_defect=abs(_beta(spec, j, D, K) - D),
                  beta_slope=_beta_slope(spec, j, D, K))
    if rec.residual > RESIDUAL_TOL:
        raise NumericalFailureError(
            f"equilibrium residual {rec.residual:.2e} on branch {j}{sign}; increase K")
    return rec


def _beta_slope(spec, j, D, K, h=1e-6):
    lo = max(D - h, D_FLOOR)
    return (_beta(spec, j, D + h, K) - _beta(spec, j, lo, K)) / (D + h - lo)


def scan_fixed_points(spec: ProblemSpec, j: int, sign: str = "+", K: int = 64,
                      n: int = SCAN_POINTS) -> list[EquilibriumRecord]:
    """All fixed points of ``beta`` by sign-change scanning, for non-monotone ``a``.

    The grid is uniform on ``[D_FLOOR, 1.05 * D_hi]`` and is augmented with
    the diffusion's breakpoints so that narrow pieces are not stepped over.
    """
    a0 = float(spec.a(0.0))
    if not spec.lam > a0 * j * j:
        raise BranchNotBornError(f"lambda = {spec.lam} <= a(0) j^2 = {a0 * j * j}")
    m = spec.m
    if not spec.lam > m * j * j:
        raise BranchNotBornError("branch never born for this diffusion")
    d_hi = 1.05 * norm_map(spec.lam / m, j, K, spec.f)
    grid = np.union1d(np.linspace(D_FLOOR, d_hi, n),
                      [b for b in spec.a.breakpoints if D_FLOOR < b < d_hi])
    g = np.array([_beta(spec, j, d, K) - d for d in grid])
    roots = []
    for i in range(grid.size - 1):
        if g[i] == 0.0:
            roots.append(grid[i])
        elif g[i] * g[i + 1] < 0.0:
            roots.append(brentq(lambda d: _beta(spec, j, d, K) - d, grid[i], grid[i + 1],
                                xtol=D_XTOL, rtol=1e-15))
    if not roots:
        raise FixedPointNotFoundError(
            f"beta(D) - D has no sign change on [{D_FLOOR}, {d_hi}]", bracket=(D_FLOOR, d_hi))
    return [_finish(spec, j, sign, D, K) for D in roots]


def enumerate_equilibria(spec: ProblemSpec, K: int = 64) -> list[EquilibriumRecord]:
    """All ``2N+1`` equilibria, sorted by ``(j, sign)``."""
    check_nondegenerate(spec)
    N = branch_count(spec)
    out = [zero_record(spec, K)]
    for j in range(1, N + 1):
        for sign in SIGNS:
            out.append(solve_nonlocal_equilibrium(spec, j, sign, K))
    return out


def find_record(records, j: int, sign: str) -> EquilibriumRecord:
    for r in records:
        if r.j == j and (j == 0 or r.sign == sign):
            return r
    raise KeyError((j, sign))


# -- homotopy in tau ----------------------------------------------------------

@dataclass(frozen=True)
class TauSlice:
    tau: float
    spec: ProblemSpec
    equilibria: list


@dataclass(frozen=True)
class TauContinuation:
    anchor: tuple[int, str]
    d_anchor: float
    slices: list
    continuity_constant: float

    def counts(self) -> list[int]:
        return [len(s.equilibria) for s in self.slices]


def homotopy_spec(spec: ProblemSpec, tau: float, d_anchor: float) -> ProblemSpec:
    return spec.with_diffusion(HomotopyDiffusion(spec.a, tau, d_anchor))


def continue_in_tau(spec: ProblemSpec, anchor_sign: str = "+", tau_grid=None,
                    K: int = 64) -> TauContinuation:
    """Equilibria of the family ``a_tau(s) = a(tau s + (1 - tau) D_anchor)``.

    The anchor is the top branch ``phi_N^sign`` of the original problem.
    """
    check_nondegenerate(spec)
    N = branch_count(spec)
    a0 = float(spec.a(0.0))
    if N == 0 or not spec.lam < a0 * (N + 1) ** 2:
        raise InvalidInputError("continuation needs a(0) N^2 < lambda < a(0) (N+1)^2, N >= 1")
    if tau_grid is None:
        tau_grid = np.linspace(0.0, 1.0, 11)
    tau_grid = [float(t) for t in tau_grid]
    anchor = solve_nonlocal_equilibrium(spec, N, anchor_sign, K)
    slices = []
    for tau in tau_grid:
        s_tau = homotopy_spec(spec, tau, anchor.D)
        eqs = enumerate_equilibria(s_tau, K)
        if len(eqs) != 2 * N + 1:
            raise ContinuationBreakdownError(
                f"{len(eqs)} equilibria at tau = {tau}, expected {2 * N + 1}")
        slices.append(TauSlice(tau, s_tau, eqs))
    const = 0.0
    for s0, s1 in zip(slices, slices[1:]):
        dt = abs(s1.tau - s0.tau)
        if dt == 0.0:
            continue
        for r0 in s0.equilibria:
            r1 = find_record(s1.equilibria, r0.j, r0.sign)
            const = max(const, disc.h1_distance(r0.profile, r1.profile) / dt)
    return TauContinuation((N, anchor_sign), anchor.D, slices, const)


# -- the non-monotone counterexample -------------------------------------------

def _hermite(t0, t1, y0, d0, y1, d1):
    h = t1 - t0

    def value(t):
        s = (np.asarray(t, dtype=float) - t0) / h
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1

    def slope(t):
        s = (np.asarray(t, dtype=float) - t0) / h
        return ((6 * s ** 2 - 6 * s) * y0 + (3 * s ** 2 - 4 * s + 1) * h * d0
                + (-6 * s ** 2 + 6 * s) * y1 + (3 * s ** 2 - 2 * s) * h * d1) / h

    return value, slope


class CounterexampleDiffusion(Diffusion):
    """Piecewise C^1 diffusion that dips on a short interval past ``d_star``.

    Pieces: ``a_base`` on ``[0, d*+delta]``; cubic Hermite bridge; a segment
    of slope ``-J`` on ``[d*+2delta, d*+3delta]`` from ``a(d*)`` down to
    ``a(d_bar)``; cubic Hermite bridge; the constant ``a(0)`` from ``d*+4delta``.
    """

    name = "counterexample"
    monotone = False

    def __init__(self, a_base, d_star, delta, J, d_bar, delta0, d0):
        self.a_base = a_base
        self.d_star, self.delta, self.J = float(d_star), float(delta), float(J)
        self.d_bar, self.delta0, self.d0 = float(d_bar), float(delta0), float(d0)
        ds, dl = self.d_star, self.delta
        self.breakpoints = tuple(ds + q * dl for q in (1, 2, 3, 4))
        b1, b2, b3, b4 = self.breakpoints
        self.top = float(a_base(ds))
        self.low = float(a_base(self.d_bar))
        self.floor = float(a_base(0.0))
        self._bridge1 = _hermite(b1, b2, float(a_base(b1)), float(a_base.derivative(b1)),
                                 self.top, -self.J)
        self._bridge2 = _hermite(b3, b4, self.low, -self.J, self.floor, 0.0)
        s = np.linspace(0.0, b4 + dl, 4001)
        vals = self(s)
        self._m = float(min(np.min(vals), self.floor))
        self._M = float(max(np.max(vals), a_base.bounds()[1]))

    def _pieces(self, s):
        s = np.asarray(s, dtype=float)
        b1, b2, b3, b4 = self.breakpoints
        return s, [s <= b1, (s > b1) & (s < b2), (s >= b2) & (s <= b3),
                   (s > b3) & (s < b4), s >= b4]

    def __call__(self, s):
        s, conds = self._pieces(s)
        b2 = self.breakpoints[1]
        return np.piecewise(s, conds, [
            lambda t: self.a_base(t),
            self._bridge1[0],
            lambda t: self.top - self.J * (t - b2),
            self._bridge2[0],
            lambda t: self.floor + 0.0 * t,
        ])

    def derivative(self, s):
        s, conds = self._pieces(s)
        return np.piecewise(s, conds, [
            lambda t: self.a_base.derivative(t),
            self._bridge1[1],
            lambda t: -self.J + 0.0 * t,
            self._bridge2[1],
            lambda t: 0.0 * t,
        ])

    def bounds(self):
        return self._m, self._M

    def describe(self) -> dict:
        return {
            "d_star": self.d_star, "delta0": self.delta0, "delta": self.delta,
            "d_bar": self.d_bar, "J": self.J, "d0": self.d0,
            "breakpoints": list(self.breakpoints),
            "values": {"a(d*)": self.top, "a(d_bar)": self.low, "a(0)": self.floor},
        }


def build_counterexample_a(a_base: Diffusion, lam: float, delta: float, J: float,
                           K: int = 64, f=None) -> CounterexampleDiffusion:
    """Counterexample diffusion for branch 1 at parameter ``lam``.

    ``delta`` and ``J`` are free; the segment then ends at ``a(d*) - J delta``,
    which fixes ``d_bar`` through ``a(d_bar) = a(d*) - J delta``, and
    ``delta0`` through ``g(d_bar) = d* + 3 delta0`` with ``g(d)`` the seminorm of
    the classical profile at ``lam / a(d)``.  ``d0 = g(0)``.
    """
    f = f or _CUBIC
    if not (delta > 0 and J > 0):
        raise ConstructionError("delta and J must be positive")
    a0 = float(a_base(0.0))
    if not lam > a0:
        raise ConstructionError("first branch must exist: lambda > a(0)")
    base = ProblemSpec(lam, f, a_base)
    s = np.linspace(0.0, 50.0, 2001)
    if np.any(np.diff(a_base(s)) <= 0):
        raise ConstructionError("a_base must be increasing")
    d_star = solve_nonlocal_equilibrium(base, 1, "+", K).D
    d0 = norm_map(lam / a0, 1, K, f)
    target = float(a_base(d_star)) - J * delta
    if not target > a0:
        raise ConstructionError(
            f"segment end a(d*) - J delta = {target:.6g} must exceed a(0) = {a0:.6g}")
    d_bar = brentq(lambda d: float(a_base(d)) - target, 0.0, d_star, xtol=1e-14)
    delta0 = (norm_map(lam / float(a_base(d_bar)), 1, K, f) - d_star) / 3.0
    if not delta < delta0:
        raise ConstructionError(f"delta = {delta:g} must be below delta0 = {delta0:.6g}")
    if not d_star + 4.0 * delta0 < d0:
        raise ConstructionError(
            f"d* + 4 delta0 = {d_star + 4 * delta0:.6g} must stay below d0 = {d0:.6g}")
    c = CounterexampleDiffusion(a_base, d_star, delta, J, d_bar, delta0, d0)
    if not c.bounds()[0] > 0:
        raise ConstructionError("constructed diffusion is not positive")
    return c


def with_morse_index(rec: EquilibriumRecord, index: int) -> EquilibriumRecord:
    return replace(rec, morse_index=int(index))
