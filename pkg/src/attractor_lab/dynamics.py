"""Time stepping, omega-limit classification and connection search.

Both forms are advanced with ETDRK4 (Cox-Matthews), the phi-function
coefficients evaluated by contour averaging.  The semilinear linear part is
``-k^2``.  The nonlocal form freezes ``a(|u_x|^2)`` at the start of each step
as the linear part and moves the remainder into the explicit term; the clock
``alpha' = a(|u_x|^2)`` rides along as an extra component with zero linear part.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import discretization as disc
from .discretization import Field
from .equilibria import EquilibriumRecord
from .errors import BlowUpError, InvalidInputError, PreconditionError
from .model import ProblemSpec, energy, nonlinear_coeffs
from .spectrum import spectrum_of, unstable_directions

log = logging.getLogger(__name__)

CONTOUR_POINTS = 32
STEP_TOL = 1e-8
DT0 = 1e-3
DT_MAX = 0.25
R_CAPTURE = 1e-3
DWELL = 1.0
T_MAX = 200.0
DEPARTURE = 1e-4
RANDOM_SAMPLES = 20
BISECT_STEPS = 60
SYMMETRY_CUT = 1e-10  # relative; eigenvector round-off sits near 1e-14

UNRESOLVED = "unresolved"


# -- ETDRK4 -------------------------------------------------------------------

def etdrk4_coeffs(L: np.ndarray, h: float, M: int = CONTOUR_POINTS):
    """``(E, E2, Q, f1, f2, f3)`` for the diagonal linear part ``L`` and step ``h``."""
    hL = h * L
    r = np.exp(1j * np.pi * (np.arange(1, M + 1) - 0.5) / M)
    LR = hL[:, None] + r[None, :]
    eLR = np.exp(LR)
    Q = h * np.real(np.mean((np.exp(LR / 2) - 1.0) / LR, axis=1))
    f1 = h * np.real(np.mean((-4.0 - LR + eLR * (4.0 - 3.0 * LR + LR ** 2)) / LR ** 3, axis=1))
    f2 = h * np.real(np.mean((2.0 + LR + eLR * (LR - 2.0)) / LR ** 3, axis=1))
    f3 = h * np.real(np.mean((-4.0 - 3.0 * LR - LR ** 2 + eLR * (4.0 - LR)) / LR ** 3, axis=1))
    return np.exp(hL), np.exp(hL / 2), Q, f1, f2, f3


def etdrk4_step(L, N, y, h):
    E, E2, Q, f1, f2, f3 = etdrk4_coeffs(L, h)
    Ny = N(y)
    a = E2 * y + Q * Ny
    Na = N(a)
    b = E2 * y + Q * Na
    Nb = N(b)
    c = E2 * a + Q * (2.0 * Nb - Ny)
    Nc = N(c)
    return E * y + f1 * Ny + 2.0 * f2 * (Na + Nb) + f3 * Nc


def _k2(K):
    return disc.wavenumbers(K) ** 2


def _seminorm(c, k2):
    return 0.5 * np.pi * float(np.sum(k2 * c * c))


class _Semilinear:
    """``c' = -k^2 c + lam P f(c) / a(D)``; state is the coefficient vector."""

    clock = False

    def __init__(self, spec: ProblemSpec, K: int, mask=None):
        self.spec, self.k2, self.mask = spec, _k2(K), mask
        self.L = -self.k2

    def linear(self, y):
        return self.L

    def N(self, y):
        aD = float(self.spec.a(_seminorm(y, self.k2)))
        return self.spec.lam * nonlinear_coeffs(self.spec, y) / aD

    def step(self, y, h):
        return self._mask(etdrk4_step(self.L, self.N, y, h))

    def _mask(self, y):
        if self.mask is not None:
            y = y.copy()
            y[: self.k2.size][~self.mask] = 0.0
        return y

    def coeffs(self, y):
        return y


class _Nonlocal(_Semilinear):
    """``c' = -a(D) k^2 c + lam P f(c)`` with the clock appended as the last entry."""

    clock = True

    def step(self, y, h):
        K = self.k2.size
        abar = float(self.spec.a(_seminorm(y[:K], self.k2)))
        L = np.append(-abar * self.k2, 0.0)
        spec, k2 = self.spec, self.k2

        def N(z):
            c = z[:K]
            aD = float(spec.a(_seminorm(c, k2)))
            out = np.empty_like(z)
            out[:K] = spec.lam * nonlinear_coeffs(spec, c) - (aD - abar) * k2 * c
            out[K] = aD
            return out

        return self._mask(etdrk4_step(L, N, y, h))

    def coeffs(self, y):
        return y[: self.k2.size]


def invariant_mask(spec: ProblemSpec, c: np.ndarray) -> np.ndarray | None:
    """Modes of the smallest symmetry subspace containing ``c``, or None if it is everything.

    For odd ``f`` the span of ``sin(q m x)`` and its odd-``m`` part are invariant
    under both flows.  Round-off leaks into the other modes, where the
    instability of the higher equilibria amplifies it; zeroing them after each
    step keeps a trajectory in the subspace the exact flow preserves.
    """
    if not getattr(spec.f, "odd", False):
        return None
    scale = float(np.max(np.abs(c)))
    if scale == 0.0:
        return None
    k = np.arange(1, c.size + 1)
    nz = k[np.abs(c) > SYMMETRY_CUT * scale]
    q = int(np.gcd.reduce(nz))
    odd_only = bool(np.all((nz // q) % 2 == 1))
    mask = (k % q == 0) & ((not odd_only) | ((k // q) % 2 == 1))
    return None if mask.all() else mask


def _system(spec, K, form, mask):
    if form == "semilinear":
        return _Semilinear(spec, K, mask)
    if form == "nonlocal":
        return _Nonlocal(spec, K, mask)
    raise InvalidInputError(f"unknown form {form!r}")


def step_semilinear(spec: ProblemSpec, u: Field, dt: float) -> Field:
    """One ETDRK4 step of the semilinear form."""
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    y = _Semilinear(spec, u.K).step(np.array(u.coeffs), dt)
    _guard(y)
    return Field(y)


def step_nonlocal(spec: ProblemSpec, u: Field, dt: float) -> Field:
    """One frozen-coefficient ETDRK4 step of the nonlocal form."""
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    y = _Nonlocal(spec, u.K).step(np.append(u.coeffs, 0.0), dt)
    _guard(y)
    return Field(y[:-1])


def _guard(y):
    if not np.all(np.isfinite(y)):
        raise BlowUpError("non-finite state during time stepping")


# -- adaptive integration -----------------------------------------------------

@dataclass
class TrajectoryLog:
    form: str
    times: list = field(default_factory=list)
    coeffs: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    laps: list = field(default_factory=list)
    clock: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    terminal: str | tuple = UNRESOLVED

    def fields(self) -> list[Field]:
        return [Field(c) for c in self.coeffs]

    @property
    def final(self) -> Field:
        return Field(self.coeffs[-1])

    def max_energy_increase(self) -> float:
        e = np.asarray(self.energies)
        return float(np.max(np.diff(e), initial=0.0))

    def lap_increases(self) -> int:
        laps = [n for n in self.laps if n is not None]
        return int(sum(1 for p, q in zip(laps, laps[1:]) if q > p))


def _lap(c):
    try:
        return disc.lap_number(Field(c))
    except InvalidInputError:
        return None  # field vanished; no sign changes to count


def integrate(spec: ProblemSpec, u0: Field, t_end: float, form: str = "semilinear",
              stops=(), tol: float = STEP_TOL, dt0: float = DT0, dt_max: float = DT_MAX,
              monitor=None, symmetry: bool = True) -> TrajectoryLog:
    """Adaptive ETDRK4 with step doubling; logs every accepted step and every stop time.

    ``monitor(t, coeffs)`` may return a terminal label to end the run early.
    """
    if not t_end > 0:
        raise InvalidInputError("t_end must be positive")
    K = u0.K
    c0 = np.array(u0.coeffs)
    sys = _system(spec, K, form, invariant_mask(spec, c0) if symmetry else None)
    y = sys._mask(np.append(c0, 0.0) if sys.clock else c0)
    k = disc.wavenumbers(K)
    stops = sorted(float(s) for s in stops if 0.0 < s <= t_end)
    if not stops or stops[-1] != t_end:
        stops.append(t_end)

    out = TrajectoryLog(form)

    def record(t, y):
        c = sys.coeffs(y)
        out.times.append(t)
        out.coeffs.append(c.copy())
        out.energies.append(energy(spec, Field(c)))
        out.laps.append(_lap(c))
        out.clock.append(float(y[-1]) if sys.clock else t)

    record(0.0, y)
    t, h, nxt = 0.0, dt0, 0
    while nxt < len(stops):
        target = stops[nxt]
        hh = min(h, target - t)
        full = sys.step(y, hh)
        half = sys.step(sys.step(y, 0.5 * hh), 0.5 * hh)
        diff = sys.coeffs(full) - sys.coeffs(half)
        err = math.sqrt(0.5 * np.pi * float(np.sum((k * diff) ** 2)))
        if sys.clock:
            err = max(err, abs(full[-1] - half[-1]))
        if not np.isfinite(err):
            raise BlowUpError(f"non-finite state at t = {t:.6g}")
        if err <= tol:
            t = target if hh == target - t else t + hh
            y = half
            record(t, y)
            if t >= target:
                nxt += 1
            if monitor is not None:
                label = monitor(t, sys.coeffs(y))
                if label is not None:
                    out.terminal = label
                    break
        fac = 0.9 * (tol / err) ** 0.2 if err > 0 else 4.0
        grown = hh * min(4.0, max(0.2, fac))
        # a step shortened to land on a stop says nothing about the next one
        h = min(dt_max, max(grown, h) if (err <= tol and hh < h) else grown)
        if h < 1e-12:
            raise BlowUpError(f"step size underflow at t = {t:.6g}")
    return out


# -- omega limits -------------------------------------------------------------

class _Capture:
    """Terminal once within ``r`` of one equilibrium and inside ``2r`` for ``dwell``."""

    def __init__(self, equilibria, r, dwell, exclude, log):
        self.targets = [(e.label, e.profile) for e in equilibria if e.label not in exclude]
        self.r, self.dwell, self.log = r, dwell, log
        self.current, self.since = None, 0.0

    def __call__(self, t, c):
        d = [disc.coeff_h1_norm(c - p.resized(c.size).coeffs) for _, p in self.targets]
        i = int(np.argmin(d)) if d else None
        if self.log is not None:
            self.log.distances.append(float(d[i]) if d else float("nan"))
        if self.current is not None:
            j = [lbl for lbl, _ in self.targets].index(self.current)
            if d[j] > 2.0 * self.r:
                self.current = None
            elif t - self.since >= self.dwell:
                return self.current
        if self.current is None and i is not None and d[i] < self.r:
            self.current, self.since = self.targets[i][0], t
        return None


def run_to_limit(spec: ProblemSpec, u0: Field, equilibria, r_capture: float = R_CAPTURE,
                 dwell: float = DWELL, T_max: float = T_MAX, exclude=(),
                 tol: float = STEP_TOL) -> TrajectoryLog:
    box = TrajectoryLog("semilinear")
    mon = _Capture(equilibria, r_capture, dwell, set(exclude), box)
    out = integrate(spec, u0, T_max, "semilinear", tol=tol, monitor=mon)
    # the monitor never sees the initial state; pad so distances align with times
    out.distances = [float("nan")] + box.distances
    return out


def classify_omega_limit(spec: ProblemSpec, u0: Field, equilibria, **kw):
    """Label of the equilibrium the trajectory settles at, or ``"unresolved"``."""
    return run_to_limit(spec, u0, equilibria, **kw).terminal


# -- connection search --------------------------------------------------------

@dataclass
class Departure:
    index: int
    weights: np.ndarray
    target: object
    energy_drop_ok: bool
    log: TrajectoryLog = field(repr=False)
    kind: str = "sample"  # "axis", "random" or "bisection"


@dataclass
class ConnectionSearch:
    source: tuple
    unstable_dim: int
    departures: list

    @property
    def targets(self) -> set:
        return {d.target for d in self.departures if d.target != UNRESOLVED}

    @property
    def unresolved(self) -> int:
        return sum(1 for d in self.departures if d.target == UNRESOLVED)

    def edges(self) -> set:
        return {(self.source, t) for t in self.targets}


def _depart(spec, source, dirs, w, equilibria, offset, kw):
    v = sum(wi * d.coeffs for wi, d in zip(w, dirs))
    v = v / disc.coeff_h1_norm(v)
    u0 = Field(source.profile.coeffs + offset * v)
    trace = run_to_limit(spec, u0, equilibria, exclude={source.label}, **kw)
    e0 = energy(spec, source.profile)
    e = np.asarray(trace.energies)
    ok = bool(np.all(np.diff(e) <= 1e-8) and e[-1] < e0)
    return trace, ok


def _job(args):
    spec, source, dirs, w, equilibria, offset, kw = args
    return _depart(spec, source, dirs, w, equilibria, offset, kw)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("ATTRACTOR_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def find_connections(spec: ProblemSpec, source: EquilibriumRecord, equilibria,
                     samples: int = RANDOM_SAMPLES, seed: int = 0,
                     offset: float = DEPARTURE, refine: bool = True,
                     workers: int | None = None, **kw) -> ConnectionSearch:
    """Targets reached from ``source`` along its unstable directions.

    Departures: both signs of every unstable eigenvector plus ``samples``
    random unit combinations.  With two unstable directions the samples are
    ordered by angle and every adjacent pair reaching opposite-sign targets
    of one branch is bisected; the dividing orbit lies in the stable set of
    a saddle, so the bisection exposes connections no open set of
    directions reaches.
    """
    report = spectrum_of(spec, source)
    d = report.positive_count
    if d < 1:
        raise PreconditionError(f"{source.name} has no unstable directions")
    dirs = unstable_directions(report)
    weights = []
    for i in range(d):
        for s in (1.0, -1.0):
            w = np.zeros(d)
            w[i] = s
            weights.append((w, "axis"))
    rng = np.random.default_rng(seed)
    # on a one-dimensional unstable space the random draws repeat the two axes
    for _ in range(samples if d > 1 else 0):
        w = rng.standard_normal(d)
        weights.append((w / np.linalg.norm(w), "random"))

    workers = worker_count() if workers is None else workers
    jobs = [(spec, source, dirs, w, equilibria, offset, kw) for w, _ in weights]
    results = _map(_job, jobs, workers)
    deps = [Departure(i, w, tr.terminal, ok, tr, kind)
            for i, ((w, kind), (tr, ok)) in enumerate(zip(weights, results))]

    if refine and d == 2:
        deps += _bisect_circle(spec, source, dirs, deps, equilibria, offset, kw)
    return ConnectionSearch(source.label, d, deps)


def _bisect_circle(spec, source, dirs, deps, equilibria, offset, kw):
    ang = sorted((math.atan2(dp.weights[1], dp.weights[0]) % (2 * math.pi), dp.target)
                 for dp in deps)
    extra = []
    n = len(ang)
    for i in range(n):
        (a0, t0), (a1, t1) = ang[i], ang[(i + 1) % n]
        # only a boundary between two basins of the same level hides a saddle;
        # a pair ending at a saddle and a sink just closes in on the saddle's axis
        if t0 == t1 or UNRESOLVED in (t0, t1) or t0[0] != t1[0]:
            continue
        if a1 <= a0:
            a1 += 2 * math.pi
        for _ in range(BISECT_STEPS):
            mid = 0.5 * (a0 + a1)
            w = np.array([math.cos(mid), math.sin(mid)])
            trace, ok = _depart(spec, source, dirs, w, equilibria, offset, kw)
            tm = trace.terminal
            if tm == t0:
                a0 = mid
            elif tm == t1:
                a1 = mid
            else:
                extra.append(Departure(len(deps) + len(extra), w, tm, ok, trace, "bisection"))
                break
            if a1 - a0 < 1e-15:
                break
    return extra


# -- helpers shared by the experiments ----------------------------------------

def random_field(rng: np.random.Generator, K: int, modes: int = 6, scale: float = 1.0) -> Field:
    """Smooth random field: ``N(0, 1) scale / k^2`` on the first ``modes`` modes."""
    c = np.zeros(K)
    m = min(modes, K)
    k = disc.wavenumbers(m)
    c[:m] = scale * rng.standard_normal(m) / k ** 2
    return Field(c)


def reclock_check(spec: ProblemSpec, u0: Field, T: float = 2.0, n_stops: int = 8,
                  tol: float = STEP_TOL) -> tuple[float, list]:
    """Largest H1 gap between nonlocal ``u(t)`` and semilinear ``v(alpha(t))``.

    ``alpha(t)`` is the integral of ``a(|u_x|^2)`` carried by the nonlocal run.
    """
    ts = list(np.linspace(0.0, T, n_stops + 1)[1:])
    nl = integrate(spec, u0, T, "nonlocal", stops=ts, tol=tol)
    at = {t: (c, a) for t, c, a in zip(nl.times, nl.coeffs, nl.clock)}
    pairs = [at[t] for t in ts]
    alphas = [a for _, a in pairs]
    sl = integrate(spec, u0, alphas[-1], "semilinear", stops=alphas, tol=tol)
    by_time = dict(zip(sl.times, sl.coeffs))
    gaps = [float(disc.coeff_h1_norm(c - by_time[a])) for c, a in pairs]
    return max(gaps), list(zip(ts, alphas, gaps))
