"""The model flow on the closed unit disk in R^n.

``theta' = Q theta - <Q theta, theta> theta`` on the sphere and ``r' = r(1 - r)``
radially, with ``Q = diag(1, 1/2, ..., 1/n)``.  Its equilibria are the origin
and ``+-e_j`` on the unit sphere; ``+-e_{j+1}`` carries the Morse label ``(j, +-)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SizeMismatchError
from .morse import ConnectionGraph, MorseLabel

UNIT_TOL = 1e-10
CAPTURE = 1e-6
DWELL = 1.0
T_MAX = 300.0
DT = 0.01
R_DEPART = 1e-4
SPHERE_DEPART = 1e-4
RANDOM_SAMPLES = 20


def q_diag(n: int) -> np.ndarray:
    return 1.0 / np.arange(1, n + 1)


@dataclass(frozen=True)
class ModelState:
    theta: np.ndarray
    r: float

    def __post_init__(self):
        th = np.array(self.theta, dtype=float).ravel()
        r = float(self.r)
        if not 0.0 <= r <= 1.0:
            raise InvalidInputError("r must lie in [0, 1]")
        if r > 0 and abs(np.linalg.norm(th) - 1.0) > UNIT_TOL:
            raise InvalidInputError("theta must be a unit vector")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "r", r)

    @property
    def n(self) -> int:
        return self.theta.size

    @property
    def point(self) -> np.ndarray:
        """Cartesian position ``r theta`` in the disk."""
        return self.r * self.theta


def model_rhs(state: ModelState, n: int | None = None) -> tuple[np.ndarray, float]:
    n = n or state.n
    if state.n != n:
        raise SizeMismatchError(f"state has dimension {state.n}, expected {n}")
    if state.r == 0.0:
        # the origin is a single point: no angular motion to speak of
        return np.zeros(n), 0.0
    th = state.theta
    qth = q_diag(n) * th
    return qth - float(qth @ th) * th, state.r * (1.0 - state.r)


def _rhs_batch(theta, r, q):
    qth = q * theta
    rq = np.sum(qth * theta, axis=1, keepdims=True)
    return qth - rq * theta, r * (1.0 - r)


def _rk4_batch(theta, r, q, dt):
    k1t, k1r = _rhs_batch(theta, r, q)
    k2t, k2r = _rhs_batch(theta + 0.5 * dt * k1t, r + 0.5 * dt * k1r, q)
    k3t, k3r = _rhs_batch(theta + 0.5 * dt * k2t, r + 0.5 * dt * k2r, q)
    k4t, k4r = _rhs_batch(theta + dt * k3t, r + dt * k3r, q)
    theta = theta + dt / 6.0 * (k1t + 2 * k2t + 2 * k3t + k4t)
    r = r + dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
    # projection back to the sphere; the exact flow preserves |theta| = 1
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    return theta, np.clip(r, 0.0, 1.0)


def model_equilibria(n: int) -> dict:
    """Origin (top label) and ``+-e_j`` at ``r = 1`` labelled ``(j-1, +-)``."""
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    out = {MorseLabel(n, "top", n): ModelState(np.eye(n)[0], 0.0)}
    for j in range(1, n + 1):
        for s, sign in ((-1.0, "-"), (1.0, "+")):
            out[MorseLabel(j - 1, sign, n)] = ModelState(s * np.eye(n)[j - 1], 1.0)
    return dict(sorted(out.items()))


@dataclass
class ModelRun:
    """Batched trajectories; ``rayleigh`` holds ``<Q theta, theta>`` per step."""

    theta0: np.ndarray
    r_final: np.ndarray
    targets: list
    times: np.ndarray
    rayleigh: np.ndarray = field(repr=False)
    radius: np.ndarray = field(repr=False)
    unit_defect: float = 0.0


def simulate(theta0, r0, n: int, T: float = T_MAX, dt: float = DT,
             capture: float = CAPTURE, dwell: float = DWELL, exclude=None,
             keep_every: int = 10) -> ModelRun:
    """Integrate a batch and classify each trajectory's limit among the equilibria."""
    theta = np.array(theta0, dtype=float).reshape(-1, n)
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    r = np.array(r0, dtype=float).reshape(-1, 1)
    q = q_diag(n)
    eqs = model_equilibria(n)
    labels = [lab for lab in eqs if lab != exclude]
    pts = np.array([eqs[lab].point for lab in labels])
    m = theta.shape[0]
    done = [None] * m
    since = np.full(m, np.nan)
    near = np.full(m, -1)
    steps = int(round(T / dt))
    times, ray, rad = [0.0], [np.sum(q * theta * theta, axis=1)], [r[:, 0].copy()]
    defect = 0.0
    for i in range(1, steps + 1):
        theta, r = _rk4_batch(theta, r, q, dt)
        t = i * dt
        defect = max(defect, float(np.max(np.abs(np.linalg.norm(theta, axis=1) - 1.0))))
        x = r * theta
        dist = np.linalg.norm(x[:, None, :] - pts[None, :, :], axis=2)
        best = np.argmin(dist, axis=1)
        for k in range(m):
            if done[k] is not None:
                continue
            if near[k] >= 0 and dist[k, near[k]] > 2 * capture:
                near[k] = -1
            if near[k] >= 0 and t - since[k] >= dwell:
                done[k] = labels[near[k]]
            elif near[k] < 0 and dist[k, best[k]] < capture:
                near[k], since[k] = best[k], t
        if i % keep_every == 0:
            times.append(t)
            ray.append(np.sum(q * theta * theta, axis=1))
            rad.append(r[:, 0].copy())
        if all(d is not None for d in done):
            break
    return ModelRun(np.array(theta0, dtype=float).reshape(-1, n), r.ravel(),
                    [d if d is not None else "unresolved" for d in done],
                    np.array(times), np.array(ray), np.array(rad), defect)


@dataclass
class ModelSearch:
    n: int
    graph: ConnectionGraph
    unresolved: int
    runs: dict = field(repr=False)


def model_connection_search(n: int, samples: int = RANDOM_SAMPLES, seed: int = 0) -> ModelSearch:
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    rng = np.random.default_rng(seed)
    eye = np.eye(n)
    eqs = model_equilibria(n)
    edges, runs, unresolved = set(), {}, 0
    for lab, st in eqs.items():
        if lab.is_top:
            dirs = [s * eye[k] for k in range(n) for s in (1.0, -1.0)]
            dirs += list(rng.standard_normal((samples, n)))
            theta0, r0 = np.array(dirs), np.full(len(dirs), R_DEPART)
        else:
            j = lab.level  # sits at e_{j+1}; unstable toward e_1..e_j
            if j == 0:
                continue
            tang = [s * eye[k] for k in range(j) for s in (1.0, -1.0)]
            mix = rng.standard_normal((samples, j))
            tang += [np.append(w, np.zeros(n - j)) for w in mix]
            tang = np.array([v / np.linalg.norm(v) for v in tang])
            theta0 = st.theta[None, :] + SPHERE_DEPART * tang
            r0 = np.ones(len(tang))
        run = simulate(theta0, r0, n, exclude=lab)
        runs[lab] = run
        for tgt in run.targets:
            if tgt == "unresolved":
                unresolved += 1
            else:
                edges.add((lab, tgt))
    return ModelSearch(n, ConnectionGraph(n, frozenset(edges)), unresolved, runs)


def model_connection_graph(n: int, samples: int = RANDOM_SAMPLES, seed: int = 0) -> ConnectionGraph:
    return model_connection_search(n, samples, seed).graph


@dataclass
class ConjugacyReport:
    n: int
    equal: bool
    missing: list
    extra: list

    @property
    def first_offending(self):
        bad = sorted(self.missing + self.extra)
        return bad[0] if bad else None

    def to_dict(self) -> dict:
        pair = lambda e: [str(e[0]), str(e[1])]  # noqa: E731
        first = self.first_offending
        return {
            "n": self.n, "equal": self.equal,
            "missing_in_model": [pair(e) for e in self.missing],
            "extra_in_model": [pair(e) for e in self.extra],
            "first_offending_edge": pair(first) if first else None,
        }


def conjugacy_graph_check(pde_graph: ConnectionGraph, model_graph: ConnectionGraph,
                          n: int) -> ConjugacyReport:
    """Edge-set equality under ``e_{j+1}^+- <-> phi_{j+1}^+-`` and origin <-> zero."""
    if pde_graph.N != n or model_graph.N != n:
        raise SizeMismatchError(
            f"graphs on {2 * pde_graph.N + 1} and {2 * model_graph.N + 1} nodes, expected {2 * n + 1}")
    missing, extra = model_graph.diff(pde_graph)
    return ConjugacyReport(n, not missing and not extra, missing, extra)
