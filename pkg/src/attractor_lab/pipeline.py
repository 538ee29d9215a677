"""The verification pipeline behind ``verify-paper``.

``Lab`` computes the shared artefacts lazily (equilibria, spectra, connection
searches) so that criteria reuse them; ``verify`` turns them into one report
entry per criterion.  Labs are memoised per configuration within a process.
"""
from __future__ import annotations

import logging
import math
from functools import cached_property

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import discretization as disc
from .config import RunConfig
from .discretization import Field
from .dynamics import find_connections, random_field, reclock_check, run_to_limit
from .equilibria import (
    branch_count,
    build_counterexample_a,
    classical_profile,
    continue_in_tau,
    enumerate_equilibria,
    scan_fixed_points,
)
from .errors import LabError
from .model import ConstantDiffusion, ProblemSpec, SaturatingDiffusion
from .modelflow import conjugacy_graph_check, model_connection_search
from .morse import (
    ConnectionGraph,
    assemble_connection_matrix,
    build_labels,
    check_consistency,
    predicted_graph,
)
from .spectrum import assemble_rank1, attach_morse_indices, rank1_matrix, spectrum_of

log = logging.getLogger(__name__)

PASS, FAIL, NA = "pass", "fail", "n/a"
EXACT_GRAPH = "exact edge-set equality"
SCAN_EXISTENCE = "some grid point with >= 3 positive equilibria, one unstable"


def reflect(u: Field) -> Field:
    """``u(pi - x)``: ``sin(k(pi - x)) = (-1)^(k+1) sin(kx)``."""
    k = np.arange(1, u.K + 1)
    return Field(np.where(k % 2 == 1, 1.0, -1.0) * u.coeffs)


def fd_index(lam_eff: float, profile: Field, f, n: int = 2000) -> int:
    """Positive eigenvalue count of ``v'' + lam_eff f'(phi) v`` by second differences."""
    h = math.pi / (n + 1)
    x = np.arange(1, n + 1) * h
    pot = lam_eff * f.derivative(disc.evaluate(profile, x))
    d = -2.0 / h ** 2 + pot
    e = np.full(n - 1, 1.0 / h ** 2)
    mu = eigh_tridiagonal(d, e, eigvals_only=True, select="v", select_range=(0.0, np.inf))
    return int(mu.size)


class Lab:
    def __init__(self, config: RunConfig):
        self.config = config
        self.spec = config.spec()
        self._side = {}

    # -- equilibria and spectra
    @cached_property
    def N(self) -> int:
        return branch_count(self.spec)

    @cached_property
    def _indexed(self):
        recs = enumerate_equilibria(self.spec, self.config.K)
        return attach_morse_indices(self.spec, recs)

    @property
    def equilibria(self):
        return self._indexed[0]

    @property
    def spectra(self):
        return self._indexed[1]

    # -- connections
    def search(self, spec: ProblemSpec, equilibria):
        c = self.config
        kw = dict(r_capture=c.r_capture, dwell=c.dwell, T_max=c.T_max, tol=c.step_tol)
        return {r.label: find_connections(spec, r, equilibria, samples=c.samples, seed=c.seed,
                                          offset=c.departure, **kw)
                for r in equilibria if r.morse_index and r.morse_index > 0}

    @cached_property
    def searches(self):
        return self.search(self.spec, self.equilibria)

    @staticmethod
    def graph_of(N, searches) -> ConnectionGraph:
        edges = set()
        for s in searches.values():
            edges |= s.edges()
        return ConnectionGraph.from_equilibrium_edges(N, edges)

    @cached_property
    def graph(self) -> ConnectionGraph:
        return self.graph_of(self.N, self.searches)

    def side_graph(self, lam: float) -> ConnectionGraph:
        if lam not in self._side:
            spec = self.config.spec(lam)
            eqs, _ = attach_morse_indices(spec, enumerate_equilibria(spec, self.config.K))
            self._side[lam] = self.graph_of(branch_count(spec), self.search(spec, eqs))
        return self._side[lam]


_LABS: dict = {}


def lab_for(config: RunConfig) -> Lab:
    if config not in _LABS:
        _LABS[config] = Lab(config)
    return _LABS[config]


# -- criteria -----------------------------------------------------------------

def _entry(cid, title, ok, tolerance=None, **details):
    status = NA if ok is None else (PASS if ok else FAIL)
    return {"id": cid, "title": title, "status": status, "tolerance": tolerance, **details}


def c1_counts(lab: Lab):
    c = lab.config
    rows = []
    for lam in sorted(set(c.count_probes) | {c.lam}):
        spec = c.spec(lam)
        n = len(enumerate_equilibria(spec, c.K))
        rows.append({"lambda": lam, "count": n, "expected": 2 * branch_count(spec) + 1})
    ok = all(r["count"] == r["expected"] for r in rows)
    return _entry(1, "equilibrium count 2N+1", ok, "integer-exact", probes=rows)


def c2_symmetry(lab: Lab, tol=1e-8):
    if lab.N == 0:
        return _entry(2, "zero counts and symmetries", None, tol)
    rows, ok = [], True
    eqs = {r.label: r for r in lab.equilibria}
    for j in range(1, lab.N + 1):
        p, m = eqs[(j, "+")], eqs[(j, "-")]
        refl = disc.h1_distance(reflect(p.profile), (-1) ** (j + 1) * p.profile)
        odd = disc.h1_norm(p.profile + m.profile)
        good = p.interior_zeros == j - 1 and m.interior_zeros == j - 1 and refl < tol and odd < tol
        ok &= good
        rows.append({"j": j, "interior_zeros": p.interior_zeros, "reflection_gap": refl,
                     "odd_gap": odd})
    return _entry(2, "zero counts and symmetries", ok, tol, branches=rows)


def c3_indices(lab: Lab, gap_floor=1e-3):
    c = lab.config
    expected = {r.label: (lab.N if r.j == 0 else r.j - 1) for r in lab.equilibria}
    fine, _ = attach_morse_indices(lab.spec, enumerate_equilibria(lab.spec, c.K_check))
    rows, ok = [], True
    for r, rep, r2 in zip(lab.equilibria, lab.spectra, fine):
        good = r.morse_index == expected[r.label] == r2.morse_index and rep.gap > gap_floor
        ok &= good
        rows.append({"name": r.name, "index_K": r.morse_index, "index_K_check": r2.morse_index,
                     "expected": expected[r.label], "gap": rep.gap})
    return _entry(3, "Morse/Conley indices", ok, {"tol_hyp": c.tol_hyp, "gap_floor": gap_floor},
                  K=c.K, K_check=c.K_check, equilibria=rows)


def c4_rank_one(lab: Lab, tol=1e-10):
    rows, ok = [], True
    for r in lab.equilibria:
        eps, b = assemble_rank1(lab.spec, r)
        sv = np.linalg.svd(rank1_matrix(eps, b), compute_uv=False)
        good = eps <= 0.0 and sv[1] < tol
        ok &= good
        rows.append({"name": r.name, "epsilon": eps, "second_singular_value": float(sv[1])})
    return _entry(4, "epsilon sign and rank", ok, tol, equilibria=rows)


def c5_lyapunov(lab: Lab, tol=1e-8):
    c = lab.config
    rng = np.random.default_rng(c.seed)
    logs = [run_to_limit(lab.spec, random_field(rng, c.K), lab.equilibria, r_capture=c.r_capture,
                         dwell=c.dwell, T_max=c.T_max, tol=c.step_tol)
            for _ in range(c.random_trajectories)]
    for s in lab.searches.values():
        logs += [d.log for d in s.departures]
    worst = max(lg.max_energy_increase() for lg in logs)
    lap_up = sum(lg.lap_increases() for lg in logs)
    pair = 0.0
    eqs = {r.label: r for r in lab.equilibria}
    for j in range(1, lab.N + 1):
        ep, em = eqs[(j, "+")].energy, eqs[(j, "-")].energy
        pair = max(pair, abs(ep - em) / max(abs(ep), 1e-300))
    ok = worst < tol and lap_up == 0 and pair < tol
    return _entry(5, "Lyapunov and lap-number monotonicity", ok, tol, trajectories=len(logs),
                  max_energy_increase=worst, lap_increases=lap_up, pair_energy_rel_gap=pair)


def c6_graph(lab: Lab):
    if lab.N == 0:
        return _entry(6, "connection graph equals prediction", None, EXACT_GRAPH, edges=[])
    pred = predicted_graph(lab.N)
    missing, extra = lab.graph.diff(pred)
    unresolved = sum(s.unresolved for s in lab.searches.values())
    same_level = [e for e in lab.graph.edges if e[0].degree == e[1].degree]
    energy_ok = all(d.energy_drop_ok for s in lab.searches.values() for d in s.departures
                    if d.target != "unresolved")
    ok = not missing and not extra and unresolved == 0 and not same_level and energy_ok
    return _entry(6, "connection graph equals prediction", ok, EXACT_GRAPH,
                  graph=lab.graph.to_dict(), missing=[[str(a), str(b)] for a, b in missing],
                  extra=[[str(a), str(b)] for a, b in extra], unresolved=unresolved,
                  energy_decreasing=energy_ok)


def c7_matrix(lab: Lab):
    rows, ok = [], True
    for n in range(1, 7):
        ax = assemble_connection_matrix(n).check_axioms()
        ok &= all(ax.values())
        rows.append({"N": n, **ax})
    witness = None
    if lab.N >= 1:
        rep = check_consistency(lab.graph, assemble_connection_matrix(lab.N), predicted_graph(lab.N))
        witness = rep.to_dict()
        ok &= rep.ok
    return _entry(7, "connection matrix axioms", ok, "integer-exact", axioms=rows,
                  consistency=witness)


def c8_tau(lab: Lab, tol=1e-6):
    c = lab.config
    if lab.N == 0:
        return _entry(8, "tau continuation", None, tol)
    cont = continue_in_tau(lab.spec, "+", np.linspace(0.0, 1.0, c.tau_points), c.K)
    idx = {}
    for sl in cont.slices:
        for r in sl.equilibria:
            idx.setdefault(r.label, []).append(spectrum_of(sl.spec, r).positive_count)
    constant = all(len(set(v)) == 1 for v in idx.values())
    abar = float(lab.spec.a(cont.d_anchor))
    gaps = []
    for r in cont.slices[0].equilibria:
        if r.j == 0:
            continue
        ref = classical_profile(lab.spec.lam / abar, r.j, r.sign, c.K, lab.spec.f)
        gaps.append(disc.h1_distance(ref, r.profile))
    ok = constant and set(cont.counts()) == {2 * lab.N + 1} and max(gaps) < tol
    return _entry(8, "tau continuation", ok, tol, counts=cont.counts(),
                  indices={f"{j},{s}": v for (j, s), v in sorted(idx.items())},
                  tau0_classical_gap=max(gaps), continuity_constant=cont.continuity_constant)


def c9_classical(lab: Lab, tol=1e-6):
    c = lab.config
    spec = ProblemSpec(c.lam, a=ConstantDiffusion(1.0))
    recs, _ = attach_morse_indices(spec, enumerate_equilibria(spec, c.K))
    N = branch_count(spec)
    rows, ok = [], True
    for r in recs:
        if r.j == 0:
            gap, fd = 0.0, fd_index(c.lam, r.profile, spec.f)
            want = N
        else:
            gap = disc.h1_distance(classical_profile(c.lam, r.j, r.sign, c.K, spec.f), r.profile)
            fd, want = fd_index(c.lam, r.profile, spec.f), r.j - 1
        good = gap < tol and r.morse_index == fd == want
        ok &= good
        rows.append({"name": r.name, "profile_gap": gap, "index": r.morse_index, "fd_index": fd})
    return _entry(9, "classical cross-validation", ok, tol, equilibria=rows)


def c10_conjugacy(lab: Lab):
    c = lab.config
    if lab.N == 0:
        return _entry(10, "model-flow conjugacy", None, EXACT_GRAPH)
    rows, ok = [], True
    cases = {lab.N: lab.graph}
    for lam in c.conjugacy_lambdas:
        n = branch_count(c.spec(lam))
        if n >= 1 and n not in cases:
            cases[n] = lab.side_graph(lam)
    for n, g in sorted(cases.items()):
        ms = model_connection_search(n, c.model_samples, c.seed)
        rep = conjugacy_graph_check(g, ms.graph, n)
        ok &= rep.equal and ms.unresolved == 0
        rows.append({**rep.to_dict(), "model_unresolved": ms.unresolved})
    return _entry(10, "model-flow conjugacy", ok, EXACT_GRAPH, cases=rows)


def c11_counterexample(lab: Lab):
    c = lab.config
    spec0 = lab.spec
    if not spec0.lam > float(spec0.a(0.0)) or c.diffusion != "default":
        return _entry(11, "non-monotone counterexample", None, SCAN_EXISTENCE)
    rows, hit = [], False
    for delta in c.counterexample_deltas:
        for J in c.counterexample_Js:
            row = {"delta": delta, "J": J}
            try:
                ca = build_counterexample_a(SaturatingDiffusion(), c.lam, delta, J, c.K)
                spec = spec0.with_diffusion(ca)
                recs = scan_fixed_points(spec, 1, "+", c.K)
                pos = [spectrum_of(spec, r).positive_count for r in recs]
                row.update(positive_equilibria=len(recs), D=[r.D for r in recs],
                           unstable=[p for p in pos if p > 0], diffusion=ca.describe())
                hit |= len(recs) >= 3 and any(p > 0 for p in pos)
            except LabError as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return _entry(11, "non-monotone counterexample", hit, SCAN_EXISTENCE, grid=rows)


def c12_reclock(lab: Lab, tol=1e-5):
    c = lab.config
    rng = np.random.default_rng(c.seed + 1)
    gaps = [reclock_check(lab.spec, random_field(rng, c.K), c.reclock_T, tol=c.step_tol)[0]
            for _ in range(c.reclock_fields)]
    return _entry(12, "orbit equivalence by reclocking", max(gaps) < tol, tol, gaps=gaps)


CRITERIA = (c1_counts, c2_symmetry, c3_indices, c4_rank_one, c5_lyapunov, c6_graph, c7_matrix,
            c8_tau, c9_classical, c10_conjugacy, c11_counterexample, c12_reclock)


def verify(config: RunConfig, only=None) -> tuple[dict, int]:
    """Report dict and exit status (0 all pass, 1 some criterion failed).

    Invalid or degenerate parameters surface as the LabError raised by the
    first enumeration, before any criterion runs.
    """
    lab = lab_for(config)
    _ = lab.equilibria
    results = []
    for fn in CRITERIA:
        cid = int(fn.__name__[1:].split("_")[0])
        if only and cid not in only:
            continue
        log.info("criterion %d", cid)
        try:
            results.append(fn(lab))
        except LabError as exc:
            results.append(_entry(cid, fn.__name__, False, None,
                                  error=f"{type(exc).__name__}: {exc}"))
    failed = [r["id"] for r in results if r["status"] == FAIL]
    report = {
        "config": config.to_dict(),
        "N": lab.N,
        "equilibria": [dict(r.to_dict(), profile=None) for r in lab.equilibria],
        "criteria": results,
        "failed": failed,
        "all_pass": not failed,
    }
    return report, (1 if failed else 0)
