"""Linearization ``L_eps = L0 + eps B`` at an equilibrium and its spectrum.

In sine coefficients ``L0`` is ``-k^2`` on the diagonal plus the Galerkin
matrix of the potential ``lam f'(phi) / a(D)``; ``B v = f(phi) int f(phi) v``
becomes ``(pi/2) b b^T`` with ``b`` the coefficients of ``f(phi)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import discretization as disc
from .discretization import Field
from .equilibria import EquilibriumRecord, with_morse_index
from .errors import DegenerateEquilibriumError, InvalidInputError
from .model import ProblemSpec

TOL_HYP = 1e-6
CLUSTER_TOL = 1e-8


@dataclass(frozen=True)
class SpectrumReport:
    label: tuple
    epsilon: float
    eigenvalues: np.ndarray  # descending
    positive_count: int
    hyperbolic: bool
    gap: float
    clusters: list = field(default_factory=list)
    eigenvectors: np.ndarray | None = field(default=None, repr=False, compare=False)
    tol_hyp: float = TOL_HYP

    def to_dict(self, n_eigs: int = 8) -> dict:
        return {
            "label": {"j": self.label[0], "sign": self.label[1]},
            "epsilon": self.epsilon,
            "leading_eigenvalues": self.eigenvalues[:n_eigs].tolist(),
            "positive_count": self.positive_count,
            "hyperbolic": self.hyperbolic,
            "gap": self.gap,
            "clusters": self.clusters,
            "tol_hyp": self.tol_hyp,
        }


def _resolve(eq: EquilibriumRecord, K: int | None) -> Field:
    K = K or eq.profile.K
    if K < 8:
        raise InvalidInputError("spectrum needs K >= 8")
    return eq.profile.resized(K)


def assemble_L0(spec: ProblemSpec, eq: EquilibriumRecord, K: int | None = None) -> np.ndarray:
    phi = _resolve(eq, K)
    K = phi.K
    D = disc.h1_seminorm_sq(phi)
    P = disc.dealiased_size(K)
    # f'(phi) sin(kx) sin(lx) has cosine modes below 4K, inside the exactness range at P = 2K
    pot = spec.f.derivative(disc.synthesize(phi.coeffs, P))
    L0 = (spec.lam / float(spec.a(D))) * disc.multiplier_matrix(pot, K)
    L0[np.diag_indices(K)] -= disc.wavenumbers(K) ** 2
    return 0.5 * (L0 + L0.T)


def assemble_rank1(spec: ProblemSpec, eq: EquilibriumRecord,
                   K: int | None = None) -> tuple[float, np.ndarray]:
    """``(eps, b)`` with the matrix of ``B`` equal to ``(pi/2) b b^T``."""
    phi = _resolve(eq, K)
    D = disc.h1_seminorm_sq(phi)
    aD = float(spec.a(D))
    eps = -2.0 * spec.lam ** 2 * float(spec.a.derivative(D)) / aD ** 3
    b = disc.analyze(spec.f(disc.synthesize(phi.coeffs, disc.dealiased_size(phi.K))), phi.K)
    return eps, b


def rank1_matrix(eps: float, b: np.ndarray) -> np.ndarray:
    return eps * 0.5 * np.pi * np.outer(b, b)


def _clusters(mu: np.ndarray, tol: float) -> list[list[int]]:
    out, run = [], [0]
    for i in range(1, mu.size):
        if abs(mu[i - 1] - mu[i]) < tol:
            run.append(i)
        else:
            if len(run) > 1:
                out.append(run)
            run = [i]
    if len(run) > 1:
        out.append(run)
    return out


def eigen_spectrum(L0: np.ndarray, epsilon: float, b: np.ndarray, label=(0, "0"),
                   tol_hyp: float = TOL_HYP) -> SpectrumReport:
    L = L0 + rank1_matrix(epsilon, b)
    mu, vecs = np.linalg.eigh(0.5 * (L + L.T))
    order = np.argsort(mu)[::-1]
    mu, vecs = mu[order], vecs[:, order]
    gap = float(np.min(np.abs(mu)))
    return SpectrumReport(
        label=tuple(label), epsilon=float(epsilon), eigenvalues=mu,
        positive_count=int(np.count_nonzero(mu > tol_hyp)), hyperbolic=gap > tol_hyp,
        gap=gap, clusters=_clusters(mu, CLUSTER_TOL), eigenvectors=vecs, tol_hyp=tol_hyp,
    )


def spectrum_of(spec: ProblemSpec, eq: EquilibriumRecord, K: int | None = None,
                tol_hyp: float = TOL_HYP) -> SpectrumReport:
    L0 = assemble_L0(spec, eq, K)
    eps, b = assemble_rank1(spec, eq, K)
    return eigen_spectrum(L0, eps, b, eq.label, tol_hyp)


def conley_index_dim(report: SpectrumReport) -> int:
    """Dimension of the pointed sphere that is the Conley index of a hyperbolic equilibrium."""
    if not report.hyperbolic:
        raise DegenerateEquilibriumError(
            f"equilibrium {report.label} is not hyperbolic (gap {report.gap:.3g})")
    return report.positive_count


def unstable_directions(report: SpectrumReport) -> list[Field]:
    """Unstable eigenvectors normalized to unit H1_0 norm, sign fixed by the largest coefficient."""
    out = []
    for i in range(report.positive_count):
        v = report.eigenvectors[:, i]
        v = v * np.sign(v[np.argmax(np.abs(v))])
        out.append(Field(v / disc.coeff_h1_norm(v)))
    return out


def attach_morse_indices(spec: ProblemSpec, records, K: int | None = None):
    """Records with ``morse_index`` filled in, plus the reports that certified them."""
    reports = [spectrum_of(spec, r, K) for r in records]
    return [with_morse_index(r, conley_index_dim(s)) for r, s in zip(records, reports)], reports
