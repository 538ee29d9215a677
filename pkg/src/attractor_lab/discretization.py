"""Sine-Galerkin representation of Dirichlet fields on (0, pi).

A field is stored as coefficients ``c_k`` of ``sin(k x)``, ``k = 1..K``.
Collocation uses the DST-I grid ``x_i = i*pi/(P+1)``, ``i = 1..P``, on which
the forward and backward transforms are exact inverses for ``P >= K``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft

from .errors import DegenerateFieldError, InvalidInputError, ResolutionError

ZERO_SKIP = 1e-10
DEGENERATE = 1e-12


@dataclass(frozen=True, eq=False)
class Field:
    """Immutable sine-series field. ``coeffs[k-1]`` multiplies ``sin(k x)``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float, copy=True).ravel()
        if c.size == 0:
            raise InvalidInputError("a field needs at least one mode")
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("non-finite field coefficients")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def K(self) -> int:
        return self.coeffs.size

    @classmethod
    def zeros(cls, K: int) -> Field:
        return cls(np.zeros(K))

    @classmethod
    def mode(cls, k: int, K: int, amplitude: float = 1.0) -> Field:
        c = np.zeros(K)
        c[k - 1] = amplitude
        return cls(c)

    def resized(self, K: int) -> Field:
        """Truncate or zero-pad to ``K`` modes."""
        c = np.zeros(K)
        n = min(K, self.K)
        c[:n] = self.coeffs[:n]
        return Field(c)

    def __add__(self, other: Field) -> Field:
        return Field(self.coeffs + other.coeffs)

    def __sub__(self, other: Field) -> Field:
        return Field(self.coeffs - other.coeffs)

    def __neg__(self) -> Field:
        return Field(-self.coeffs)

    def __mul__(self, s: float) -> Field:
        return Field(s * self.coeffs)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        return {"K": self.K, "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Field:
        c = np.asarray(d["coeffs"], dtype=float)
        if c.size != int(d["K"]):
            raise InvalidInputError("coefficient count does not match K")
        return cls(c)


@dataclass(frozen=True, eq=False)
class GridSample:
    """Values at the interior nodes ``x_i = i*pi/(P+1)``."""

    values: np.ndarray

    @property
    def P(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return grid_nodes(self.P)


def wavenumbers(K: int) -> np.ndarray:
    return np.arange(1, K + 1, dtype=float)


def grid_nodes(P: int) -> np.ndarray:
    return np.arange(1, P + 1) * np.pi / (P + 1)


def dealiased_size(K: int) -> int:
    # cubic products reach mode 3K; mode m aliases onto 2(P+1)-m,
    # so P+1 > 2K keeps modes 1..K exact
    return 2 * K


def synthesize(coeffs: np.ndarray, P: int) -> np.ndarray:
    """Array version of :func:`to_grid`; accepts a trailing mode axis."""
    K = coeffs.shape[-1]
    if P < K:
        raise ResolutionError(f"grid of {P} points cannot carry {K} modes")
    if P > K:
        pad = [(0, 0)] * (coeffs.ndim - 1) + [(0, P - K)]
        coeffs = np.pad(coeffs, pad)
    return 0.5 * fft.dst(coeffs, type=1, axis=-1)


def analyze(values: np.ndarray, K: int) -> np.ndarray:
    """Array version of :func:`from_grid`."""
    P = values.shape[-1]
    if P < K:
        raise ResolutionError(f"grid of {P} points cannot resolve {K} modes")
    return fft.dst(values, type=1, axis=-1)[..., :K] / (P + 1)


def to_grid(u: Field, P: int) -> GridSample:
    return GridSample(synthesize(u.coeffs, P))


def from_grid(g: GridSample, K: int) -> Field:
    return Field(analyze(g.values, K))


def project(func, K: int, P: int | None = None) -> Field:
    """Discrete sine projection of a callable sampled on the DST grid."""
    P = P or 4 * K
    return Field(analyze(np.asarray(func(grid_nodes(P)), dtype=float), K))


def evaluate(u: Field, x) -> np.ndarray:
    """Pointwise evaluation of the sine series at arbitrary ``x``."""
    x = np.asarray(x, dtype=float)
    k = wavenumbers(u.K)
    return np.sin(np.multiply.outer(x, k)) @ u.coeffs


def second_derivative(u: Field) -> Field:
    k = wavenumbers(u.K)
    return Field(-(k ** 2) * u.coeffs)


def l2_norm_sq(u: Field) -> float:
    return 0.5 * np.pi * float(u.coeffs @ u.coeffs)


def inner(u: Field, v: Field) -> float:
    """L2(0, pi) inner product."""
    return 0.5 * np.pi * float(u.coeffs @ v.coeffs)


def h1_seminorm_sq(u: Field) -> float:
    k = wavenumbers(u.K)
    return 0.5 * np.pi * float(np.sum((k * u.coeffs) ** 2))


def h1_norm(u: Field) -> float:
    return float(np.sqrt(h1_seminorm_sq(u)))


def h1_distance(u: Field, v: Field) -> float:
    K = max(u.K, v.K)
    return h1_norm(u.resized(K) - v.resized(K))


def coeff_h1_norm(c: np.ndarray) -> np.ndarray:
    """H1_0 norm of raw coefficient arrays (trailing mode axis)."""
    k = wavenumbers(c.shape[-1])
    return np.sqrt(0.5 * np.pi * np.sum((k * c) ** 2, axis=-1))


def grid_integral(values: np.ndarray) -> float:
    """Trapezoid rule on [0, pi] for a function vanishing at both ends.

    Exact for cosine modes below ``2(P+1)``.
    """
    P = values.shape[-1]
    return float(np.pi / (P + 1) * np.sum(values, axis=-1))


def count_sign_changes(values: np.ndarray) -> int:
    v = values[np.abs(values) > ZERO_SKIP]
    if v.size < 2:
        return 0
    s = np.sign(v)
    return int(np.count_nonzero(s[1:] != s[:-1]))


def lap_number(u: Field, P: int | None = None) -> int:
    """Number of interior sign changes of ``u`` sampled on ``P`` nodes."""
    P = P or 4 * u.K
    if P < 4 * u.K:
        raise ResolutionError("zero counting needs P >= 4K")
    values = synthesize(u.coeffs, P)
    if np.max(np.abs(values)) < DEGENERATE:
        raise DegenerateFieldError("field vanishes on the sampling grid")
    return count_sign_changes(values)


@lru_cache(maxsize=16)
def sine_matrix(P: int, K: int) -> np.ndarray:
    """``S[i, k-1] = sin(k x_i)`` on the DST grid (read-only)."""
    S = np.sin(np.multiply.outer(grid_nodes(P), wavenumbers(K)))
    S.setflags(write=False)
    return S


def multiplier_matrix(g_values: np.ndarray, K: int) -> np.ndarray:
    """Galerkin matrix ``(2/pi) int g sin(kx) sin(lx) dx`` from samples of ``g``.

    Exact when ``g`` carries cosine modes below ``2(P+1) - 2K``.
    """
    P = g_values.size
    S = sine_matrix(P, K)
    return (2.0 / (P + 1)) * (S.T * g_values) @ S
