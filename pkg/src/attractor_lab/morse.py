"""Morse labels, connection graphs and the connection matrix.

Labels follow the Morse decomposition of the attractor: ``(j, sign)`` for
``j = 0..N-1`` stands for the equilibrium ``phi_{j+1}^sign`` and has degree
``j``; the top label stands for zero and has degree ``N``.  Each Morse set
carries homology ``Z`` in exactly its degree, so the connection matrix is an
integer matrix on one generator per label.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import total_ordering

import networkx as nx
import numpy as np

from .errors import InvalidInputError, PreconditionError, StructuralInconsistencyError

TOP = "top"


@total_ordering
@dataclass(frozen=True)
class MorseLabel:
    level: int
    sign: str = TOP  # "+", "-" or TOP
    N: int = 0

    @property
    def is_top(self) -> bool:
        return self.sign == TOP

    @property
    def degree(self) -> int:
        return self.N if self.is_top else self.level

    @property
    def name(self) -> str:
        return "zero" if self.is_top else f"phi_{self.level + 1}^{self.sign}"

    def key(self):
        # matrix order: (0,-), (0,+), (1,-), ..., top
        return (self.degree, 0 if self.sign == "-" else 1)

    def __lt__(self, other):
        return self.key() < other.key()

    def __str__(self):
        return "top" if self.is_top else f"({self.level},{self.sign})"

    def to_dict(self) -> dict:
        if self.is_top:
            return {"label": "top", "degree": self.degree, "name": self.name}
        return {"label": [self.level, self.sign], "degree": self.degree, "name": self.name}

    @classmethod
    def of_equilibrium(cls, eq_label, N: int) -> MorseLabel:
        """``(j, sign)`` of an equilibrium (``j = 0`` for zero) to its Morse label."""
        j, sign = eq_label
        if j == 0:
            return cls(N, TOP, N)
        if not 1 <= j <= N:
            raise InvalidInputError(f"branch {j} outside 1..{N}")
        return cls(j - 1, sign, N)


def all_labels(N: int) -> list[MorseLabel]:
    out = [MorseLabel(j, s, N) for j in range(N) for s in ("-", "+")]
    return out + [MorseLabel(N, TOP, N)]


def build_labels(equilibria) -> dict:
    """Morse label for each equilibrium; degrees must equal the computed Morse indices."""
    recs = list(equilibria)
    N = (len(recs) - 1) // 2
    if len(recs) != 2 * N + 1:
        raise StructuralInconsistencyError(f"{len(recs)} equilibria cannot form 2N+1 Morse sets")
    out = {}
    for r in recs:
        if r.morse_index is None:
            raise PreconditionError(f"{r.name} has no Morse index attached")
        lab = MorseLabel.of_equilibrium(r.label, N)
        if lab.degree != r.morse_index:
            raise StructuralInconsistencyError(
                f"{r.name}: Morse index {r.morse_index} but label degree {lab.degree}")
        if lab in out:
            raise StructuralInconsistencyError(f"two equilibria share label {lab}")
        out[lab] = r
    return dict(sorted(out.items()))


# -- graphs -------------------------------------------------------------------

@dataclass(frozen=True)
class ConnectionGraph:
    N: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(self.edges))
        for s, t in self.edges:
            if s == t:
                raise StructuralInconsistencyError(f"self edge at {s}")
            if s.degree == t.degree:
                raise StructuralInconsistencyError(f"same-level edge {s} -> {t}")
            if s.degree < t.degree:
                raise StructuralInconsistencyError(f"edge {s} -> {t} raises the degree")

    @property
    def nodes(self) -> list[MorseLabel]:
        return all_labels(self.N)

    @classmethod
    def from_equilibrium_edges(cls, N: int, pairs) -> ConnectionGraph:
        return cls(N, frozenset((MorseLabel.of_equilibrium(s, N), MorseLabel.of_equilibrium(t, N))
                                for s, t in pairs))

    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g

    def flow_order(self) -> set:
        """Pairs ``(lower, higher)``: ``lower <_F higher`` when a path runs from higher to lower."""
        closure = nx.transitive_closure_dag(self.digraph())
        return {(t, s) for s, t in closure.edges}

    def diff(self, other: ConnectionGraph) -> tuple[list, list]:
        """``(missing, extra)``: edges of ``other`` absent here, edges here absent from ``other``."""
        return (sorted(other.edges - self.edges), sorted(self.edges - other.edges))

    def sorted_edges(self) -> list:
        return sorted(self.edges)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "nodes": [n.to_dict() for n in self.nodes],
            "edges": [[str(s), str(t)] for s, t in self.sorted_edges()],
        }

    def to_dot(self) -> str:
        lines = ["digraph connections {"]
        for n in self.nodes:
            lines.append(f'  "{n}" [label="{n.name}"];')
        for s, t in self.sorted_edges():
            lines.append(f'  "{s}" -> "{t}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def predicted_graph(N: int) -> ConnectionGraph:
    """Top to every label, and every level to every strictly lower level, both signs."""
    if N < 1:
        raise PreconditionError("predicted graph needs N >= 1")
    labels = all_labels(N)
    edges = {(s, t) for s in labels for t in labels if s.degree > t.degree}
    return ConnectionGraph(N, frozenset(edges))


def admissible_order(N: int) -> set:
    """``(lower, higher)`` pairs of the admissible order: levels ordered by j, all below top."""
    labels = all_labels(N)
    return {(lo, hi) for lo in labels for hi in labels if lo.degree < hi.degree}


# -- connection matrix --------------------------------------------------------

@dataclass(frozen=True)
class GradedMatrix:
    labels: tuple
    matrix: np.ndarray  # integer; column = source, row = target

    @property
    def N(self) -> int:
        return self.labels[-1].N

    def index(self, label: MorseLabel) -> int:
        return self.labels.index(label)

    def entry(self, target: MorseLabel, source: MorseLabel) -> int:
        return int(self.matrix[self.index(target), self.index(source)])

    def nonzero(self) -> list[tuple]:
        """``(source, target, value)`` for every nonzero entry."""
        rows, cols = np.nonzero(self.matrix)
        return [(self.labels[c], self.labels[r], int(self.matrix[r, c]))
                for r, c in zip(rows, cols)]

    def square(self) -> np.ndarray:
        return self.matrix @ self.matrix

    def check_axioms(self) -> dict:
        """Boundary, degree -1 and triangularity in the flow order of the predicted graph."""
        nz = self.nonzero()
        order = admissible_order(self.N)
        return {
            "delta_squared_zero": bool(not np.any(self.square())),
            "degree_minus_one": all(s.degree - t.degree == 1 for s, t, _ in nz),
            "upper_triangular": all((t, s) in order for s, t, _ in nz),
        }

    def with_block_zeroed(self, j: int) -> GradedMatrix:
        """Copy with the block out of degree ``j`` set to zero."""
        m = self.matrix.copy()
        for c, lab in enumerate(self.labels):
            if lab.degree == j:
                m[:, c] = 0
        return GradedMatrix(self.labels, m)

    def to_dict(self) -> dict:
        return {
            "labels": [str(lab) for lab in self.labels],
            "degrees": [lab.degree for lab in self.labels],
            "matrix": self.matrix.tolist(),
        }


D_BLOCK = np.array([[1, 1], [-1, -1]], dtype=np.int64)
D_TOP = np.array([[1], [-1]], dtype=np.int64)


def assemble_connection_matrix(N: int) -> GradedMatrix:
    """Block superdiagonal matrix with ``D_j`` from degree ``j`` to ``j-1`` and ``D_N`` out of top."""
    if N < 1:
        raise PreconditionError("connection matrix needs N >= 1")
    labels = tuple(all_labels(N))
    n = len(labels)
    m = np.zeros((n, n), dtype=np.int64)
    for j in range(1, N):
        r, c = 2 * (j - 1), 2 * j
        m[r:r + 2, c:c + 2] = D_BLOCK
    m[2 * (N - 1):2 * N, n - 1:n] = D_TOP
    return GradedMatrix(labels, m)


# -- consistency ----------------------------------------------------------------

@dataclass
class ConsistencyReport:
    witnessed: bool
    graphs_equal: bool
    order_matches: bool
    missing: list = field(default_factory=list)
    extra: list = field(default_factory=list)
    unwitnessed_entries: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    order_diff: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.witnessed and self.graphs_equal and self.order_matches

    def to_dict(self) -> dict:
        pair = lambda e: [str(e[0]), str(e[1])]  # noqa: E731
        return {
            "ok": self.ok,
            "a_matrix_entries_witnessed": self.witnessed,
            "b_graph_equals_predicted": self.graphs_equal,
            "c_flow_order_matches": self.order_matches,
            "missing_edges": [pair(e) for e in self.missing],
            "extra_edges": [pair(e) for e in self.extra],
            "unwitnessed_entries": [pair(e) for e in self.unwitnessed_entries],
            "order_diff": [pair(e) for e in self.order_diff],
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def check_consistency(found: ConnectionGraph, delta: GradedMatrix,
                      predicted: ConnectionGraph) -> ConsistencyReport:
    if not (found.N == predicted.N == delta.N):
        raise InvalidInputError("graphs and matrix refer to different N")
    unwitnessed = [(s, t) for s, t, _ in delta.nonzero()
                   if s.degree - t.degree == 1 and (s, t) not in found.edges]
    missing, extra = found.diff(predicted)
    nz = {(s, t) for s, t, _ in delta.nonzero()}
    warnings = [f"predicted edge {s} -> {t} has no matrix witness"
                for s, t in predicted.sorted_edges()
                if s.degree - t.degree == 1 and (s, t) not in nz]
    order = found.flow_order()
    target = admissible_order(found.N)
    order_diff = sorted(order ^ target)
    return ConsistencyReport(
        witnessed=not unwitnessed, graphs_equal=not missing and not extra,
        order_matches=not order_diff, missing=missing, extra=extra,
        unwitnessed_entries=unwitnessed, warnings=warnings, order_diff=order_diff,
    )
