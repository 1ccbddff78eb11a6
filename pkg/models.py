"""
Graph Models for the q-composite Key Graph Toolkit
In-memory key rings, sampled graphs and degree statistics
"""

from dataclasses import dataclass, field
from typing import Dict, List, Tuple
import enum

import numpy as np


class DesignGoal(str, enum.Enum):
    """Design guideline selector"""
    ALMOST_SURE = "almost_sure"
    WITH_PROB = "with_prob"
    EXACT_K = "exact_k"


class MinDegreeRegime(str, enum.Enum):
    """Shape of the asymptotic minimum-degree distribution"""
    DEGENERATE_ZERO = "degenerate_zero"
    TWO_POINT = "two_point"


class ZeroOneRegime(str, enum.Enum):
    """Zero-one law classification of P[min degree >= k]"""
    ZERO = "zero"
    ONE = "one"
    INTERMEDIATE = "intermediate"


class TargetKind(str, enum.Enum):
    """Observable recorded by a Monte Carlo experiment"""
    MIN_DEGREE_GE = "min_degree_ge"
    MIN_DEGREE_PMF = "min_degree_pmf"
    PHI_COUNT_DIST = "phi_count_dist"
    EDGE_DENSITY = "edge_density"


class FigureId(str, enum.Enum):
    """Reproducible figures"""
    FIG1 = "fig1"
    FIG2 = "fig2"
    FIG3 = "fig3"


# ============================================================================
# KEY RINGS
# ============================================================================

@dataclass(frozen=True, eq=False)
class KeyRingSet:
    """Key rings of all nodes, one sorted row of K distinct keys per node"""
    rings: np.ndarray  # shape (n, K), int64, rows ascending
    pool_size: int

    @property
    def n(self) -> int:
        return int(self.rings.shape[0])

    @property
    def ring_size(self) -> int:
        return int(self.rings.shape[1])

    def ring(self, i: int) -> np.ndarray:
        return self.rings[i]


@dataclass(frozen=True, eq=False)
class SharedKeyCounts:
    """
    Sparse map from unordered node pair to the number of shared keys.

    Only pairs sharing at least one key are present. Pairs are stored in
    canonical lexicographic (i < j) order.
    """
    n: int
    pairs: np.ndarray   # shape (m, 2), int64, rows (i, j) with i < j
    counts: np.ndarray  # shape (m,), int64, all >= 1

    def __len__(self) -> int:
        return int(self.counts.shape[0])

    def get(self, i: int, j: int) -> int:
        """Shared-key count of pair (i, j), 0 if absent"""
        if i == j:
            raise ValueError("A node is not paired with itself")
        lo, hi = (i, j) if i < j else (j, i)
        codes = self.pairs[:, 0] * self.n + self.pairs[:, 1]
        pos = int(np.searchsorted(codes, lo * self.n + hi))
        if pos < len(codes) and codes[pos] == lo * self.n + hi:
            return int(self.counts[pos])
        return 0

    def as_dict(self) -> Dict[Tuple[int, int], int]:
        return {
            (int(i), int(j)): int(c)
            for (i, j), c in zip(self.pairs, self.counts)
        }


# ============================================================================
# GRAPH SAMPLES
# ============================================================================

@dataclass(frozen=True, eq=False)
class GraphSample:
    """
    One realised graph, immutable after construction.

    `edges` holds each undirected edge once as (i, j) with i < j, sorted
    lexicographically. Per-node sorted neighbour lists are kept in CSR form.
    """
    n: int
    edges: np.ndarray
    seed: int
    indptr: np.ndarray = field(init=False, repr=False)
    indices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and np.any(edges[:, 0] >= edges[:, 1]):
            raise ValueError("Edges must be stored as (i, j) with i < j")
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.lexsort((dst, src))
        counts = np.bincount(src, minlength=self.n)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", dst[order])

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def has_edge(self, i: int, j: int) -> bool:
        nbrs = self.neighbors(i)
        pos = int(np.searchsorted(nbrs, j))
        return pos < len(nbrs) and nbrs[pos] == j

    def edge_set(self) -> set:
        return {(int(i), int(j)) for i, j in self.edges}


# ============================================================================
# DEGREE STATISTICS
# ============================================================================

@dataclass(frozen=True)
class DegreeStats:
    """Degree sequence, minimum degree and the degree-h node counts"""
    degrees: List[int]
    min_degree: int
    count_by_degree: Dict[int, int]  # ascending h, zero counts omitted

    @property
    def n(self) -> int:
        return len(self.degrees)

    @property
    def edge_count(self) -> int:
        return sum(self.degrees) // 2

    def phi(self, h: int) -> int:
        """Number of nodes with degree exactly h"""
        return self.count_by_degree.get(h, 0)
