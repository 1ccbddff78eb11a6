"""
Degree Metrics
Degree sequence, minimum degree and degree-h node counts of a sampled graph
"""

import numpy as np

from models import GraphSample, DegreeStats


def degree_stats(g: GraphSample) -> DegreeStats:
    """Exact degree sequence and its aggregates"""
    degrees = g.degrees()
    histogram = np.bincount(degrees) if g.n else np.zeros(0, dtype=np.int64)
    count_by_degree = {
        int(h): int(c) for h, c in enumerate(histogram) if c
    }
    return DegreeStats(
        degrees=[int(d) for d in degrees],
        min_degree=int(degrees.min()) if g.n else 0,
        count_by_degree=count_by_degree,
    )


def indicator_min_degree_at_least(stats: DegreeStats, k: int) -> bool:
    """True iff the minimum degree is at least k"""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return stats.min_degree >= k


def min_degree_at_least_by_counts(stats: DegreeStats, k: int) -> bool:
    """Same indicator read from the counts: no node has degree below k"""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return all(stats.phi(h) == 0 for h in range(k))


def edge_density(stats: DegreeStats) -> float:
    """|E| / C(n, 2)"""
    pairs = stats.n * (stats.n - 1) // 2
    return stats.edge_count / pairs if pairs else 0.0
