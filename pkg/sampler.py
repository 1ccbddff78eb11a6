"""
Graph Sampler
Seeded key-ring assignment, shared-key counting and on/off channel draws
"""

from typing import Tuple
from pathlib import Path
import logging

import numpy as np

from models import KeyRingSet, SharedKeyCounts, GraphSample
from schemas import ModelParams

logger = logging.getLogger(__name__)

MASK_64 = 0xFFFF_FFFF_FFFF_FFFF
GOLDEN_GAMMA = 0x9E37_79B9_7F4A_7C15


# ============================================================================
# SEEDING
# ============================================================================

def mix_seed(base_seed: int, trial: int) -> int:
    """
    Per-trial seed from a base seed and a trial index.

    SplitMix64 finaliser applied to base_seed + (trial + 1) * golden gamma,
    all arithmetic modulo 2**64.
    """
    z = (base_seed + (trial + 1) * GOLDEN_GAMMA) & MASK_64
    z = ((z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9) & MASK_64
    z = ((z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB) & MASK_64
    return z ^ (z >> 31)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a 64-bit seed"""
    if not 0 <= seed <= MASK_64:
        raise ValueError(f"Seed must fit in 64 bits, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


# ============================================================================
# KEY RINGS
# ============================================================================

def _draw_key_rings(params: ModelParams, rng: np.random.Generator) -> KeyRingSet:
    if params.K > params.P:
        raise ValueError(f"Key-ring size K={params.K} exceeds pool size P={params.P}")
    rings = np.empty((params.n, params.K), dtype=np.int64)
    for i in range(params.n):
        rings[i] = np.sort(rng.choice(params.P, size=params.K, replace=False))
    return KeyRingSet(rings=rings, pool_size=params.P)


def sample_key_rings(params: ModelParams, seed: int) -> KeyRingSet:
    """n independent uniform K-subsets of the pool {0..P-1}, each sorted"""
    return _draw_key_rings(params, make_rng(seed))


def shared_key_counts(rings: KeyRingSet) -> SharedKeyCounts:
    """
    Count shared keys of every pair that shares at least one key.

    Keys are grouped through an inverted index (key -> holders). Within a
    group of m holders every pair is emitted once, so the cost is the sum of
    m(m-1)/2 over keys rather than n(n-1)/2.
    """
    n = rings.n
    keys = rings.rings.ravel()
    holders = np.repeat(np.arange(n, dtype=np.int64), rings.ring_size)

    # stable sort keeps holders ascending inside each key group
    order = np.argsort(keys, kind="stable")
    keys_sorted = keys[order]
    holders_sorted = holders[order]

    codes = []
    offset = 1
    while offset < len(keys_sorted):
        same = keys_sorted[offset:] == keys_sorted[:-offset]
        if not same.any():
            break
        lo = holders_sorted[:-offset][same]
        hi = holders_sorted[offset:][same]
        codes.append(lo * n + hi)
        offset += 1

    if not codes:
        empty = np.empty((0, 2), dtype=np.int64)
        return SharedKeyCounts(n=n, pairs=empty, counts=np.empty(0, dtype=np.int64))

    unique_codes, counts = np.unique(np.concatenate(codes), return_counts=True)
    pairs = np.stack([unique_codes // n, unique_codes % n], axis=1)
    return SharedKeyCounts(n=n, pairs=pairs, counts=counts.astype(np.int64))


# ============================================================================
# GRAPH SAMPLES
# ============================================================================

def sample_graph_with_rings(params: ModelParams, seed: int) -> Tuple[GraphSample, KeyRingSet]:
    """
    Realise the intersection of the key graph and the on/off channel graph.

    Draw order for a seed: the n key rings in node order, then one uniform
    channel draw per key-sharing pair in lexicographic pair order. A pair
    is an edge iff it shares at least q keys and its draw is below p.
    """
    rng = make_rng(seed)
    rings = _draw_key_rings(params, rng)
    shared = shared_key_counts(rings)
    draws = rng.random(len(shared))
    keep = (shared.counts >= params.q) & (draws < params.p)
    graph = GraphSample(n=params.n, edges=shared.pairs[keep], seed=seed)
    return graph, rings


def sample_graph(params: ModelParams, seed: int) -> GraphSample:
    graph, _ = sample_graph_with_rings(params, seed)
    return graph


# ============================================================================
# EDGE-LIST DUMPS
# ============================================================================

def dump_edge_list(graph: GraphSample, params: ModelParams, path: Path):
    """Write '# n K P p q seed' then one 'i j' line per edge"""
    path = Path(path)
    with open(path, "w") as f:
        f.write(f"# {params.n} {params.K} {params.P} {params.p!r} {params.q} {graph.seed}\n")
        for i, j in graph.edges:
            f.write(f"{i} {j}\n")
    logger.debug("Dumped %d edges to %s", graph.edge_count, path)


def load_edge_list(path: Path) -> Tuple[GraphSample, ModelParams]:
    """Read a graph written by dump_edge_list"""
    path = Path(path)
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 7 or header[0] != "#":
            raise ValueError(f"Malformed edge-list header in {path}")
        n, K, P, p, q, seed = header[1:]
        params = ModelParams(n=int(n), K=int(K), P=int(P), p=float(p), q=int(q))
        rows = [tuple(map(int, line.split())) for line in f if line.strip()]
    edges = np.array(rows, dtype=np.int64).reshape(-1, 2)
    return GraphSample(n=params.n, edges=edges, seed=int(seed)), params

