"""Small synthetic temporal graphs with known structure, for tests and demos."""

from __future__ import annotations

import numpy as np

from .graph import TemporalGraph

__all__ = ["planted_community_graph", "random_temporal_graph"]


def planted_community_graph(
    n: int = 100,
    T: int = 5,
    communities: int = 5,
    triangles: int = 6,
    noise: int = 4,
    seed: int = 0,
) -> TemporalGraph:
    """Communities of equal size that close directed triangles at every timestamp.

    Each timestamp, every community draws ``triangles`` random node triples
    and adds the cycle ``a -> b -> c -> a``; ``noise`` extra edges per
    timestamp connect random nodes of different communities.  Repeated
    ``(u, v, t)`` edges are dropped.
    """
    if n < 3 * communities:
        raise ValueError("each community needs at least 3 nodes")
    rng = np.random.default_rng(seed)
    members = np.array_split(rng.permutation(n) + 1, communities)
    block = np.empty(n + 1, dtype=np.int64)
    for c, ids in enumerate(members):
        block[ids] = c
    edges: set[tuple[int, int, int]] = set()
    for t in range(1, T + 1):
        for ids in members:
            for _ in range(triangles):
                a, b, c = (int(x) for x in rng.choice(ids, size=3, replace=False))
                edges.update({(a, b, t), (b, c, t), (c, a, t)})
        added = 0
        while added < noise:
            u, v = (int(x) for x in rng.integers(1, n + 1, size=2))
            if block[u] != block[v] and (u, v, t) not in edges:
                edges.add((u, v, t))
                added += 1
    arr = np.array(sorted(edges), dtype=np.int64)
    return TemporalGraph(n, T, arr[:, 0], arr[:, 1], arr[:, 2])


def random_temporal_graph(n: int, T: int, m: int, seed: int = 0, self_loops: bool = False) -> TemporalGraph:
    """``m`` uniformly random directed temporal edges (duplicates allowed)."""
    rng = np.random.default_rng(seed)
    src = rng.integers(1, n + 1, size=m)
    dst = rng.integers(1, n + 1, size=m)
    if not self_loops and n > 1:
        clash = src == dst
        while clash.any():
            dst[clash] = rng.integers(1, n + 1, size=int(clash.sum()))
            clash = src == dst
    t = rng.integers(1, T + 1, size=m)
    return TemporalGraph(n, T, src, dst, t)
