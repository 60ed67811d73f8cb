"""Initial-node sampling, k-radius ego-graph sampling and batch merging."""

from __future__ import annotations

import math
import warnings
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .graph import TemporalGraph, TemporalNode

__all__ = [
    "SamplingConfig",
    "EgoGraph",
    "BipartiteLayer",
    "BipartiteStack",
    "derive_rng",
    "node_sampling",
    "sample_ego_graph",
    "sample_ego_graphs",
    "temporal_degrees",
    "initial_node_probabilities",
    "sample_initial_nodes",
    "build_computation_graphs",
]


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def derive_rng(seed: int, *key) -> np.random.Generator:
    """Independent random stream for ``(seed, *key)``.

    String key parts name a substream ("sampling", "noise", ...); integers
    index epochs, batches or draws.  Streams depend only on the key, never on
    the order in which they are created.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(_key(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class SamplingConfig:
    k: int = 2
    th: int | None = 10  # None: no truncation
    n_s: int = 64
    strategy: str = "degree"  # or "uniform"
    seed: int = 0
    t_N: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.th is not None and self.th < 1:
            raise ValueError("th must be >= 1")
        if self.n_s < 1:
            raise ValueError("n_s must be >= 1")
        if self.strategy not in ("degree", "uniform"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.t_N < 0:
            raise ValueError("t_N must be >= 0")


@dataclass(frozen=True)
class EgoGraph:
    """A sampled k-radius temporal ego-graph.

    ``layers[l]`` holds the distinct temporal nodes sampled at hop ``l``
    (``layers[0] == (center,)``).  ``tree_edges`` are ``(l, child, parent)``
    sampling links from hop ``l`` to hop ``l - 1``; a node may sit in several
    layers.  ``edges`` are the graph's temporal edges induced on ``nodes``.
    """

    center: TemporalNode
    k: int
    layers: tuple[tuple[TemporalNode, ...], ...]
    tree_edges: tuple[tuple[int, TemporalNode, TemporalNode], ...]
    graph: TemporalGraph = field(repr=False, compare=False)

    @cached_property
    def nodes(self) -> frozenset:
        return frozenset(u for layer in self.layers for u in layer)

    @cached_property
    def node_list(self) -> tuple[TemporalNode, ...]:
        return tuple(sorted(self.nodes))

    @cached_property
    def children(self) -> dict:
        """``(l, parent) -> sorted children at hop l + 1``."""
        out: dict = {}
        for lvl, child, parent in self.tree_edges:
            out.setdefault((lvl - 1, parent), []).append(child)
        return {key: tuple(sorted(v)) for key, v in out.items()}

    @cached_property
    def edges(self) -> frozenset:
        g = self.graph
        found = set()
        for u in self.nodes:
            for d in g.out_edges(u.node, u.t).tolist():
                if TemporalNode(d, u.t) in self.nodes:
                    found.add((u.node, d, u.t))
        return frozenset(found)


class _LazyRng:
    """``derive_rng(seed, *key)``, built on first draw; most expansions never draw."""

    def __init__(self, seed: int, key: tuple):
        self._args = (seed, *key)
        self._rng = None

    def integers(self, *a, **kw):
        if self._rng is None:
            self._rng = derive_rng(*self._args)
        return self._rng.integers(*a, **kw)


def node_sampling(nodeset: Sequence, threshold: int | None, rng: np.random.Generator) -> list:
    """Keep ``nodeset`` whole if it is small, else ``threshold`` draws with replacement, deduplicated."""
    if threshold is None or len(nodeset) <= threshold:
        return list(nodeset)
    picks = rng.integers(0, len(nodeset), size=threshold)
    return [nodeset[i] for i in dict.fromkeys(picks.tolist())]


def sample_ego_graph(
    g: TemporalGraph, v: TemporalNode, k: int, th: int | None, rng: np.random.Generator, t_N: int = 1
) -> EgoGraph:
    """Recursively sample a k-radius ego-graph around ``v``.

    Every sampled node draws at most ``th`` of its own first-order temporal
    neighbors, down to depth ``k``.  A node reached along several paths is
    expanded once per path, and its children are merged.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    layers: list[dict] = [dict.fromkeys([v])] + [dict() for _ in range(k)]
    tree: dict = {}

    def expand(u: TemporalNode, depth: int) -> None:
        for c in node_sampling(g.neighbors(u, t_N), th, rng):
            layers[depth + 1][c] = None
            tree[(depth + 1, c, u)] = None
            if depth + 1 < k:
                expand(c, depth + 1)

    expand(v, 0)
    return EgoGraph(
        center=v,
        k=k,
        layers=tuple(tuple(sorted(layer)) for layer in layers),
        tree_edges=tuple(sorted(tree)),
        graph=g,
    )


def sample_ego_graphs(
    g: TemporalGraph,
    centers: Sequence[TemporalNode],
    k: int,
    th: int | None,
    seed: int,
    key: tuple,
    t_N: int = 1,
    threads: int = 1,
) -> list[EgoGraph]:
    """Sample one ego-graph per center, each from its own derived stream.

    ``key + (i,)`` names the stream of the ``i``-th center, so the result does
    not depend on ``threads``.
    """

    def one(i: int) -> EgoGraph:
        return sample_ego_graph(g, centers[i], k, th, _LazyRng(seed, (*key, i)), t_N)

    if threads > 1 and len(centers) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(len(centers))))
    return [one(i) for i in range(len(centers))]


def temporal_degrees(g: TemporalGraph, t_N: int = 1) -> np.ndarray:
    """Temporal degree of every temporal node, in ``g.temporal_index`` order."""
    deg = np.zeros(g.num_temporal_nodes, dtype=np.int64)
    for t in range(1, g.T + 1):
        lo, hi = t - t_N, t + t_N
        for node in range(1, g.n + 1):
            nbrs = g.window_neighbors(node, lo, hi)
            if len(nbrs) == 0:
                continue
            total = 0
            for u in nbrs.tolist():
                if u != node:
                    total += len(g.occurrences(u, lo, hi))
            deg[(t - 1) * g.n + node - 1] = total
    return deg


def initial_node_probabilities(degrees: np.ndarray, strategy: str = "degree") -> np.ndarray:
    """Selection probability of every temporal node.

    ``"degree"`` weights each temporal node by its temporal degree; with all
    degrees zero it falls back to uniform and warns.
    """
    degrees = np.asarray(degrees, dtype=np.float64)
    total = degrees.sum()
    if strategy == "uniform":
        return np.full(len(degrees), 1.0 / len(degrees))
    if strategy != "degree":
        raise ValueError(f"unknown strategy {strategy!r}")
    if total <= 0:
        warnings.warn("all temporal degrees are zero; sampling initial nodes uniformly", RuntimeWarning)
        return np.full(len(degrees), 1.0 / len(degrees))
    return degrees / total


def sample_initial_nodes(
    g: TemporalGraph,
    cfg: SamplingConfig,
    rng: np.random.Generator,
    degrees: np.ndarray | None = None,
) -> list[TemporalNode]:
    """Draw ``cfg.n_s`` temporal nodes i.i.d. with replacement."""
    if degrees is None:
        degrees = temporal_degrees(g, cfg.t_N) if cfg.strategy == "degree" else np.zeros(g.num_temporal_nodes)
    p = initial_node_probabilities(degrees, cfg.strategy)
    draws = rng.choice(len(p), size=cfg.n_s, replace=True, p=p)
    return [g.temporal_node(i) for i in draws.tolist()]


@dataclass(frozen=True)
class BipartiteLayer:
    """Messages from hop-``l`` nodes (``sources``) to hop-``l-1`` nodes (``targets``).

    ``src_idx``/``dst_idx`` index into ``sources``/``targets``; edges are
    sorted by ``(dst, src)``.  Every target also receives a self-loop message,
    which is implicit.
    """

    sources: tuple[TemporalNode, ...]
    targets: tuple[TemporalNode, ...]
    src_idx: np.ndarray
    dst_idx: np.ndarray

    def message_edges(self, self_loops: bool = True) -> list[tuple[TemporalNode, TemporalNode]]:
        out = [(self.sources[s], self.targets[d]) for s, d in zip(self.src_idx.tolist(), self.dst_idx.tolist())]
        if self_loops:
            out.extend((u, u) for u in self.targets)
        return out


@dataclass(frozen=True)
class BipartiteStack:
    """k bipartite computation graphs merging a batch of ego-graphs.

    ``sets[l]`` is S_l (``sets[0]`` the centers), ``layers[l - 1]`` the
    bipartite graph S_l -> S_{l-1}, and ``center_rows[i]`` the row of the
    ``i``-th ego's center in S_0.
    """

    k: int
    sets: tuple[tuple[TemporalNode, ...], ...]
    layers: tuple[BipartiteLayer, ...]
    center_rows: tuple[int, ...]
    egos: tuple[EgoGraph, ...]

    @property
    def centers(self) -> tuple[TemporalNode, ...]:
        return self.sets[0]

    def __len__(self) -> int:
        return len(self.egos)


def build_computation_graphs(egos: Sequence[EgoGraph], k: int) -> BipartiteStack:
    """Merge ego-graphs layer by layer, dropping repeated nodes within each layer."""
    egos = tuple(egos)
    if not egos:
        return BipartiteStack(k, tuple(() for _ in range(k + 1)), (), (), ())
    for e in egos:
        if e.k != k:
            raise ValueError(f"ego-graph radius {e.k} does not match k={k}")
    centers = tuple(dict.fromkeys(e.center for e in egos))
    pos0 = {u: i for i, u in enumerate(centers)}
    sets = [centers]
    for lvl in range(1, k + 1):
        sets.append(tuple(sorted({u for e in egos for u in e.layers[lvl]})))
    index = [{u: i for i, u in enumerate(s)} for s in sets]
    links: list[set] = [set() for _ in range(k + 1)]
    for e in egos:
        for lvl, c, p in e.tree_edges:
            links[lvl].add((index[lvl - 1][p], index[lvl][c]))
    layers = []
    for lvl in range(1, k + 1):
        arr = np.array(sorted(links[lvl]), dtype=np.int64).reshape(-1, 2)
        layers.append(BipartiteLayer(sets[lvl], sets[lvl - 1], arr[:, 1].copy(), arr[:, 0].copy()))
    return BipartiteStack(k, tuple(sets), tuple(layers), tuple(pos0[e.center] for e in egos), egos)


def batches_per_epoch(n: int, T: int, n_s: int) -> int:
    return math.ceil(n * T / n_s)
