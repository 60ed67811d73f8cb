"""Temporal graph data model, edge-list I/O and temporal neighborhood queries.

Node ids and timestamp indices are 1-based throughout the public API: a graph
with ``n`` nodes and ``T`` timestamps has nodes ``1..n`` and timestamps
``1..T``.  Edges are directed and may repeat (parallel temporal edges).
"""

from __future__ import annotations

import io
import re
from bisect import bisect_left, bisect_right
from collections import deque
from typing import Iterable, NamedTuple, TextIO

import numpy as np

__all__ = [
    "EdgeListError",
    "EmptyGraphError",
    "TemporalNode",
    "TemporalGraph",
    "StaticSnapshot",
    "parse_edge_list",
    "read_edge_list",
    "format_edge_list",
    "write_edge_list",
    "cumulative_snapshot",
    "temporal_neighborhood",
    "temporal_degree",
]

HEADER_RE = re.compile(r"^#\s*tempograph\s+nodes=(\d+)\s+timestamps=(\d+)")


class EdgeListError(ValueError):
    """A malformed edge-list line."""

    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line.strip()!r}")
        self.lineno = lineno


class EmptyGraphError(ValueError):
    pass


class TemporalNode(NamedTuple):
    node: int
    t: int


class StaticSnapshot:
    """A static view of a temporal graph.

    ``src``/``dst`` keep the directed multi-edge set the snapshot was built
    from; ``edges`` is the simple undirected projection as a ``(k, 2)`` array
    of ``u < v`` pairs (no self-loops, no duplicates), sorted.
    """

    def __init__(self, n: int, src: np.ndarray, dst: np.ndarray):
        self.n = int(n)
        self.src = np.asarray(src, dtype=np.int64)
        self.dst = np.asarray(dst, dtype=np.int64)
        lo = np.minimum(self.src, self.dst)
        hi = np.maximum(self.src, self.dst)
        keep = lo != hi
        pairs = np.stack([lo[keep], hi[keep]], axis=1)
        if len(pairs):
            pairs = np.unique(pairs, axis=0)
        self.edges = pairs.reshape(-1, 2)

    @property
    def degrees(self) -> np.ndarray:
        """Undirected simple degree of every node, indexed by ``node - 1``."""
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0] - 1, 1)
        np.add.at(deg, self.edges[:, 1] - 1, 1)
        return deg

    def __repr__(self) -> str:
        return f"StaticSnapshot(n={self.n}, simple_edges={len(self.edges)}, directed_edges={len(self.src)})"


class TemporalGraph:
    """Immutable directed temporal multigraph.

    Edges are stored sorted by ``(t, src, dst)``.  ``edges_at(t)`` returns the
    slice of one snapshot.  Neighborhood lookups build their indices lazily;
    the graph itself never changes after construction, so sharing an instance
    between reader threads is safe.
    """

    def __init__(self, n: int, T: int, src, dst, t):
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        t = np.asarray(t, dtype=np.int64).ravel()
        if not (len(src) == len(dst) == len(t)):
            raise ValueError("src, dst and t must have equal length")
        if n < 1 or T < 1:
            raise ValueError(f"need n >= 1 and T >= 1, got n={n}, T={T}")
        if len(src):
            if src.min() < 1 or dst.min() < 1 or max(src.max(), dst.max()) > n:
                raise ValueError(f"node ids must lie in 1..{n}")
            if t.min() < 1 or t.max() > T:
                raise ValueError(f"timestamps must lie in 1..{T}")
        order = np.lexsort((dst, src, t))
        self.n = int(n)
        self.T = int(T)
        self.src = src[order]
        self.dst = dst[order]
        self.t = t[order]
        for a in (self.src, self.dst, self.t):
            a.flags.writeable = False
        self.offsets = np.searchsorted(self.t, np.arange(1, self.T + 2), side="left")
        self._nbr_cache: dict = {}

    @property
    def m(self) -> int:
        return len(self.src)

    @property
    def num_temporal_nodes(self) -> int:
        return self.n * self.T

    def edges_at(self, t: int) -> slice:
        return slice(int(self.offsets[t - 1]), int(self.offsets[t]))

    def edge_tuples(self) -> list[tuple[int, int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist(), self.t.tolist()))

    def snapshot_counts(self) -> np.ndarray:
        """Edge count of each snapshot ``1..T``."""
        return np.diff(self.offsets)

    def temporal_index(self, v: TemporalNode) -> int:
        """Row of ``v`` in an ``n*T`` table ordered by timestamp, then node."""
        return (v.t - 1) * self.n + (v.node - 1)

    def temporal_node(self, index: int) -> TemporalNode:
        t, node = divmod(int(index), self.n)
        return TemporalNode(node + 1, t + 1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TemporalGraph):
            return NotImplemented
        return (
            self.n == other.n
            and self.T == other.T
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.t, other.t)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"TemporalGraph(n={self.n}, T={self.T}, m={self.m})"

    # -- lazily built indices -------------------------------------------------

    def _undirected_index(self):
        idx = self.__dict__.get("_undir")
        if idx is None:
            keep = self.src != self.dst
            a = np.concatenate([self.src[keep], self.dst[keep]])
            b = np.concatenate([self.dst[keep], self.src[keep]])
            tt = np.concatenate([self.t[keep], self.t[keep]])
            trip = np.unique(np.stack([a, tt, b], axis=1), axis=0) if len(a) else np.zeros((0, 3), np.int64)
            indptr = np.searchsorted(trip[:, 0], np.arange(1, self.n + 2))
            idx = (indptr, trip[:, 1].copy(), trip[:, 2].copy())
            self.__dict__["_undir"] = idx
        return idx

    def _occurrence_index(self):
        idx = self.__dict__.get("_occ")
        if idx is None:
            pairs = np.stack([np.concatenate([self.src, self.dst]), np.concatenate([self.t, self.t])], axis=1)
            pairs = np.unique(pairs, axis=0) if len(pairs) else np.zeros((0, 2), np.int64)
            indptr = np.searchsorted(pairs[:, 0], np.arange(1, self.n + 2))
            idx = (indptr, pairs[:, 1].copy())
            self.__dict__["_occ"] = idx
        return idx

    def _out_index(self):
        idx = self.__dict__.get("_out")
        if idx is None:
            # edges are already sorted by (t, src, dst)
            keys = (self.t - 1) * self.n + (self.src - 1)
            idx = np.searchsorted(keys, np.arange(self.n * self.T + 1))
            self.__dict__["_out"] = idx
        return idx

    def _index_lists(self):
        # plain-list copies of the indices; faster than numpy for the tiny slices BFS reads
        idx = self.__dict__.get("_lists")
        if idx is None:
            u_ptr, u_t, u_nb = self._undirected_index()
            o_ptr, o_t = self._occurrence_index()
            idx = (u_ptr.tolist(), u_t.tolist(), u_nb.tolist(), o_ptr.tolist(), o_t.tolist())
            self.__dict__["_lists"] = idx
        return idx

    def occurs(self, node: int, t: int) -> bool:
        indptr, times = self._occurrence_index()
        row = times[indptr[node - 1] : indptr[node]]
        i = np.searchsorted(row, t)
        return bool(i < len(row) and row[i] == t)

    def occurrences(self, node: int, lo: int, hi: int) -> np.ndarray:
        """Timestamps in ``[lo, hi]`` at which ``node`` has at least one edge."""
        indptr, times = self._occurrence_index()
        row = times[indptr[node - 1] : indptr[node]]
        return row[np.searchsorted(row, lo, "left") : np.searchsorted(row, hi, "right")]

    def window_neighbors(self, node: int, lo: int, hi: int) -> np.ndarray:
        """Sorted distinct nodes adjacent to ``node`` by an edge timed in ``[lo, hi]``."""
        indptr, times, nbrs = self._undirected_index()
        a, b = indptr[node - 1], indptr[node]
        row_t = times[a:b]
        sel = nbrs[a:b][np.searchsorted(row_t, lo, "left") : np.searchsorted(row_t, hi, "right")]
        return np.unique(sel)

    def out_edges(self, node: int, t: int) -> np.ndarray:
        """Destinations of ``node``'s edges at ``t`` (with multiplicity, sorted)."""
        offs = self._out_index()
        i = (t - 1) * self.n + (node - 1)
        return self.dst[offs[i] : offs[i + 1]]

    def out_degrees(self) -> np.ndarray:
        """Out-edge count of every temporal node, in ``temporal_index`` order."""
        return np.diff(self._out_index())

    def neighbors(self, v: TemporalNode, t_window: int = 1) -> tuple[TemporalNode, ...]:
        """First-order temporal neighbors of ``v`` (cached)."""
        key = (v, t_window)
        hit = self._nbr_cache.get(key)
        if hit is None:
            hit = _neighborhood(self, v, 1, t_window)
            self._nbr_cache[key] = hit
        return hit


# -- edge-list I/O --------------------------------------------------------------


def _lines(text) -> Iterable[str]:
    if isinstance(text, str):
        return io.StringIO(text)
    return text


def parse_edge_list(text: str | TextIO | Iterable[str], binning: int | None = None) -> TemporalGraph:
    """Parse ``src dst timestamp`` lines into a :class:`TemporalGraph`.

    Raw node ids are compacted to ``1..n`` in order of first appearance and
    the distinct raw timestamps are mapped, ascending, to ``1..T``.  With
    ``binning=B`` the raw time range is instead cut into ``B`` equal-width
    bins and ``T = B``.  Lines starting with ``#`` are comments, except that a
    leading ``# tempograph nodes=N timestamps=T`` header (written by
    :func:`format_edge_list`) declares the ids as already compact, so they
    are kept verbatim.
    """
    header = None
    raw = []
    for lineno, line in enumerate(_lines(text), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            hm = HEADER_RE.match(s)
            if hm and header is None and not raw:
                header = (int(hm.group(1)), int(hm.group(2)))
            continue
        parts = s.split()
        if len(parts) != 3:
            raise EdgeListError(lineno, line, f"expected 3 fields, got {len(parts)}")
        try:
            raw.append((int(parts[0]), int(parts[1]), int(parts[2])))
        except ValueError:
            raise EdgeListError(lineno, line, "non-integer field") from None
    if not raw:
        raise EmptyGraphError("edge list contains no edges")
    arr = np.array(raw, dtype=np.int64)

    if header is not None:
        if binning is not None:
            raise ValueError("binning cannot be applied to a file with a tempograph header")
        n, T = header
        return TemporalGraph(n, T, arr[:, 0], arr[:, 1], arr[:, 2])

    ids: dict[int, int] = {}
    for a, b, _ in raw:
        if a not in ids:
            ids[a] = len(ids) + 1
        if b not in ids:
            ids[b] = len(ids) + 1
    src = np.array([ids[a] for a, _, _ in raw], dtype=np.int64)
    dst = np.array([ids[b] for _, b, _ in raw], dtype=np.int64)
    ts = arr[:, 2]
    if binning is None:
        uniq, t = np.unique(ts, return_inverse=True)
        T = len(uniq)
        t = t + 1
    else:
        if binning < 1:
            raise ValueError("binning must be a positive integer")
        T = int(binning)
        lo, hi = ts.min(), ts.max()
        if hi == lo:
            t = np.ones_like(ts)
        else:
            t = np.minimum(((ts - lo) * T) // (hi - lo), T - 1) + 1
    return TemporalGraph(len(ids), T, src, dst, t)


def read_edge_list(path, binning: int | None = None) -> TemporalGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh, binning=binning)


def format_edge_list(g: TemporalGraph, comments: Iterable[str] = ()) -> str:
    """Serialize ``g`` so that :func:`parse_edge_list` reproduces it exactly."""
    out = [f"# tempograph nodes={g.n} timestamps={g.T}\n"]
    out.extend(f"# {c}\n" for c in comments)
    out.extend(f"{a} {b} {t}\n" for a, b, t in g.edge_tuples())
    return "".join(out)


def write_edge_list(g: TemporalGraph, path, comments: Iterable[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_edge_list(g, comments))


# -- static and neighborhood views ------------------------------------------------


def cumulative_snapshot(g: TemporalGraph, t: int) -> StaticSnapshot:
    """All edges with timestamp ``<= t`` as a static snapshot over all ``n`` nodes."""
    if not 1 <= t <= g.T:
        raise ValueError(f"timestamp {t} out of range 1..{g.T}")
    end = int(g.offsets[t])
    return StaticSnapshot(g.n, g.src[:end], g.dst[:end])


def _reach(g: TemporalGraph, v: TemporalNode, d_N: int, t_N: int) -> dict[int, int]:
    """Hop distance of every node within ``d_N`` of ``v.node`` in the window's undirected graph."""
    lo, hi = v.t - t_N, v.t + t_N
    u_ptr, u_t, u_nb = g._index_lists()[:3]
    dist = {v.node: 0}
    queue = deque([v.node])
    while queue:
        u = queue.popleft()
        if dist[u] == d_N:
            continue
        a, b = u_ptr[u - 1], u_ptr[u]
        for w in u_nb[bisect_left(u_t, lo, a, b) : bisect_right(u_t, hi, a, b)]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def _neighborhood(g: TemporalGraph, v: TemporalNode, d_N: int, t_N: int) -> tuple[TemporalNode, ...]:
    lo, hi = v.t - t_N, v.t + t_N
    o_ptr, o_t = g._index_lists()[3:]
    dist = _reach(g, v, d_N, t_N)
    out = []
    for u in sorted(dist):
        if u == v.node:
            continue
        a, b = o_ptr[u - 1], o_ptr[u]
        out.extend(TemporalNode(u, s) for s in o_t[bisect_left(o_t, lo, a, b) : bisect_right(o_t, hi, a, b)])
    return tuple(out)


def temporal_neighborhood(g: TemporalGraph, v: TemporalNode, d_N: int, t_N: int) -> tuple[TemporalNode, ...]:
    """Temporal nodes within ``d_N`` hops and ``t_N`` timestamps of ``v``.

    Distances are measured on the undirected projection of all edges timed in
    ``[t_v - t_N, t_v + t_N]``; a node ``u`` contributes one temporal node
    ``u^s`` for each timestamp ``s`` of that window at which it has an edge.
    Occurrences of ``v``'s own node id are excluded.  The result is sorted.
    """
    if not (1 <= v.node <= g.n and 1 <= v.t <= g.T):
        raise ValueError(f"{v} is not a temporal node of {g}")
    if d_N < 1 or t_N < 0:
        raise ValueError("need d_N >= 1 and t_N >= 0")
    if d_N == 1:
        return g.neighbors(v, t_N)
    return _neighborhood(g, v, d_N, t_N)


def neighborhood_nodes(g: TemporalGraph, v: TemporalNode, d_N: int, t_N: int) -> np.ndarray:
    """Sorted distinct node ids of ``temporal_neighborhood(g, v, d_N, t_N)``."""
    # a node reached through a window edge always occurs in the window
    dist = _reach(g, v, d_N, t_N)
    del dist[v.node]
    return np.array(sorted(dist), dtype=np.int64)


def temporal_degree(g: TemporalGraph, v: TemporalNode, t_N: int = 1) -> int:
    """Number of first-order temporal neighbors of ``v``."""
    return len(temporal_neighborhood(g, v, 1, t_N))
