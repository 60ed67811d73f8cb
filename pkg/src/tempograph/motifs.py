"""3-edge delta-temporal motif census and motif-distribution distances.

A motif instance is an ordered triple of temporal edges ``e1 < e2 < e3`` (in
stored ``(t, src, dst)`` order) spanning at most 3 nodes with
``t3 - t1 <= delta``.  Self-loops never take part.  Instances are classified by
relabeling nodes in order of first appearance: ``e1`` becomes ``0 -> 1`` and
the class is fixed by the relabeled ``e2`` and ``e3``, giving 36 classes
(4 two-node, 24 star and 8 triangle classes).

Counting avoids enumerating triples: every instance lives on a single node
pair, on two pairs sharing a center node, or on a triangle, and each case is
counted with a sliding window over that group's edge sequence.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .graph import TemporalGraph

__all__ = [
    "EDGE_SLOTS",
    "MOTIF_CLASSES",
    "MOTIF_NAMES",
    "UndefinedDistributionError",
    "MotifHistogram",
    "classify_triple",
    "default_delta",
    "count_temporal_motifs",
    "tv_distance",
    "mmd",
]

EDGE_SLOTS = ((0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1))
MOTIF_CLASSES = tuple(((0, 1), e2, e3) for e2 in EDGE_SLOTS for e3 in EDGE_SLOTS)
MOTIF_NAMES = tuple("-".join(f"{a}{b}" for a, b in c) for c in MOTIF_CLASSES)
_SLOT = {e: i for i, e in enumerate(EDGE_SLOTS)}


class UndefinedDistributionError(ValueError):
    pass


def classify_triple(e1, e2, e3) -> int | None:
    """Class index of three directed edges in time order, or None if they span 4+ nodes."""
    label = {e1[0]: 0}
    label.setdefault(e1[1], 1)
    if len(label) < 2:
        return None
    for x in (*e2, *e3):
        if x not in label:
            label[x] = len(label)
    if len(label) > 3:
        return None
    a = (label[e2[0]], label[e2[1]])
    b = (label[e3[0]], label[e3[1]])
    if a not in _SLOT or b not in _SLOT:
        return None
    return _SLOT[a] * 6 + _SLOT[b]


def default_delta(T: int) -> int:
    return max(1, math.ceil(T / 10))


@dataclass(frozen=True)
class MotifHistogram:
    counts: np.ndarray
    delta: int

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def normalized(self) -> np.ndarray:
        tot = self.counts.sum()
        if tot == 0:
            return np.zeros(len(self.counts))
        return self.counts / tot

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "total": self.total,
            "counts": {name: int(c) for name, c in zip(MOTIF_NAMES, self.counts)},
        }


# -- window counters ------------------------------------------------------------------------


def _window_triples(times, labels, L: int, delta: int) -> np.ndarray:
    """``out[a, b, c]`` = number of ``i < j < k`` labelled ``a, b, c`` with ``t_k - t_i <= delta``."""
    c1 = [0] * L
    c2 = [[0] * L for _ in range(L)]
    c3 = np.zeros((L, L, L), dtype=np.int64)
    left = 0
    rng = range(L)
    for k, (tk, lk) in enumerate(zip(times, labels)):
        while times[left] < tk - delta:
            li = labels[left]
            c1[li] -= 1
            row = c2[li]
            for b in rng:
                row[b] -= c1[b]
            left += 1
        for a in rng:
            ra = c2[a]
            for b in rng:
                if ra[b]:
                    c3[a, b, lk] += ra[b]
        for a in rng:
            c2[a][lk] += c1[a]
        c1[lk] += 1
    return c3


def _star_counts(events, delta: int):
    """Star triples around one center.

    ``events`` are ``(time, neighbor, direction)`` in edge order, direction 0
    meaning center -> neighbor.  Returns ``(same12, same13)`` arrays indexed by
    the three directions: triples whose first two edges share a neighbor the
    third lacks, and triples whose first and third edges share a neighbor the
    second lacks.
    """
    same12 = np.zeros((2, 2, 2), dtype=np.int64)
    same13 = np.zeros((2, 2, 2), dtype=np.int64)
    G = [0, 0]  # events inserted so far, by direction
    cx: dict = {}  # neighbor -> window count by direction
    pair_same = [[0, 0], [0, 0]]  # window pairs i<j with one neighbor
    pair_same_x: dict = {}
    acc: dict = {}  # neighbor -> sum over its window events of G right after insertion
    g_after = []
    left = 0
    for k, (tk, z, d3) in enumerate(events):
        while events[left][0] < tk - delta:
            _, x, d = events[left]
            gi = g_after[left]
            cxx = cx[x]
            cxx[d] -= 1
            pair_same[d][0] -= cxx[0]
            pair_same[d][1] -= cxx[1]
            psx = pair_same_x[x]
            psx[d][0] -= cxx[0]
            psx[d][1] -= cxx[1]
            ax = acc[x]
            ax[d][0] -= gi[0]
            ax[d][1] -= gi[1]
            left += 1
        czz = cx.get(z)
        psz = pair_same_x.get(z)
        az = acc.get(z)
        for d1 in (0, 1):
            for d2 in (0, 1):
                same_z = psz[d1][d2] if psz is not None else 0
                v = pair_same[d1][d2] - same_z
                if v:
                    same12[d1, d2, d3] += v
                if czz is not None:
                    v = czz[d1] * G[d2] - az[d1][d2] - same_z
                    if v:
                        same13[d1, d2, d3] += v
        if czz is None:
            czz = cx[z] = [0, 0]
            psz = pair_same_x[z] = [[0, 0], [0, 0]]
            az = acc[z] = [[0, 0], [0, 0]]
        pair_same[0][d3] += czz[0]
        pair_same[1][d3] += czz[1]
        psz[0][d3] += czz[0]
        psz[1][d3] += czz[1]
        czz[d3] += 1
        G[d3] += 1
        g_after.append((G[0], G[1]))
        az[d3][0] += G[0]
        az[d3][1] += G[1]
    return same12, same13


def _class_tables():
    A, B = 1, 2
    pair = np.zeros((2, 2, 2), dtype=np.int64)
    for d in np.ndindex(2, 2, 2):
        es = [(A, B) if x == 0 else (B, A) for x in d]
        pair[d] = classify_triple(*es)
    C, X, Y = 0, 1, 2

    def star_edge(nbr, d):
        return (C, nbr) if d == 0 else (nbr, C)

    star = {}
    for name, nbrs in (("xxy", (X, X, Y)), ("xyy", (X, Y, Y)), ("xyx", (X, Y, X))):
        tab = np.zeros((2, 2, 2), dtype=np.int64)
        for d in np.ndindex(2, 2, 2):
            tab[d] = classify_triple(*(star_edge(nb, di) for nb, di in zip(nbrs, d)))
        star[name] = tab
    # triangle pairs 0:(a,b) 1:(b,c) 2:(a,c), direction 0 = lower -> higher
    ends = ((0, 1), (1, 2), (0, 2))
    tri = np.full((6, 6, 6), -1, dtype=np.int64)
    for l1, l2, l3 in np.ndindex(6, 6, 6):
        if len({l1 // 2, l2 // 2, l3 // 2}) != 3:
            continue
        es = []
        for lab in (l1, l2, l3):
            lo, hi = ends[lab // 2]
            es.append((lo, hi) if lab % 2 == 0 else (hi, lo))
        tri[l1, l2, l3] = classify_triple(*es)
    return pair, star, tri


_PAIR_CLASS, _STAR_CLASS, _TRI_CLASS = _class_tables()


def count_temporal_motifs(g: TemporalGraph, delta: int) -> MotifHistogram:
    """Exact 36-class census of 3-edge delta-temporal motifs."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    counts = np.zeros(36, dtype=np.int64)
    pair_events: dict = defaultdict(list)
    node_events: dict = defaultdict(list)
    nbrs: dict = defaultdict(set)
    for s, d, t in g.edge_tuples():
        if s == d:
            continue
        a, b = (s, d) if s < d else (d, s)
        pair_events[(a, b)].append((t, 0 if s == a else 1))
        node_events[s].append((t, d, 0))
        node_events[d].append((t, s, 1))
        nbrs[a].add(b)
        nbrs[b].add(a)

    for ev in pair_events.values():
        if len(ev) < 3:
            continue
        c3 = _window_triples([e[0] for e in ev], [e[1] for e in ev], 2, delta)
        np.add.at(counts, _PAIR_CLASS.ravel(), c3.ravel())

    for ev in node_events.values():
        if len(ev) < 3:
            continue
        same12, same13 = _star_counts(ev, delta)
        rev = [(-t, x, d) for t, x, d in reversed(ev)]
        same12_rev, _ = _star_counts(rev, delta)
        same23 = same12_rev.transpose(2, 1, 0)
        np.add.at(counts, _STAR_CLASS["xxy"].ravel(), same12.ravel())
        np.add.at(counts, _STAR_CLASS["xyy"].ravel(), same23.ravel())
        np.add.at(counts, _STAR_CLASS["xyx"].ravel(), same13.ravel())

    tri_mask = _TRI_CLASS >= 0
    for a in sorted(nbrs):
        na = nbrs[a]
        for b in sorted(x for x in na if x > a):
            for c in sorted(x for x in na & nbrs[b] if x > b):
                merged = []
                for p, key in enumerate(((a, b), (b, c), (a, c))):
                    merged.extend((t, i, 2 * p + o) for i, (t, o) in enumerate(pair_events[key]))
                # restore global edge order: time, then the order within the stored edges
                merged.sort(key=lambda e: (e[0], _edge_rank(e, a, b, c)))
                c3 = _window_triples([e[0] for e in merged], [e[2] for e in merged], 6, delta)
                np.add.at(counts, _TRI_CLASS[tri_mask], c3[tri_mask])
    return MotifHistogram(counts, int(delta))


def _edge_rank(e, a, b, c):
    # stored edge order within a timestamp is (src, dst); then position among parallel copies
    _, i, lab = e
    lo, hi = ((a, b), (b, c), (a, c))[lab // 2]
    src, dst = (lo, hi) if lab % 2 == 0 else (hi, lo)
    return (src, dst, i)


def tv_distance(p: MotifHistogram | np.ndarray, q: MotifHistogram | np.ndarray) -> float:
    """Total variation ``0.5 * sum |p_i - q_i|`` between two motif distributions."""
    pv = _distribution(p)
    qv = _distribution(q)
    if len(pv) != len(qv):
        raise ValueError("histograms have different class counts")
    return 0.5 * float(np.abs(pv - qv).sum())


def _distribution(h) -> np.ndarray:
    v = np.asarray(h.counts if isinstance(h, MotifHistogram) else h, dtype=np.float64)
    tot = v.sum()
    if tot <= 0:
        raise UndefinedDistributionError("motif histogram is empty; its distribution is undefined")
    return v / tot


def mmd(P, Q, sigma: float = 1.0) -> float:
    """Biased squared MMD between two sets of motif histograms.

    Uses the kernel ``exp(-TV(x, y)^2 / (2 sigma^2))``; clamped at 0.
    """
    if not P or not Q:
        raise ValueError("both histogram sets must be nonempty")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    Pd = [_distribution(x) for x in P]
    Qd = [_distribution(x) for x in Q]

    def kmean(X, Y):
        tot = 0.0
        for x in X:
            for y in Y:
                tv = 0.5 * float(np.abs(x - y).sum())
                tot += math.exp(-(tv * tv) / (2.0 * sigma * sigma))
        return tot / (len(X) * len(Y))

    return max(0.0, kmean(Pd, Pd) + kmean(Qd, Qd) - 2.0 * kmean(Pd, Qd))
