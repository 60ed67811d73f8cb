"""Score-matrix assembly, temporal edge sampling and classical baselines."""

from __future__ import annotations

import logging
import warnings
from typing import Mapping

import numpy as np
import torch

from .graph import TemporalGraph, TemporalNode, neighborhood_nodes
from .model import TgaeModel, _torch_gen, decode_batch, encode_batch
from .sampling import build_computation_graphs, derive_rng, sample_ego_graphs

log = logging.getLogger(__name__)

__all__ = [
    "ScoreMatrix",
    "candidate_nodes",
    "assemble_scores",
    "observed_quotas",
    "sample_temporal_graph",
    "generate_tgae",
    "generate_er",
    "generate_ba",
]


class ScoreMatrix:
    """Sparse ``T x n x n`` averages of decoded edge probabilities.

    Each owner ``(t, u)`` stores candidate columns, the running sum of the
    probabilities of those columns, and how many rows contributed.  Columns
    not stored score 0.
    """

    def __init__(self, n: int, T: int):
        self.n, self.T = n, T
        self._rows: dict[TemporalNode, list] = {}

    def add(self, owner: TemporalNode, cols: np.ndarray, probs: np.ndarray) -> None:
        entry = self._rows.get(owner)
        if entry is None:
            self._rows[owner] = [np.asarray(cols, dtype=np.int64).copy(), np.asarray(probs, dtype=np.float64).copy(), 1]
            return
        if not np.array_equal(entry[0], cols):
            raise ValueError(f"candidate columns of {owner} changed between contributions")
        entry[1] += probs
        entry[2] += 1

    def row(self, owner: TemporalNode) -> tuple[np.ndarray, np.ndarray]:
        """``(columns, averaged scores)`` of ``owner``; empty if nothing was stored."""
        entry = self._rows.get(owner)
        if entry is None:
            return np.zeros(0, np.int64), np.zeros(0)
        return entry[0], entry[1] / entry[2]

    def count(self, owner: TemporalNode) -> int:
        entry = self._rows.get(owner)
        return 0 if entry is None else entry[2]

    def score(self, t: int, u: int, v: int) -> float:
        cols, vals = self.row(TemporalNode(u, t))
        i = np.searchsorted(cols, v)
        return float(vals[i]) if i < len(cols) and cols[i] == v else 0.0

    def owners(self) -> list[TemporalNode]:
        return sorted(self._rows)

    def __len__(self) -> int:
        return len(self._rows)


_ROW_BLOCK = 16


def candidate_nodes(g: TemporalGraph, owner: TemporalNode, d_N: int, t_N: int, widen: bool = False) -> np.ndarray:
    """Node ids ``owner`` may link to: its temporal neighborhood's nodes, or all nodes."""
    if widen:
        return np.arange(1, g.n + 1)
    return neighborhood_nodes(g, owner, d_N, t_N)


def assemble_scores(
    m: TgaeModel,
    g: TemporalGraph,
    passes: int = 1,
    seed: int = 0,
    owners: set | None = None,
    widen: bool = False,
    batch_size: int = 512,
    threads: int = 1,
) -> ScoreMatrix:
    """Average decoded rows over ``passes`` sweeps with every temporal node as an ego center.

    Only columns in each owner's candidate set are stored.  When ``owners`` is
    given, rows owned by other temporal nodes are skipped (their scores are
    never needed for sampling).
    """
    if passes < 1:
        raise ValueError("passes must be >= 1")
    cfg = m.cfg
    S = ScoreMatrix(g.n, g.T)
    cand_cache: dict[TemporalNode, np.ndarray] = {}

    def cands(o: TemporalNode) -> np.ndarray:
        c = cand_cache.get(o)
        if c is None:
            c = candidate_nodes(g, o, cfg.k, cfg.t_N, widen)
            cand_cache[o] = c
        return c

    keep = None if owners is None else owners.__contains__
    total = g.num_temporal_nodes
    buf = torch.empty(_ROW_BLOCK, g.n, dtype=m.W_dec.dtype)
    work = torch.empty_like(buf)
    with torch.no_grad():
        for p in range(passes):
            for start in range(0, total, batch_size):
                centers = [g.temporal_node(i) for i in range(start, min(start + batch_size, total))]
                egos = sample_ego_graphs(g, centers, cfg.k, cfg.effective_th, seed, ("assemble", p, start), cfg.t_N, threads)
                if cfg.k > 1:
                    egos = [e for e in egos if len(e.layers[1])]
                elif keep is not None:
                    egos = [e for e in egos if keep(e.center)]
                if not egos:
                    continue
                stack = build_computation_graphs(egos, cfg.k)
                h = encode_batch(m, stack)
                out = decode_batch(m, stack, h, _torch_gen(seed, "assemble-noise", p, start), keep)
                if not out.owners:
                    continue
                # small row blocks keep the n-wide logits in cache; one reused
                # buffer avoids heap fragmentation from repeated large allocations
                for lo in range(0, len(out.owners), _ROW_BLOCK):
                    rows = out.hidden[lo : lo + _ROW_BLOCK]
                    logits = torch.addmm(out.b, rows, out.W, out=buf[: len(rows)])
                    mx = logits.amax(dim=-1, keepdim=True)
                    shifted = torch.sub(logits, mx, out=work[: len(rows)]).exp_()
                    lse = (mx.squeeze(-1) + shifted.sum(dim=-1).log_()).numpy()
                    logits = logits.numpy()
                    for r, o in enumerate(out.owners[lo : lo + _ROW_BLOCK]):
                        c = cands(o)
                        S.add(o, c, np.exp(logits[r, c - 1] - lse[r]))
    return S


def observed_quotas(g: TemporalGraph) -> dict[TemporalNode, int]:
    """Out-edge count of every temporal node that has out-edges."""
    deg = g.out_degrees()
    return {g.temporal_node(i): int(deg[i]) for i in np.flatnonzero(deg).tolist()}


def sample_temporal_graph(
    S: ScoreMatrix,
    target_m: int,
    quotas: Mapping[TemporalNode, int],
    rng: np.random.Generator,
) -> TemporalGraph:
    """Draw each owner's quota of distinct destinations from its normalized scores.

    Owners whose positive-score support is smaller than the quota are topped
    up uniformly from the nodes not yet drawn, with a warning.
    """
    if sum(quotas.values()) != target_m:
        raise ValueError(f"quotas sum to {sum(quotas.values())}, expected {target_m}")
    src, dst, ts = [], [], []
    short = 0
    for owner in sorted(quotas):
        q = int(quotas[owner])
        if q <= 0:
            continue
        if q > S.n:
            raise ValueError(f"{owner} needs {q} distinct destinations but there are only {S.n} nodes")
        cols, vals = S.row(owner)
        support = vals > 0
        cols, vals = cols[support], vals[support]
        take = min(q, len(cols))
        chosen = []
        if take:
            chosen = rng.choice(cols, size=take, replace=False, p=vals / vals.sum()).tolist()
        if take < q:
            short += 1
            used = set(chosen)
            pool = [v for v in range(1, S.n + 1) if v not in used and v != owner.node]
            if len(pool) < q - take:
                pool.append(owner.node)
            chosen.extend(rng.choice(np.array(pool), size=q - take, replace=False).tolist())
        src.extend([owner.node] * q)
        dst.extend(chosen)
        ts.extend([owner.t] * q)
    if short:
        warnings.warn(f"{short} temporal nodes had fewer scored candidates than their quota; filled uniformly", RuntimeWarning)
    return TemporalGraph(S.n, S.T, src, dst, ts)


def generate_tgae(
    m: TgaeModel,
    g: TemporalGraph,
    seed: int = 0,
    passes: int = 1,
    widen: bool = False,
    threads: int = 1,
) -> TemporalGraph:
    """Assemble scores from ``m`` and sample a graph with ``g``'s per-node out-degrees."""
    if (g.n, g.T) != (m.cfg.n, m.cfg.T):
        raise ValueError(f"model is sized for n={m.cfg.n}, T={m.cfg.T} but graph has n={g.n}, T={g.T}")
    quotas = observed_quotas(g)
    S = assemble_scores(m, g, passes=passes, seed=seed, owners=set(quotas), widen=widen, threads=threads)
    return sample_temporal_graph(S, g.m, quotas, derive_rng(seed, "edges"))


def generate_er(n: int, per_snapshot_m, rng: np.random.Generator) -> TemporalGraph:
    """Uniform G(n, m_t) directed snapshots without self-loops."""
    counts = [int(c) for c in per_snapshot_m]
    cap = n * (n - 1)
    src, dst, ts = [], [], []
    for t, mt in enumerate(counts, start=1):
        if mt > cap:
            raise ValueError(f"snapshot {t} asks for {mt} edges but only {cap} directed pairs exist")
        codes = rng.choice(cap, size=mt, replace=False)
        u, r = np.divmod(codes, n - 1)
        v = r + (r >= u)  # skip the diagonal
        src.append(u + 1)
        dst.append(v + 1)
        ts.append(np.full(mt, t))
    return TemporalGraph(n, len(counts), np.concatenate(src), np.concatenate(dst), np.concatenate(ts))


def generate_ba(n: int, m_attach: int, T: int, rng: np.random.Generator) -> TemporalGraph:
    """Independent preferential-attachment snapshots.

    Each snapshot starts from a clique on ``m_attach`` nodes; every later
    node links to ``m_attach`` distinct earlier nodes chosen with probability
    proportional to degree (uniformly while all degrees are zero).
    """
    if m_attach < 1 or m_attach >= n:
        raise ValueError(f"need 1 <= m_attach < n, got m_attach={m_attach}, n={n}")
    src, dst, ts = [], [], []
    for t in range(1, T + 1):
        ends: list[int] = []  # every edge endpoint once: degree-weighted urn
        for a in range(m_attach):
            for b in range(a + 1, m_attach):
                src.append(b + 1)
                dst.append(a + 1)
                ts.append(t)
                ends.extend((a, b))
        for new in range(m_attach, n):
            targets: dict[int, None] = {}
            while len(targets) < m_attach:
                if ends:
                    cand = ends[int(rng.integers(len(ends)))]
                else:
                    cand = int(rng.integers(new))
                targets[cand] = None
            for v in targets:
                src.append(new + 1)
                dst.append(v + 1)
                ts.append(t)
                ends.extend((new, v))
    return TemporalGraph(n, T, src, dst, ts)
