"""Static graph statistics on cumulative snapshots and their series comparison."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .graph import StaticSnapshot, TemporalGraph, cumulative_snapshot

__all__ = ["METRICS", "MetricSeries", "graph_statistic", "metric_series", "relative_errors", "compare_series"]

METRICS = ("mean-degree", "claw", "wedge", "triangle", "lcc", "ple", "n-components")


@dataclass(frozen=True)
class MetricSeries:
    metric: str
    values: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.values)


def _adjacency(s: StaticSnapshot) -> sp.csr_matrix:
    e = s.edges - 1
    data = np.ones(2 * len(e), dtype=np.int64)
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    return sp.csr_matrix((data, (rows, cols)), shape=(s.n, s.n))


def _components(s: StaticSnapshot) -> np.ndarray:
    _, labels = connected_components(_adjacency(s), directed=False)
    return labels


def graph_statistic(s: StaticSnapshot, metric: str) -> float:
    """One statistic of the simple undirected projection of ``s`` (all ``n`` nodes count)."""
    deg = s.degrees
    if metric == "mean-degree":
        return float(deg.mean())
    if metric == "wedge":
        return float(sum(d * (d - 1) // 2 for d in deg.tolist()))
    if metric == "claw":
        return float(sum(d * (d - 1) * (d - 2) // 6 for d in deg.tolist()))
    if metric == "triangle":
        A = _adjacency(s)
        # trace(A^3) / 6 without forming A^3
        return float((A @ A).multiply(A).sum() // 6)
    if metric == "lcc":
        return float(np.bincount(_components(s)).max())
    if metric == "n-components":
        return float(len(np.unique(_components(s))))
    if metric == "ple":
        pos = deg[deg > 0]
        if len(pos) == 0:
            raise ValueError("power-law exponent needs at least one node of positive degree")
        total = float(np.log(pos / pos.min()).sum())
        if total == 0.0:
            warnings.warn("all positive degrees are equal; power-law exponent diverges", RuntimeWarning)
            return math.inf
        return 1.0 + len(pos) / total
    raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")


def metric_series(g: TemporalGraph, metric: str) -> MetricSeries:
    """``metric`` on the cumulative snapshot at every timestamp.

    A snapshot on which the power-law exponent is undefined (no edges yet)
    yields NaN rather than aborting the series.
    """
    vals = []
    for t in range(1, g.T + 1):
        s = cumulative_snapshot(g, t)
        if metric == "ple" and len(s.edges) == 0:
            vals.append(math.nan)
            continue
        vals.append(graph_statistic(s, metric))
    return MetricSeries(metric, tuple(vals))


def relative_errors(orig, gen) -> list[float]:
    """Per-timestamp ``|(f - f') / f|``; NaN marks a timestamp excluded from comparison.

    Equal values (including both zero or both infinite) compare as 0.
    """
    orig, gen = list(orig), list(gen)
    if len(orig) != len(gen):
        raise ValueError(f"series lengths differ: {len(orig)} vs {len(gen)}")
    out = []
    for a, b in zip(orig, gen):
        if a == b:
            out.append(0.0)
        elif a == 0 or not (math.isfinite(a) and math.isfinite(b)):
            out.append(math.nan)
        else:
            out.append(abs((a - b) / a))
    return out


def compare_series(g: TemporalGraph, g2: TemporalGraph, metric: str, mode: str = "avg") -> float:
    """Mean (``avg``) or median (``med``) relative error of ``metric`` across snapshots."""
    if g.T != g2.T:
        raise ValueError(f"graphs have different timestamp counts: {g.T} vs {g2.T}")
    r = relative_errors(metric_series(g, metric).values, metric_series(g2, metric).values)
    return reduce_errors(r, mode)


def reduce_errors(r, mode: str = "avg") -> float:
    if mode not in ("avg", "med"):
        raise ValueError("mode must be 'avg' or 'med'")
    valid = [x for x in r if not math.isnan(x)]
    if len(valid) < len(r):
        warnings.warn(f"{len(r) - len(valid)} timestamps excluded from comparison", RuntimeWarning)
    if not valid:
        return math.nan
    return float(np.mean(valid) if mode == "avg" else np.median(valid))
