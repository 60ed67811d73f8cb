import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import components, enumerate_counts, random_temporal_graph, simple_adjacency
from tempograph.graph import StaticSnapshot, TemporalGraph, cumulative_snapshot
from tempograph.metrics import METRICS, compare_series, graph_statistic, metric_series, reduce_errors, relative_errors


def snap(n, pairs):
    src, dst = zip(*pairs) if pairs else ((), ())
    return StaticSnapshot(n, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64))


def test_smallest_instances():
    assert graph_statistic(snap(3, [(1, 2), (2, 3), (3, 1)]), "triangle") == 1
    assert graph_statistic(snap(3, [(1, 2), (2, 3)]), "wedge") == 1
    assert graph_statistic(snap(4, [(1, 2), (1, 3), (1, 4)]), "claw") == 1


def test_mean_degree_and_components():
    assert graph_statistic(snap(3, [(1, 2), (2, 3), (3, 1)]), "mean-degree") == 2
    two = snap(4, [(1, 2), (3, 4)])
    assert graph_statistic(two, "lcc") == 2
    assert graph_statistic(two, "n-components") == 2


def test_isolated_nodes_count_as_components():
    assert graph_statistic(snap(5, [(1, 2)]), "n-components") == 4


def test_ple_star():
    s = snap(5, [(1, 2), (1, 3), (1, 4), (1, 5)])
    assert graph_statistic(s, "ple") == pytest.approx(1 + 5 / math.log(4), abs=1e-12)
    assert graph_statistic(s, "ple") == pytest.approx(4.6068, abs=1e-4)


def test_ple_guards():
    with pytest.warns(RuntimeWarning):
        assert graph_statistic(snap(2, [(1, 2)]), "ple") == math.inf
    with pytest.raises(ValueError):
        graph_statistic(snap(3, []), "ple")
    with pytest.raises(ValueError):
        graph_statistic(snap(3, []), "diameter")


@given(st.integers(0, 10_000))
def test_counts_match_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 16))
    pairs = [tuple(rng.integers(0, n, 2)) for _ in range(int(rng.integers(0, 40)))]
    s = snap(n, [(a + 1, b + 1) for a, b in pairs])
    A = simple_adjacency(n, pairs)
    ref = enumerate_counts(A)
    for metric in ("wedge", "claw", "triangle"):
        assert graph_statistic(s, metric) == ref[metric]
    sizes = components(A)
    assert graph_statistic(s, "lcc") == max(sizes)
    assert graph_statistic(s, "n-components") == len(sizes)
    assert graph_statistic(s, "mean-degree") == pytest.approx(A.sum() / n)


def test_series_lengths_and_constancy():
    g = TemporalGraph(3, 1, [1], [2], [1])
    assert len(metric_series(g, "wedge")) == 1
    g = TemporalGraph(4, 4, [1, 2], [2, 3], [1, 1])
    for metric in ("wedge", "mean-degree", "lcc"):
        vals = metric_series(g, metric).values
        assert len(set(vals)) == 1


def test_ple_series_empty_snapshot_nan():
    g = TemporalGraph(4, 2, [1, 1], [2, 3], [2, 2])
    vals = metric_series(g, "ple").values
    assert math.isnan(vals[0]) and math.isfinite(vals[1])


@given(st.integers(0, 10_000))
def test_wedge_series_nondecreasing(seed):
    g = random_temporal_graph(np.random.default_rng(seed), n_max=10, T_max=6, m_max=40)
    vals = metric_series(g, "wedge").values
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    for t, v in enumerate(vals, start=1):
        A = simple_adjacency(g.n, [(a - 1, b - 1) for a, b, s in g.edge_tuples() if s <= t])
        assert v == enumerate_counts(A)["wedge"]


def test_relative_error_examples():
    r = relative_errors([2, 4], [1, 4])
    assert r == [0.5, 0.0]
    assert reduce_errors(r, "avg") == 0.25
    assert reduce_errors(r, "med") == 0.25
    assert reduce_errors([0.1, 0.9, 0.2], "med") == pytest.approx(0.2)


def test_relative_error_zero_cases():
    r = relative_errors([0, 0, 3], [0, 2, 3])
    assert r[0] == 0.0 and math.isnan(r[1]) and r[2] == 0.0
    with pytest.warns(RuntimeWarning, match="excluded"):
        assert reduce_errors(r) == 0.0
    with pytest.raises(ValueError):
        relative_errors([1], [1, 2])
    with pytest.raises(ValueError):
        reduce_errors([0.1], "max")


@pytest.mark.parametrize("metric", METRICS)
def test_self_comparison_zero(metric):
    g = random_temporal_graph(np.random.default_rng(7), n_max=12, m_max=50)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        assert compare_series(g, g, metric, "avg") == 0
        assert compare_series(g, g, metric, "med") == 0


def test_compare_series_T_mismatch():
    with pytest.raises(ValueError):
        compare_series(TemporalGraph(2, 1, [1], [2], [1]), TemporalGraph(2, 2, [1], [2], [1]), "wedge")


def test_snapshot_degrees():
    s = cumulative_snapshot(TemporalGraph(3, 1, [1, 2, 1, 1], [2, 1, 1, 3], [1] * 4), 1)
    assert s.degrees.tolist() == [2, 1, 1]
