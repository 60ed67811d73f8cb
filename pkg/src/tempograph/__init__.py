"""Temporal graph autoencoder: learn from an observed temporal graph, generate look-alikes, evaluate them."""

from .checkpoint import load_checkpoint, save_checkpoint
from .generate import generate_ba, generate_er, generate_tgae
from .graph import (
    TemporalGraph,
    TemporalNode,
    cumulative_snapshot,
    parse_edge_list,
    read_edge_list,
    temporal_degree,
    temporal_neighborhood,
    write_edge_list,
)
from .metrics import METRICS, compare_series, graph_statistic, metric_series
from .model import TgaeConfig, TgaeModel, TrainConfig, train
from .motifs import count_temporal_motifs, mmd, tv_distance
from .report import evaluate

__version__ = "0.1.0"

__all__ = [
    "TemporalGraph",
    "TemporalNode",
    "parse_edge_list",
    "read_edge_list",
    "write_edge_list",
    "cumulative_snapshot",
    "temporal_neighborhood",
    "temporal_degree",
    "TgaeConfig",
    "TrainConfig",
    "TgaeModel",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "generate_tgae",
    "generate_er",
    "generate_ba",
    "METRICS",
    "graph_statistic",
    "metric_series",
    "compare_series",
    "count_temporal_motifs",
    "tv_distance",
    "mmd",
    "evaluate",
]
