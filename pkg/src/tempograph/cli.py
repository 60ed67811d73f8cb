"""``tempograph`` command line: train, generate, evaluate, motifs, stats.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings

import torch

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, dump_config, load_config
from .generate import generate_ba, generate_er, generate_tgae
from .graph import EdgeListError, EmptyGraphError, read_edge_list, write_edge_list
from .metrics import METRICS, metric_series
from .model import TrainingDivergedError, train
from .motifs import count_temporal_motifs, default_delta
from .report import evaluate, write_report, write_series_csv
from .sampling import derive_rng

log = logging.getLogger("tempograph")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("TEMPOGRAPH_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"TEMPOGRAPH_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise UsageError("TEMPOGRAPH_THREADS must be >= 1")
        return value
    return 1


def _read_graph(path, binning=None):
    if not os.path.isfile(path):
        raise UsageError(f"dataset not found: {path}")
    return read_edge_list(path, binning=binning)


def _graph_seed(seed: int, i: int) -> int:
    return seed if i == 0 else int(derive_rng(seed, "graph", i).integers(2**31))


def _output_paths(out: str, count: int) -> list[str]:
    if count == 1:
        return [out]
    root, ext = os.path.splitext(out)
    return [f"{root}_{i + 1}{ext}" for i in range(count)]


# -- commands ------------------------------------------------------------------------------


def cmd_train(args) -> int:
    overrides = {
        "dataset": args.dataset,
        "out_dir": args.out_dir,
        "seed": args.seed,
        "epochs": args.epochs,
        "variant": args.variant,
        "threads": args.threads if args.threads is not None else (_threads(args) if "TEMPOGRAPH_THREADS" in os.environ else None),
    }
    cfg = load_config(args.config, overrides)
    g = read_edge_list(cfg.dataset, binning=cfg.binning)
    mcfg = cfg.model_config(g.n, g.T)
    os.makedirs(cfg.out_dir, exist_ok=True)

    m, history = train(g, mcfg, cfg.train_config())
    ckpt = os.path.join(cfg.out_dir, "model.ckpt")
    save_checkpoint(m, ckpt, {"seed": cfg.seed, "epochs": cfg.epochs})
    with open(os.path.join(cfg.out_dir, "loss.csv"), "w", encoding="utf-8") as fh:
        fh.write(f"# seed={cfg.seed}\n")
        fh.write("epoch,loss,kl\n")
        for rec in history:
            fh.write(f"{rec['epoch']},{rec['loss']!r},{rec['kl']!r}\n")
    with open(os.path.join(cfg.out_dir, "config.resolved.toml"), "w", encoding="utf-8") as fh:
        fh.write(f"# seed={cfg.seed}\n")
        fh.write(dump_config(cfg))
    print(f"wrote {ckpt} (final loss {history[-1]['loss']:.6f})")
    return EXIT_OK


def cmd_generate(args) -> int:
    g = _read_graph(args.dataset, args.binning)
    threads = _threads(args)
    paths = _output_paths(args.out, args.num_graphs)
    model = None
    if args.baseline is None:
        if args.checkpoint is None:
            raise UsageError("generate needs --checkpoint unless --baseline is given")
        if not os.path.isfile(args.checkpoint):
            raise UsageError(f"checkpoint not found: {args.checkpoint}")
        model = load_checkpoint(args.checkpoint)
        if (model.cfg.n, model.cfg.T) != (g.n, g.T):
            raise UsageError(
                f"checkpoint is sized for n={model.cfg.n}, T={model.cfg.T} but dataset has n={g.n}, T={g.T}"
            )
    for i, path in enumerate(paths):
        seed = _graph_seed(args.seed, i)
        rng = derive_rng(seed, "baseline")
        if args.baseline == "er":
            h = generate_er(g.n, g.snapshot_counts(), rng)
        elif args.baseline == "ba":
            m_attach = min(g.n - 1, max(1, round(float(g.snapshot_counts().mean()) / g.n)))
            h = generate_ba(g.n, m_attach, g.T, rng)
        else:
            h = generate_tgae(model, g, seed=seed, passes=args.passes, widen=args.widen, threads=threads)
        source = args.baseline or "tgae"
        write_edge_list(h, path, comments=[f"seed={seed}", f"generator={source}"])
        print(f"wrote {path} ({h.m} edges)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    g = _read_graph(args.original)
    gens = [_read_graph(p) for p in args.generated]
    for p, h in zip(args.generated, gens):
        if h.T != g.T:
            raise UsageError(f"{p} has T={h.T} timestamps but the original has T={g.T}")
    report = evaluate(g, gens, delta=args.delta, sigma=args.sigma, seed=args.seed)
    write_report(report, args.report)
    csv_dir = args.csv_dir or os.path.join(os.path.dirname(os.path.abspath(args.report)), "series")
    write_series_csv(report, csv_dir)
    for metric, v in report["metrics"].items():
        print(f"{metric:>13}  f_avg={_show(v['f_avg'])}  f_med={_show(v['f_med'])}")
    print(f"{'motif MMD':>13}  {_show(report['mmd'])}")
    return EXIT_OK


def _show(v) -> str:
    return "n/a" if v is None else f"{v:.6g}"


def cmd_motifs(args) -> int:
    g = _read_graph(args.graph)
    delta = default_delta(g.T) if args.delta is None else args.delta
    h = count_temporal_motifs(g, delta)
    text = json.dumps(h.as_dict(), indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_stats(args) -> int:
    g = _read_graph(args.graph)
    metrics = args.metric or list(METRICS)
    for metric in metrics:
        if metric not in METRICS:
            raise UsageError(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        series = [metric_series(g, metric).values for metric in metrics]
    lines = ["timestamp," + ",".join(metrics) + "\n"]
    for t in range(g.T):
        vals = ["nan" if math.isnan(s[t]) else repr(float(s[t])) for s in series]
        lines.append(f"{t + 1}," + ",".join(vals) + "\n")
    text = "".join(lines)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tempograph", description="Temporal graph autoencoder: train, generate, evaluate.")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: $TEMPOGRAPH_THREADS or 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model from a config file")
    t.add_argument("-c", "--config", required=True)
    t.add_argument("--dataset")
    t.add_argument("--out-dir")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--variant")
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("generate", help="generate temporal graphs from a checkpoint or a baseline")
    g.add_argument("--checkpoint")
    g.add_argument("--dataset", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--baseline", choices=("er", "ba"))
    g.add_argument("--passes", type=int, default=1)
    g.add_argument("--num-graphs", type=int, default=1)
    g.add_argument("--binning", type=int)
    g.add_argument("--widen", action="store_true", help="score every node as a candidate destination")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="compare generated graphs against the original")
    e.add_argument("original")
    e.add_argument("generated", nargs="+")
    e.add_argument("--report", required=True)
    e.add_argument("--csv-dir")
    e.add_argument("--delta", type=int)
    e.add_argument("--sigma", type=float, default=1.0)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_evaluate)

    mo = sub.add_parser("motifs", help="3-edge temporal motif histogram")
    mo.add_argument("graph")
    mo.add_argument("--delta", type=int)
    mo.add_argument("--out")
    mo.set_defaults(func=cmd_motifs)

    s = sub.add_parser("stats", help="per-timestamp snapshot statistics")
    s.add_argument("graph")
    s.add_argument("--metric", action="append")
    s.add_argument("--out")
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        threads = _threads(args)
        torch.set_num_threads(threads)
        for name in ("num_graphs", "passes"):
            if getattr(args, name, 1) < 1:
                raise UsageError(f"--{name.replace('_', '-')} must be >= 1")
        if getattr(args, "delta", None) is not None and args.delta < 0:
            raise UsageError("--delta must be >= 0")
        if getattr(args, "sigma", 1.0) <= 0:
            raise UsageError("--sigma must be positive")
        return args.func(args)
    except (UsageError, ConfigError, CheckpointError, EdgeListError, EmptyGraphError, FileNotFoundError) as exc:
        print(f"tempograph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDivergedError, FloatingPointError) as exc:
        print(f"tempograph: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
