"""Temporal graph autoencoder: encoder, ego-graph decoder, losses and training."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

from .graph import TemporalGraph, TemporalNode
from .nn import DTYPE, MLP, Adam, TemporalAttention, attend, glorot_, grad
from .sampling import (
    BipartiteStack,
    EgoGraph,
    SamplingConfig,
    batches_per_epoch,
    build_computation_graphs,
    derive_rng,
    sample_ego_graphs,
    sample_initial_nodes,
    temporal_degrees,
)

log = logging.getLogger(__name__)

__all__ = [
    "VARIANTS",
    "TgaeConfig",
    "TrainConfig",
    "TgaeModel",
    "EdgeProbRow",
    "TrainingDivergedError",
    "encode_batch",
    "reparameterize",
    "ego_paths",
    "decode_ego_graph",
    "decode_batch",
    "kl_term",
    "approx_loss",
    "full_batch_loss",
    "batch_loss",
    "train",
]

SIGMA_MIN, SIGMA_MAX = 1e-6, 1e3

VARIANTS = {
    "full": {},
    "g": {"walk": True},
    "t": {"no_truncation": True},
    "n": {"uniform_init": True},
    "p": {"non_probabilistic": True},
}


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TgaeConfig:
    """Architecture and sampling hyperparameters of one model.

    The encoder output width equals ``d_lat`` so encodings and latents can be
    added in the decoder.  With ``one_hot`` the node features are a fixed
    identity matrix (``d_in`` is then ``n``); otherwise they are a trainable
    ``n x d_in`` table shared by all timestamps of a node.
    """

    n: int
    T: int
    k: int = 2
    th: int = 10
    t_N: int = 1
    d_in: int = 64
    d_enc: int = 32
    d_lat: int = 16
    h_tga: int = 2
    mlp_hidden: int = 32
    activation: str = "elu"
    one_hot: bool = False
    walk: bool = False
    no_truncation: bool = False
    uniform_init: bool = False
    non_probabilistic: bool = False
    literal_double_add: bool = True

    def __post_init__(self):
        if self.n < 1 or self.T < 1:
            raise ValueError("n and T must be positive")
        if self.k < 1 or self.th < 1 or self.d_in < 1 or self.d_enc < 1 or self.d_lat < 1 or self.h_tga < 1:
            raise ValueError("k, th, d_in, d_enc, d_lat and h_tga must be positive")
        if self.t_N < 0:
            raise ValueError("t_N must be >= 0")
        if self.one_hot and self.n > 2048:
            raise ValueError("one-hot features are limited to n <= 2048")
        if self.walk and self.no_truncation:
            raise ValueError("walk and no_truncation variants are exclusive")

    @classmethod
    def for_variant(cls, name: str, **kw) -> "TgaeConfig":
        if name not in VARIANTS:
            raise ValueError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}")
        return cls(**{**kw, **VARIANTS[name]})

    @property
    def d_att(self) -> int:
        return self.d_lat

    @property
    def feature_dim(self) -> int:
        return self.n if self.one_hot else self.d_in

    @property
    def effective_th(self) -> int | None:
        if self.walk:
            return 1
        if self.no_truncation:
            return None
        return self.th

    @property
    def strategy(self) -> str:
        return "uniform" if self.uniform_init else "degree"

    @property
    def variant(self) -> str:
        for name, flags in VARIANTS.items():
            if flags and all(getattr(self, f) for f in flags):
                return name
        return "full"

    def sampling(self, n_s: int, seed: int) -> SamplingConfig:
        return SamplingConfig(k=self.k, th=self.effective_th, n_s=n_s, strategy=self.strategy, seed=seed, t_N=self.t_N)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    n_s: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    kl_weight: float = 1.0
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.n_s < 1:
            raise ValueError("n_s must be >= 1")


class TgaeModel(nn.Module):
    def __init__(self, cfg: TgaeConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        gen = torch.Generator().manual_seed(int(derive_rng(seed, "init").integers(2**62)))
        if cfg.one_hot:
            self.register_buffer("onehot", torch.eye(cfg.n, dtype=DTYPE))
            self.embedding = None
        else:
            self.embedding = nn.Parameter(glorot_(torch.empty(cfg.n, cfg.d_in, dtype=DTYPE), cfg.n, cfg.d_in, gen))
        d_feat = cfg.feature_dim
        self.encoder = nn.ModuleList(
            TemporalAttention(d_feat if i == 0 else cfg.d_att, cfg.d_enc, cfg.d_att, cfg.h_tga, cfg.activation, gen)
            for i in range(cfg.k)
        )
        self.mlp_mu = MLP([d_feat, cfg.mlp_hidden, cfg.d_lat], gen=gen)
        self.mlp_logvar = MLP([d_feat, cfg.mlp_hidden, cfg.d_lat], gen=gen)
        self.W_dec = nn.Parameter(glorot_(torch.empty(cfg.d_lat, cfg.n, dtype=DTYPE), cfg.d_lat, cfg.n, gen))
        self.b_dec = nn.Parameter(torch.zeros(cfg.n, dtype=DTYPE))

    def features(self, nodes) -> torch.Tensor:
        """Feature rows of 1-based node ids (shared across timestamps)."""
        idx = torch.as_tensor(np.asarray(nodes, dtype=np.int64) - 1)
        table = self.onehot if self.embedding is None else self.embedding
        return table[idx]

    def all_features(self) -> torch.Tensor:
        return self.onehot if self.embedding is None else self.embedding

    def latent_params(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """``(mu, sigma)`` of the latent prior for feature rows ``x``."""
        mu = self.mlp_mu(x)
        sigma = torch.exp(0.5 * self.mlp_logvar(x)).clamp(SIGMA_MIN, SIGMA_MAX)
        return mu, sigma

    def named_tensors(self) -> dict[str, torch.Tensor]:
        return dict(self.state_dict())


# -- encoding ---------------------------------------------------------------------


def _encoder_plan(stack: BipartiteStack):
    """Index arrays for each stacked attention layer.

    Every (hop, node) entry of the stack gets a global row, hop-major.  The
    ``j``-th attention layer updates all entries at hop ``<= k - j`` from
    their children one hop deeper plus a self-loop, so after ``k`` layers the
    centers have aggregated their full ``k``-hop sampled trees.
    """
    k = stack.k
    sizes = [len(s) for s in stack.sets]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    plan = []
    for j in range(1, k + 1):
        n_dst = int(offs[k - j + 1])
        srcs = [np.arange(n_dst)]
        dsts = [np.arange(n_dst)]
        for lvl in range(1, k - j + 2):
            layer = stack.layers[lvl - 1]
            srcs.append(layer.src_idx + offs[lvl])
            dsts.append(layer.dst_idx + offs[lvl - 1])
        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        order = np.lexsort((src, dst))
        n_src = int(offs[k - j + 2])
        plan.append((n_src, n_dst, torch.as_tensor(src[order]), torch.as_tensor(dst[order])))
    return offs, plan


def encode_batch(m: TgaeModel, stack: BipartiteStack) -> torch.Tensor:
    """Hidden vector of every center in ``stack.sets[0]``."""
    if stack.k != m.cfg.k:
        raise ValueError(f"stack has {stack.k} layers but the model expects k={m.cfg.k}")
    if not stack.sets[0]:
        return torch.zeros(0, m.cfg.d_att, dtype=DTYPE)
    nodes = [u.node for s in stack.sets for u in s]
    h = m.features(nodes)
    _, plan = _encoder_plan(stack)
    for layer, (n_src, n_dst, src, dst) in zip(m.encoder, plan):
        h = attend(layer, h[:n_src], h[:n_dst], src, dst)
    return h


# -- latents and decoding -----------------------------------------------------------


def reparameterize(
    mu: torch.Tensor,
    sigma: torch.Tensor | None,
    noise: torch.Tensor | None = None,
    gen: torch.Generator | None = None,
) -> torch.Tensor:
    """``mu + sigma * noise``; ``sigma=None`` is the deterministic (non-probabilistic) path."""
    if sigma is None:
        return mu
    if mu.shape != sigma.shape:
        raise ValueError("mu and sigma shapes differ")
    if (sigma < 0).any():
        raise ValueError("sigma must be nonnegative")
    if noise is None:
        noise = torch.randn(mu.shape, dtype=mu.dtype, generator=gen)
    return mu + sigma * noise


def ego_paths(ego: EgoGraph, k: int) -> list[tuple[TemporalNode, ...]]:
    """Sampled neighbor paths of length ``k - 1`` leaving the ego center."""
    if k == 1:
        return [()]
    # every hop-1 node is a child of the center
    paths: list[tuple] = [(c,) for c in ego.layers[1]]
    for lvl in range(1, k - 1):
        nxt = []
        for p in paths:
            tip = p[-1] if p else ego.center
            for c in ego.children.get((lvl, tip), ()):
                nxt.append(p + (c,))
        paths = nxt
    return paths


def _path_terms(path: tuple, center: TemporalNode, k: int, double_add: bool) -> tuple[TemporalNode, list]:
    """Owner of the row a path emits and the latent rows summed into it."""
    if k == 1:
        return center, [center]
    terms = list(path)
    if double_add:
        terms.append(path[-1])
    return path[-1], terms


@dataclass
class EdgeProbRow:
    owner: TemporalNode
    probs: np.ndarray


def decode_ego_graph(m: TgaeModel, ego: EgoGraph, h_center: torch.Tensor, Z: torch.Tensor, k: int | None = None) -> list[EdgeProbRow]:
    """Edge-probability rows of one ego-graph.

    ``Z`` has one row per entry of ``ego.node_list``.  Each path of length
    ``k - 1`` from the center emits ``softmax((h + sum of its latents) W_dec + b_dec)``
    owned by the path's last node.
    """
    k = m.cfg.k if k is None else k
    pos = {u: i for i, u in enumerate(ego.node_list)}
    rows = []
    with torch.no_grad():
        for path in ego_paths(ego, k):
            owner, terms = _path_terms(path, ego.center, k, m.cfg.literal_double_add)
            h = h_center.clone()
            for u in terms:
                h = h + Z[pos[u]]
            p = torch.softmax(h @ m.W_dec + m.b_dec, dim=-1)
            rows.append(EdgeProbRow(owner, p.numpy().copy()))
    return rows


@dataclass
class BatchRows:
    """Decoder output of a merged batch: one hidden row per path.

    ``logits`` projects the rows onto all ``n`` nodes; callers that only need
    a few columns can project ``hidden`` in blocks themselves.
    """

    hidden: torch.Tensor
    owners: list[TemporalNode]
    W: torch.Tensor
    b: torch.Tensor
    mu: torch.Tensor | None = None
    sigma: torch.Tensor | None = None

    @property
    def logits(self) -> torch.Tensor:
        return torch.addmm(self.b, self.hidden, self.W)

    @property
    def log_probs(self) -> torch.Tensor:
        return torch.log_softmax(self.logits, dim=-1)


def decode_batch(
    m: TgaeModel,
    stack: BipartiteStack,
    h: torch.Tensor,
    gen: torch.Generator | None = None,
    owner_filter: Callable[[TemporalNode], bool] | None = None,
) -> BatchRows:
    """Decode every ego of ``stack`` given center encodings ``h``.

    Each distinct temporal node of the batch draws one latent; the
    non-probabilistic variant uses the latent means.  Rows whose owner fails
    ``owner_filter`` are dropped before the output projection.
    """
    k = m.cfg.k
    row_center, entry_row, entry_z, owners = [], [], [], []
    zindex: dict = {}
    for ego, c_row in zip(stack.egos, stack.center_rows):
        for path in ego_paths(ego, k):
            owner, terms = _path_terms(path, ego.center, k, m.cfg.literal_double_add)
            if owner_filter is not None and not owner_filter(owner):
                continue
            r = len(owners)
            owners.append(owner)
            row_center.append(c_row)
            for u in terms:
                entry_row.append(r)
                entry_z.append(zindex.setdefault(u, len(zindex)))
    if not owners:
        return BatchRows(torch.zeros(0, m.cfg.d_lat, dtype=DTYPE), [], m.W_dec, m.b_dec)
    znodes = list(zindex)
    x = m.features([u.node for u in znodes])
    if m.cfg.non_probabilistic:
        mu, sigma = m.mlp_mu(x), None
        Z = mu
    else:
        mu, sigma = m.latent_params(x)
        Z = reparameterize(mu, sigma, gen=gen)
    base = h[torch.as_tensor(row_center)]
    hid = base.index_add(0, torch.as_tensor(entry_row), Z[torch.as_tensor(entry_z)])
    return BatchRows(hid, owners, m.W_dec, m.b_dec, mu, sigma)


# -- losses ----------------------------------------------------------------------------


def kl_term(mu: torch.Tensor, sigma: torch.Tensor) -> torch.Tensor:
    """KL(N(mu, sigma^2) || N(0, I)) summed over latent dims, averaged over rows."""
    if mu.shape != sigma.shape:
        raise ValueError("mu and sigma shapes differ")
    sigma = sigma.clamp_min(SIGMA_MIN)
    var = sigma * sigma
    per_row = 0.5 * (mu * mu + var - 1.0 - torch.log(var)).sum(dim=1)
    return per_row.mean()


def model_kl(m: TgaeModel) -> torch.Tensor:
    """KL term over the latent priors of all nodes.

    Features are shared across timestamps, so the average over all ``n*T``
    temporal nodes equals the average over the ``n`` feature rows.
    """
    mu, sigma = m.latent_params(m.all_features())
    return kl_term(mu, sigma)


def _target_pairs(g: TemporalGraph, owners: Sequence[TemporalNode]) -> tuple[torch.Tensor, torch.Tensor]:
    rows, cols = [], []
    for r, o in enumerate(owners):
        for v in np.unique(g.out_edges(o.node, o.t)).tolist():
            rows.append(r)
            cols.append(v - 1)
    return torch.as_tensor(rows, dtype=torch.long), torch.as_tensor(cols, dtype=torch.long)


def approx_loss(
    log_probs: torch.Tensor,
    owners: Sequence[TemporalNode],
    g: TemporalGraph,
    kl: torch.Tensor | float | None,
    n_s: int,
    kl_weight: float = 1.0,
) -> torch.Tensor:
    """Mini-batch loss: observed-edge cross-entropy of the rows divided by ``n_s``, plus KL.

    Row ``r`` is scored against the distinct out-neighbors of its owner at
    the owner's timestamp; owners without out-edges contribute nothing.
    ``kl=None`` drops the KL term (non-probabilistic variant).
    """
    rows, cols = _target_pairs(g, owners)
    if len(rows):
        recon = -log_probs[rows, cols].sum() / n_s
    else:
        recon = log_probs.sum() * 0.0
    if kl is None:
        return recon
    return recon + kl_weight * kl


def full_batch_loss(g: TemporalGraph, score_log: torch.Tensor, kl=None) -> torch.Tensor:
    """Full-graph objective over a dense ``(T, n, n)`` log-score tensor.

    Averages the observed-edge log-likelihood over all ``n*T`` temporal nodes.
    """
    A = torch.zeros(g.T, g.n, g.n, dtype=DTYPE)
    A[torch.as_tensor(g.t - 1), torch.as_tensor(g.src - 1), torch.as_tensor(g.dst - 1)] = 1.0
    loss = -(A * torch.where(A > 0, score_log, torch.zeros_like(score_log))).sum() / (g.n * g.T)
    return loss if kl is None else loss + kl


def batch_loss(
    m: TgaeModel,
    g: TemporalGraph,
    stack: BipartiteStack,
    gen: torch.Generator | None,
    kl_weight: float = 1.0,
) -> tuple[torch.Tensor, torch.Tensor | None]:
    """Loss of one merged batch; returns ``(loss, kl)``."""
    h = encode_batch(m, stack)
    out = decode_batch(m, stack, h, gen)
    kl = None if m.cfg.non_probabilistic else model_kl(m)
    n_s = len(stack.sets[0])
    return approx_loss(out.log_probs, out.owners, g, kl, n_s, kl_weight), kl


# -- training ----------------------------------------------------------------------------


def _torch_gen(seed: int, *key) -> torch.Generator:
    return torch.Generator().manual_seed(int(derive_rng(seed, *key).integers(2**62)))


def train(
    g: TemporalGraph,
    cfg: TgaeConfig,
    tcfg: TrainConfig,
    on_epoch: Callable[[dict], None] | None = None,
) -> tuple[TgaeModel, list[dict]]:
    """Mini-batch training; returns the model and one history record per epoch.

    An epoch runs ``ceil(n*T / n_s)`` steps.  Each step draws ``n_s`` initial
    temporal nodes, samples their ego-graphs, merges them, and takes one Adam
    step on the approximate loss.  Duplicate draws collapse to one ego-graph.
    """
    if (g.n, g.T) != (cfg.n, cfg.T):
        raise ValueError(f"model is sized for n={cfg.n}, T={cfg.T} but graph has n={g.n}, T={g.T}")
    seed = tcfg.seed
    m = TgaeModel(cfg, seed)
    params = list(m.parameters())
    opt = Adam(params, lr=tcfg.lr, betas=(tcfg.beta1, tcfg.beta2), eps=tcfg.eps)
    scfg = cfg.sampling(tcfg.n_s, seed)
    degrees = temporal_degrees(g, cfg.t_N) if scfg.strategy == "degree" else np.zeros(g.num_temporal_nodes)
    steps = batches_per_epoch(g.n, g.T, tcfg.n_s)
    history = []
    for epoch in range(tcfg.epochs):
        t0 = time.perf_counter()
        tot_loss = tot_kl = 0.0
        for b in range(steps):
            draws = sample_initial_nodes(g, scfg, derive_rng(seed, "sampling", epoch, b), degrees)
            centers = list(dict.fromkeys(draws))
            egos = sample_ego_graphs(g, centers, cfg.k, cfg.effective_th, seed, ("ego", epoch, b), cfg.t_N, tcfg.threads)
            stack = build_computation_graphs(egos, cfg.k)
            loss, kl = batch_loss(m, g, stack, _torch_gen(seed, "noise", epoch, b), tcfg.kl_weight)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDivergedError(f"non-finite loss {value} at epoch {epoch + 1}, step {b + 1}")
            opt.step(grad(loss, params))
            tot_loss += value
            tot_kl += 0.0 if kl is None else kl.item()
        rec = {"epoch": epoch + 1, "loss": tot_loss / steps, "kl": tot_kl / steps, "seconds": time.perf_counter() - t0}
        history.append(rec)
        log.debug("epoch %d loss %.6f kl %.6f", rec["epoch"], rec["loss"], rec["kl"])
        if on_epoch is not None:
            on_epoch(rec)
    return m, history
