"""Dense numeric kernel on float64 torch tensors.

torch supplies tensors and reverse-mode differentiation.  The attention
layer, MLP, parameter initialization and the Adam update are written here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import torch
from torch import nn

__all__ = [
    "DTYPE",
    "ACTIVATIONS",
    "glorot_",
    "MLP",
    "mlp_forward",
    "TemporalAttention",
    "attend",
    "tgat_layer_forward",
    "grad",
    "AdamState",
    "Adam",
    "adam_step",
]

DTYPE = torch.float64
LEAKY_SLOPE = 0.2

ACTIVATIONS = {
    None: lambda x: x,
    "identity": lambda x: x,
    "elu": torch.nn.functional.elu,
    "relu": torch.relu,
    "tanh": torch.tanh,
}


def glorot_(w: torch.Tensor, fan_in: int, fan_out: int, gen: torch.Generator | None = None) -> torch.Tensor:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    with torch.no_grad():
        w.uniform_(-bound, bound, generator=gen)
    return w


class MLP(nn.Module):
    """Affine layers, each followed by its named activation (``None`` for linear)."""

    def __init__(self, sizes: Sequence[int], activations: Sequence[str | None] | None = None, gen=None):
        super().__init__()
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        if activations is None:
            activations = ["elu"] * (len(sizes) - 2) + [None]
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation tag per layer")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        self.activations = tuple(activations)
        self.weights = nn.ParameterList()
        self.biases = nn.ParameterList()
        for fi, fo in zip(self.sizes[:-1], self.sizes[1:]):
            self.weights.append(nn.Parameter(glorot_(torch.empty(fi, fo, dtype=DTYPE), fi, fo, gen)))
            self.biases.append(nn.Parameter(torch.zeros(fo, dtype=DTYPE)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return mlp_forward(self, x)


def mlp_forward(p: MLP, x: torch.Tensor) -> torch.Tensor:
    if x.dim() != 2 or x.shape[1] != p.sizes[0]:
        raise ValueError(f"MLP expects (rows, {p.sizes[0]}) input, got {tuple(x.shape)}")
    for w, b, act in zip(p.weights, p.biases, p.activations):
        x = ACTIVATIONS[act](x @ w + b)
    return x


class TemporalAttention(nn.Module):
    """Multi-head graph attention over bipartite message edges.

    A shared projection maps inputs to ``d_enc``; head ``i`` scores edge
    ``v -> u`` as ``LeakyReLU(a_i . [W h_u || W h_v])`` with slope 0.2,
    normalizes the scores over ``u``'s incoming edges, aggregates
    ``sum_v alpha W h_v`` and applies the head activation.  Heads are
    concatenated and mapped to ``d_out`` by ``W_o``.
    """

    def __init__(self, d_in: int, d_enc: int, d_out: int, heads: int = 2, activation: str = "elu", gen=None):
        super().__init__()
        if heads < 1:
            raise ValueError("need at least one attention head")
        self.d_in, self.d_enc, self.d_out, self.heads = d_in, d_enc, d_out, heads
        self.activation = activation
        self.W = nn.Parameter(glorot_(torch.empty(d_in, d_enc, dtype=DTYPE), d_in, d_enc, gen))
        # row i is a_i = [target half | source half]
        self.a = nn.Parameter(glorot_(torch.empty(heads, 2 * d_enc, dtype=DTYPE), 2 * d_enc, 1, gen))
        self.W_o = nn.Parameter(glorot_(torch.empty(heads * d_enc, d_out, dtype=DTYPE), heads * d_enc, d_out, gen))

    def forward(self, h_src, h_dst, src_idx, dst_idx, return_attention: bool = False):
        return attend(self, h_src, h_dst, src_idx, dst_idx, return_attention)


def attend(
    p: TemporalAttention,
    h_src: torch.Tensor,
    h_dst: torch.Tensor,
    src_idx: torch.Tensor,
    dst_idx: torch.Tensor,
    return_attention: bool = False,
):
    """Attention of ``h_dst`` rows over messages ``h_src[src_idx] -> dst_idx``.

    Callers supply every edge explicitly, self-loops included, sorted by
    ``(dst, src)`` so that sums are accumulated in a fixed order.
    """
    n_dst = h_dst.shape[0]
    if n_dst and torch.bincount(dst_idx, minlength=n_dst).min() == 0:
        raise RuntimeError("attention target without incoming messages")
    wh_src = h_src @ p.W
    wh_dst = h_dst @ p.W
    d = p.d_enc
    score_dst = wh_dst @ p.a[:, :d].T  # (n_dst, heads)
    score_src = wh_src @ p.a[:, d:].T
    e = torch.nn.functional.leaky_relu(score_dst[dst_idx] + score_src[src_idx], LEAKY_SLOPE)
    # per-target max for stability; the softmax is invariant to the shift
    shift = torch.full((n_dst, p.heads), -math.inf, dtype=e.dtype)
    shift = shift.scatter_reduce(0, dst_idx[:, None].expand_as(e), e.detach(), reduce="amax")
    ex = torch.exp(e - shift[dst_idx])
    denom = torch.zeros(n_dst, p.heads, dtype=e.dtype).index_add(0, dst_idx, ex)
    alpha = ex / denom[dst_idx]
    msg = alpha[:, :, None] * wh_src[src_idx][:, None, :]
    agg = torch.zeros(n_dst, p.heads, d, dtype=e.dtype).index_add(0, dst_idx, msg)
    out = ACTIVATIONS[p.activation](agg).reshape(n_dst, p.heads * d) @ p.W_o
    if return_attention:
        return out, alpha
    return out


def tgat_layer_forward(p: TemporalAttention, layer, h_sources: torch.Tensor, return_attention: bool = False):
    """Run one attention layer over a :class:`~tempograph.sampling.BipartiteLayer`.

    ``h_sources`` has one row per source node followed by one row per target
    node; the target rows feed both the self-loop messages and the target
    side of the attention scores.  Returns one row per target.
    """
    n_src, n_dst = len(layer.sources), len(layer.targets)
    if h_sources.shape[0] != n_src + n_dst:
        raise ValueError(f"expected {n_src + n_dst} source rows, got {h_sources.shape[0]}")
    src = torch.as_tensor(layer.src_idx, dtype=torch.long)
    dst = torch.as_tensor(layer.dst_idx, dtype=torch.long)
    loops = torch.arange(n_dst)
    src_all = torch.cat([src, loops + n_src])
    dst_all = torch.cat([dst, loops])
    order = torch.as_tensor(sorted(range(len(dst_all)), key=lambda i: (int(dst_all[i]), int(src_all[i]))))
    return attend(p, h_sources, h_sources[n_src:], src_all[order], dst_all[order], return_attention)


def grad(loss: torch.Tensor, params: Sequence[torch.Tensor], retain_graph: bool = False) -> list[torch.Tensor]:
    """Gradients of scalar ``loss`` w.r.t. ``params``; unused parameters get zeros."""
    if loss.numel() != 1:
        raise ValueError(f"grad needs a scalar loss, got shape {tuple(loss.shape)}")
    params = list(params)
    if not loss.requires_grad:
        return [torch.zeros_like(p) for p in params]
    gs = torch.autograd.grad(loss, params, allow_unused=True, retain_graph=retain_graph)
    return [torch.zeros_like(p) if g is None else g for p, g in zip(params, gs)]


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params: Sequence[torch.Tensor], grads: Sequence[torch.Tensor], state: AdamState) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if not state.m:
        state.m = [torch.zeros_like(p) for p in params]
        state.v = [torch.zeros_like(p) for p in params]
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state.m, state.v):
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {tuple(g.shape)} does not match parameter {tuple(p.shape)}")
            m.mul_(state.beta1).add_(g, alpha=1 - state.beta1)
            v.mul_(state.beta2).addcmul_(g, g, value=1 - state.beta2)
            p.sub_(state.lr * (m / c1) / ((v / c2).sqrt() + state.eps))


class Adam:
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    def step(self, grads) -> None:
        adam_step(self.params, grads, self.state)
