from types import SimpleNamespace

import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from tempograph.graph import TemporalGraph, TemporalNode
from tempograph.nn import DTYPE, MLP, Adam, AdamState, TemporalAttention, adam_step, attend, grad, mlp_forward, tgat_layer_forward
from tempograph.sampling import build_computation_graphs, derive_rng, sample_ego_graph


def gen(seed=0):
    return torch.Generator().manual_seed(seed)


def rand(*shape, seed=0):
    return torch.randn(*shape, dtype=DTYPE, generator=gen(seed))


# -- MLP -------------------------------------------------------------------------


def test_mlp_zero_weights_gives_bias():
    p = MLP([3, 2], [None])
    with torch.no_grad():
        p.weights[0].zero_()
        p.biases[0].copy_(torch.tensor([1.5, -2.0], dtype=DTYPE))
    out = mlp_forward(p, rand(4, 3))
    assert torch.equal(out, torch.tensor([[1.5, -2.0]] * 4, dtype=DTYPE))


def test_mlp_identity_layer():
    p = MLP([3, 3], [None])
    with torch.no_grad():
        p.weights[0].copy_(torch.eye(3, dtype=DTYPE))
    x = rand(5, 3)
    assert torch.equal(mlp_forward(p, x), x)


def test_mlp_shapes_and_errors():
    p = MLP([3, 4], gen=gen())
    assert mlp_forward(p, rand(5, 3)).shape == (5, 4)
    with pytest.raises(ValueError):
        mlp_forward(p, rand(5, 2))
    with pytest.raises(ValueError):
        MLP([3, 4], ["nope"])


# -- attention ---------------------------------------------------------------------


def edges(pairs):
    pairs = sorted(pairs, key=lambda e: (e[1], e[0]))
    src = torch.tensor([s for s, _ in pairs])
    dst = torch.tensor([d for _, d in pairs])
    return src, dst


def test_equal_sources_give_uniform_attention():
    p = TemporalAttention(4, 3, 2, heads=2, gen=gen(1))
    h_src = rand(1, 4).repeat(5, 1)
    src, dst = edges([(0, 0), (1, 0), (2, 0), (3, 1), (4, 1)])
    _, alpha = attend(p, h_src, h_src[:2], src, dst, return_attention=True)
    deg = torch.bincount(dst).to(DTYPE)
    assert torch.allclose(alpha, (1.0 / deg[dst])[:, None].expand_as(alpha))


def test_self_loop_only_target():
    p = TemporalAttention(4, 3, 2, heads=3, gen=gen(2))
    h = rand(1, 4)
    out, alpha = attend(p, h, h, torch.tensor([0]), torch.tensor([0]), return_attention=True)
    assert torch.equal(alpha, torch.ones(1, 3, dtype=DTYPE))
    expected = torch.nn.functional.elu(h @ p.W).repeat(1, 3) @ p.W_o
    assert torch.allclose(out, expected, atol=1e-14)


@given(st.integers(0, 10_000))
def test_attention_normalized(seed):
    rng = np.random.default_rng(seed)
    n_src, n_dst = int(rng.integers(1, 8)), int(rng.integers(1, 5))
    pairs = {(int(rng.integers(n_src)), d) for d in range(n_dst)}
    pairs |= {(int(rng.integers(n_src)), int(rng.integers(n_dst))) for _ in range(10)}
    src, dst = edges(pairs)
    p = TemporalAttention(3, 2, 2, heads=2, gen=gen(seed))
    _, alpha = attend(p, rand(n_src, 3, seed=seed), rand(n_dst, 3, seed=seed + 1), src, dst, True)
    assert (alpha >= 0).all()
    sums = torch.zeros(n_dst, 2, dtype=DTYPE).index_add(0, dst, alpha)
    assert torch.allclose(sums, torch.ones_like(sums), atol=1e-12)


def test_attention_no_in_edges_is_invariant_violation():
    p = TemporalAttention(3, 2, 2, gen=gen())
    with pytest.raises(RuntimeError):
        attend(p, rand(2, 3), rand(2, 3), torch.tensor([0]), torch.tensor([0]))


def test_in_edge_order_irrelevant():
    g = TemporalGraph(5, 1, [1, 1, 1, 2], [2, 3, 4, 5], [1] * 4)
    ego = sample_ego_graph(g, TemporalNode(1, 1), 1, None, derive_rng(0), t_N=0)
    layer = build_computation_graphs([ego], 1).layers[0]
    p = TemporalAttention(3, 2, 2, gen=gen(5))
    h = rand(len(layer.sources) + len(layer.targets), 3, seed=9)
    out = tgat_layer_forward(p, layer, h)
    # permuting the caller's edge list cannot matter: the layer sorts it
    perm = type(layer)(layer.sources, layer.targets, layer.src_idx[::-1].copy(), layer.dst_idx[::-1].copy())
    assert torch.equal(out, tgat_layer_forward(p, perm, h))
    assert out.shape == (1, 2)


def test_attention_matches_dense_reference():
    torch.manual_seed(0)
    p = TemporalAttention(3, 4, 2, heads=2, gen=gen(3))
    h_src, h_dst = rand(4, 3, seed=1), rand(2, 3, seed=2)
    pairs = [(0, 0), (1, 0), (2, 1), (3, 1), (1, 1)]
    src, dst = edges(pairs)
    out = attend(p, h_src, h_dst, src, dst)
    ref = torch.zeros(2, 2 * 4, dtype=DTYPE)
    for u in range(2):
        ins = [s for s, d in pairs if d == u]
        for i in range(2):
            a = p.a[i]
            logits = torch.stack(
                [torch.nn.functional.leaky_relu(a @ torch.cat([h_dst[u] @ p.W, h_src[s] @ p.W]), 0.2) for s in ins]
            )
            w = torch.softmax(logits, 0)
            agg = sum(w[j] * (h_src[s] @ p.W) for j, s in enumerate(ins))
            ref[u, i * 4 : (i + 1) * 4] = torch.nn.functional.elu(agg)
    assert torch.allclose(out, ref @ p.W_o, atol=1e-13)


def test_attention_gradcheck():
    p = TemporalAttention(3, 2, 2, heads=2, gen=gen(4))
    src, dst = edges([(0, 0), (1, 0), (2, 1), (0, 1)])
    h_src = rand(3, 3, seed=5).requires_grad_()
    h_dst = rand(2, 3, seed=6).requires_grad_()

    def f(hs, hd, W, a, Wo):
        q = SimpleNamespace(W=W, a=a, W_o=Wo, d_enc=2, heads=2, activation="elu")
        return attend(q, hs, hd, src, dst)

    args = (h_src, h_dst, p.W.detach().clone().requires_grad_(), p.a.detach().clone().requires_grad_(), p.W_o.detach().clone().requires_grad_())
    assert torch.autograd.gradcheck(f, args, eps=1e-6, atol=1e-7)


# -- grad --------------------------------------------------------------------------


def test_grad_constant_loss_is_zero():
    w = torch.nn.Parameter(rand(3))
    (gw,) = grad(torch.tensor(4.0, dtype=DTYPE), [w])
    assert torch.equal(gw, torch.zeros(3, dtype=DTYPE))


def test_grad_linear():
    w = torch.nn.Parameter(rand(4))
    x = rand(4, seed=1)
    (gw,) = grad(w @ x, [w])
    assert torch.equal(gw, x)


def test_grad_non_scalar():
    w = torch.nn.Parameter(rand(4))
    with pytest.raises(ValueError):
        grad(w * 2, [w])


def test_grad_unused_parameter_zero():
    w, u = torch.nn.Parameter(rand(2)), torch.nn.Parameter(rand(3))
    gw, gu = grad(w.sum(), [w, u])
    assert torch.equal(gu, torch.zeros(3, dtype=DTYPE))


# -- Adam ------------------------------------------------------------------------------


def test_adam_zero_gradient_no_move():
    w = rand(3)
    before = w.clone()
    state = AdamState()
    adam_step([w], [torch.zeros(3, dtype=DTYPE)], state)
    assert torch.equal(w, before)
    assert state.step == 1


def test_adam_first_step_is_sign():
    w = torch.tensor([1.0, 1.0, 1.0], dtype=DTYPE)
    g = torch.tensor([0.3, -5.0, 1e-3], dtype=DTYPE)
    adam_step([w], [g], AdamState(lr=0.001))
    step = w - 1.0
    # m_hat = g, v_hat = g^2 so the step is -lr * g / (|g| + eps)
    assert torch.allclose(step, -0.001 * g / (g.abs() + 1e-8), rtol=0, atol=1e-15)
    assert torch.allclose(step, -0.001 * torch.sign(g), atol=1e-8)


def test_adam_step_counter():
    w = rand(2)
    opt = Adam([w])
    for i in range(1, 4):
        opt.step([rand(2, seed=i)])
        assert opt.state.step == i


def test_adam_matches_torch_adam():
    w_ours = rand(5, 3).requires_grad_()
    w_ref = w_ours.detach().clone().requires_grad_()
    ours = Adam([w_ours], lr=0.01, betas=(0.8, 0.99), eps=1e-7)
    ref = torch.optim.Adam([w_ref], lr=0.01, betas=(0.8, 0.99), eps=1e-7)
    for i in range(25):
        g = rand(5, 3, seed=100 + i)
        ours.step([g])
        w_ref.grad = g.clone()
        ref.step()
    assert torch.allclose(w_ours, w_ref, rtol=0, atol=1e-12)


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        adam_step([rand(3)], [rand(2)], AdamState())
