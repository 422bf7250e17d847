"""Tests for the attention layers, the dual convolution and the GAT reduction."""

from unittest.mock import patch

import numpy as np
import pytest

from dpgcnn.autodiff import ops
from dpgcnn.autodiff.gradcheck import check
from dpgcnn.autodiff.rng import Rng
from dpgcnn.autodiff.tensor import Parameter, Tape, Tensor
from dpgcnn.datasets.synthetic import random_connected_bidirected
from dpgcnn.errors import EmptyNeighborhood, PreconditionError, ShapeMismatch
from dpgcnn.graph.dual import DualMode, build_dual
from dpgcnn.graph.primal import add_self_loops, from_edge_list, permute, to_bidirected
from dpgcnn.layers import dual_conv
from dpgcnn.layers.dual_conv import DualFeatures, dual_conv_forward, dual_features_init
from dpgcnn.layers.gat import gat_attention, gat_forward
from dpgcnn.layers.params import (
    DpgcnnBlockParams,
    DualConvParams,
    GatLayerParams,
    PolyConvParams,
    PrimalConvParams,
)
from dpgcnn.layers.poly_conv import poly_conv_forward
from dpgcnn.layers.primal_conv import dpgcnn_block, primal_conv_forward
from dpgcnn.layers.reduction import gat_reduction, reduction_params_from_gat
from dpgcnn.training import suites


def _leaky(x: float) -> float:
    return x if x >= 0 else ops.LEAKY_SLOPE * x


def _elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _graph(seed: int, n: int = 6):
    return add_self_loops(random_connected_bidirected(n, 4, seed))


def _features(seed: int, n: int, q: int) -> np.ndarray:
    return Rng(seed).spawn("features").uniform((n, q)) - 0.5


# ---------------------------------------------------------------------------
# GAT
# ---------------------------------------------------------------------------


def _gat_oracle(F: np.ndarray, g, params: GatLayerParams) -> np.ndarray:
    """Per-vertex loops over incoming arcs, one head at a time."""
    heads = []
    for W, a in zip(params.W, params.a):
        z = F @ W.value
        width = z.shape[1]
        out = np.zeros_like(z)
        for i in range(g.n):
            senders = [int(s) for s, d in g.pairs() if d == i]
            receiver, sender = a.value[:width, 0], a.value[width:, 0]
            logits = np.array([_leaky(float(receiver @ z[i] + sender @ z[j])) for j in senders])
            alpha = np.exp(logits - logits.max())
            alpha /= alpha.sum()
            for w, j in zip(alpha, senders):
                out[i] += w * z[j]
        heads.append(out)
    merged = np.concatenate(heads, axis=1) if params.merge == "concat" else np.mean(heads, axis=0)
    return _elu(merged) if params.activation == "elu" else merged


@pytest.mark.parametrize("seed", range(4))
def test_gat_matches_dense_oracle(seed: int) -> None:
    g = _graph(seed)
    F = _features(seed, g.n, 5)
    params = GatLayerParams.init("gat", 5, 3, 2, Rng(seed))
    out = gat_forward(Tensor(F), g, params, Tape())
    np.testing.assert_allclose(out.value, _gat_oracle(F, g, params), atol=1e-12)


def test_gat_average_merge_matches_oracle() -> None:
    g = _graph(7)
    F = _features(7, g.n, 4)
    params = GatLayerParams.init("gat", 4, 3, 3, Rng(7), merge="average", activation="none")
    out = gat_forward(Tensor(F), g, params, Tape())
    assert out.shape == (g.n, 3)
    np.testing.assert_allclose(out.value, _gat_oracle(F, g, params), atol=1e-12)


def test_gat_attention_sums_to_one() -> None:
    """Every receiver's coefficients form a distribution."""
    for seed in range(10):
        g = _graph(seed, n=9)
        params = GatLayerParams.init("gat", 4, 3, 2, Rng(seed))
        for head in range(2):
            alpha = gat_attention(Tensor(_features(seed, g.n, 4)), g, params, head).value[:, 0]
            sums = np.bincount(g.dst, weights=alpha, minlength=g.n)
            np.testing.assert_allclose(sums, 1.0, atol=1e-12)


def test_gat_uniform_attention_on_identical_neighbors() -> None:
    g = _graph(1)
    F = np.ones((g.n, 4))
    params = GatLayerParams.init("gat", 4, 2, 1, Rng(1))
    alpha = gat_attention(Tensor(F), g, params).value[:, 0]
    indegree = np.bincount(g.dst, minlength=g.n)
    np.testing.assert_allclose(alpha, 1.0 / indegree[g.dst], atol=1e-15)


def test_gat_isolated_vertex_with_self_loop() -> None:
    """A lone self-loop gives the vertex its own projection."""
    g = add_self_loops(from_edge_list([(0, 1), (1, 0)], 3))
    F = _features(2, 3, 4)
    params = GatLayerParams.init("gat", 4, 3, 1, Rng(2), activation="none")
    out = gat_forward(Tensor(F), g, params, Tape())
    np.testing.assert_allclose(out.value[2], F[2] @ params.W[0].value, atol=1e-15)


def test_gat_errors() -> None:
    g = from_edge_list([(0, 1)], 2)
    params = GatLayerParams.init("gat", 3, 2, 1, Rng(0))
    with pytest.raises(EmptyNeighborhood):
        gat_forward(Tensor(np.ones((2, 3))), g, params, Tape())
    with pytest.raises(ShapeMismatch):
        gat_forward(Tensor(np.ones((3, 3))), add_self_loops(g), params, Tape())


@pytest.mark.parametrize("seed", range(5))
def test_gat_permutation_equivariance(seed: int) -> None:
    g = _graph(seed, n=8)
    F = _features(seed, g.n, 4)
    perm = Rng(seed).spawn("perm").permutation(g.n)
    params = GatLayerParams.init("gat", 4, 3, 2, Rng(seed))

    out = gat_forward(Tensor(F), g, params, Tape()).value
    F_perm = np.empty_like(F)
    F_perm[perm] = F
    out_perm = gat_forward(Tensor(F_perm), permute(g, perm), params, Tape()).value
    np.testing.assert_allclose(out_perm[perm], out, atol=1e-12)


# ---------------------------------------------------------------------------
# Dual convolution
# ---------------------------------------------------------------------------


def test_dual_features_init_concatenates_endpoints() -> None:
    g = add_self_loops(to_bidirected(from_edge_list([(0, 1)], 2)))
    F = Tensor(np.array([[1.0], [2.0]]))
    rows = dual_features_init(F, g).value
    as_dict = {pair: rows[k].tolist() for k, pair in enumerate(g.pairs())}
    assert as_dict[(0, 1)] == [1.0, 2.0]
    assert as_dict[(1, 0)] == [2.0, 1.0]
    assert as_dict[(1, 1)] == [2.0, 2.0]


def test_factored_projection_matches_materialized() -> None:
    g = _graph(3)
    dual = build_dual(g)
    rng = Rng(3)
    edge = Tensor(rng.spawn("edge").uniform((g.num_arcs, 2)))
    features = DualFeatures.from_graph(Tensor(_features(3, g.n, 3)), g, dual, edge)
    W = Tensor(rng.spawn("W").uniform((features.width, 4)))
    np.testing.assert_allclose(
        features.project(W).value, features.materialize().value @ W.value, atol=1e-13
    )


def test_dual_conv_uniform_attention_on_identical_features() -> None:
    """Equal dual features give every dual vertex the shared projected row."""
    g = _graph(4)
    dual = build_dual(g)
    params = DualConvParams.init("dual", 4, 3, 1, Rng(4), activation="none")
    F_dual = Tensor(np.tile([[0.3, -0.2, 0.5, 0.1]], (dual.n, 1)))
    out = dual_conv_forward(F_dual, dual, params, Tape()).value
    expected = F_dual.value[0] @ params.W[0].value
    np.testing.assert_allclose(out, np.tile(expected, (dual.n, 1)), atol=1e-14)


def test_dual_conv_single_neighbor() -> None:
    """On a directed path each arc's only chain neighbor is the other arc."""
    g = from_edge_list([(0, 1), (1, 2)], 3)
    dual = build_dual(g, DualMode.CHAIN)
    assert [dual.neighbors(u).tolist() for u in range(2)] == [[1], [0]]
    params = DualConvParams.init("dual", 4, 3, 1, Rng(5), activation="none")
    F_dual = dual_features_init(Tensor(_features(5, 3, 2)), g)
    out = dual_conv_forward(F_dual, dual, params, Tape()).value
    W = params.W[0].value
    np.testing.assert_allclose(out[0], F_dual.value[1] @ W, atol=1e-15)
    np.testing.assert_allclose(out[1], F_dual.value[0] @ W, atol=1e-15)


def test_dual_conv_isolated_dual_vertex_warns_once() -> None:
    g = from_edge_list([(0, 1)], 2)
    dual = build_dual(g)
    params = DualConvParams.init("dual", 2, 3, 1, Rng(0), activation="relu")
    F_dual = Tensor(np.array([[1.0, 2.0]]))
    with patch.object(dual_conv.log, "warning") as mock_warning:
        first = dual_conv_forward(F_dual, dual, params, Tape())
        dual_conv_forward(F_dual, dual, params, Tape())
    np.testing.assert_array_equal(first.value, np.zeros((1, 3)))
    assert mock_warning.call_count == 1
    assert mock_warning.call_args.args[0] == "empty_dual_neighborhood"


def test_dual_conv_row_count_checked() -> None:
    dual = build_dual(from_edge_list([(0, 1), (1, 2)], 3))
    params = DualConvParams.init("dual", 2, 3, 1, Rng(0))
    with pytest.raises(ShapeMismatch):
        dual_conv_forward(Tensor(np.ones((3, 2))), dual, params, Tape())


def test_dual_conv_distinguishes_arcs_with_equal_endpoint_features() -> None:
    """Arcs 1->0 and 2->0 look alike to GAT but not to the dual convolution.

    Vertices 1 and 2 carry the same features; only vertex 1 has a further
    neighbor (3), which changes the dual neighborhood of arc 1->0.
    """
    g = add_self_loops(to_bidirected(from_edge_list([(0, 1), (0, 2), (1, 3)], 4)))
    dual = build_dual(g)
    a10, a20 = (int(k) for k in g.arc_index(np.array([1, 2]), np.array([0, 0])))

    for seed in range(20):
        F = _features(seed, 4, 3)
        F[2] = F[1]
        gat = GatLayerParams.init("gat", 3, 4, 1, Rng(seed))
        alpha = gat_attention(Tensor(F), g, gat).value[:, 0]
        assert alpha[a10] == alpha[a20]

        params = DualConvParams.init("dual", 6, 4, 1, Rng(seed), activation="none")
        out = dual_conv_forward(dual_features_init(Tensor(F), g), dual, params, Tape()).value
        assert np.max(np.abs(out[a10] - out[a20])) > 1e-8


# ---------------------------------------------------------------------------
# Primal convolution and the dual-primal block
# ---------------------------------------------------------------------------


def _primal_oracle(F, F_dual, g, params: PrimalConvParams) -> np.ndarray:
    heads = []
    for W, a in zip(params.W, params.a):
        z = F @ W.value
        out = np.zeros_like(z)
        for i in range(g.n):
            arcs = [k for k, (_, d) in enumerate(g.pairs()) if d == i]
            logits = np.array([_leaky(float(F_dual[k] @ a.value[:, 0])) for k in arcs])
            alpha = np.exp(logits - logits.max())
            alpha /= alpha.sum()
            for w, k in zip(alpha, arcs):
                out[i] += w * z[int(g.src[k])]
        heads.append(out)
    merged = np.concatenate(heads, axis=1)
    return _elu(merged) if params.activation == "elu" else merged


@pytest.mark.parametrize("seed", range(4))
def test_primal_conv_matches_dense_oracle(seed: int) -> None:
    g = _graph(seed)
    F = _features(seed, g.n, 4)
    F_dual = Rng(seed).spawn("dual").uniform((g.num_arcs, 3)) - 0.5
    params = PrimalConvParams.init("primal", 4, 2, 2, 3, Rng(seed))
    out = primal_conv_forward(Tensor(F), Tensor(F_dual), g, params, Tape())
    np.testing.assert_allclose(out.value, _primal_oracle(F, F_dual, g, params), atol=1e-12)


def test_primal_conv_equal_dual_features_is_mean_aggregation() -> None:
    g = _graph(2)
    F = _features(2, g.n, 3)
    params = PrimalConvParams.init("primal", 3, 2, 1, 2, Rng(2), activation="none")
    F_dual = Tensor(np.ones((g.num_arcs, 2)))
    out = primal_conv_forward(Tensor(F), F_dual, g, params, Tape()).value

    z = F @ params.W[0].value
    expected = np.zeros_like(z)
    np.add.at(expected, g.dst, z[g.src])
    expected /= np.bincount(g.dst, minlength=g.n)[:, None]
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_primal_conv_self_summand_is_self_transform() -> None:
    """Summing f_i W with normalised weights leaves f_i W."""
    g = _graph(6)
    F = _features(6, g.n, 3)
    params = PrimalConvParams.init("primal", 3, 2, 1, 2, Rng(6), activation="none")
    F_dual = Tensor(Rng(6).spawn("dual").uniform((g.num_arcs, 2)))
    out = primal_conv_forward(Tensor(F), F_dual, g, params, Tape(), summand="self").value
    np.testing.assert_allclose(out, F @ params.W[0].value, atol=1e-13)


def test_primal_conv_rejects_unknown_summand() -> None:
    g = _graph(0)
    params = PrimalConvParams.init("primal", 3, 2, 1, 2, Rng(0))
    with pytest.raises(ValueError):
        primal_conv_forward(
            Tensor(np.ones((g.n, 3))), Tensor(np.ones((g.num_arcs, 2))), g, params, Tape(),
            summand="other",
        )


def test_primal_conv_classic_dual_rows_shared_by_orientations() -> None:
    g = to_bidirected(from_edge_list([(0, 1), (1, 2), (2, 0)], 3))
    dual = build_dual(g, DualMode.CLASSIC)
    assert dual.n == 3
    params = PrimalConvParams.init("primal", 2, 2, 1, 2, Rng(0))
    F_dual = Tensor(Rng(0).uniform((3, 2)))
    out = primal_conv_forward(Tensor(np.ones((3, 2))), F_dual, g, params, Tape(), dual=dual)
    assert out.shape == (3, 2)
    with pytest.raises(ShapeMismatch):
        primal_conv_forward(Tensor(np.ones((3, 2))), F_dual, g, params, Tape())


def test_dpgcnn_block_permutation_equivariance() -> None:
    for seed in range(3):
        g = _graph(seed, n=7)
        F = _features(seed, g.n, 4)
        perm = Rng(seed).spawn("perm").permutation(g.n)
        params = DpgcnnBlockParams.init("block", 4, 3, 2, 4, 1, Rng(seed))

        out, _ = dpgcnn_block(Tensor(F), g, build_dual(g), params, Tape())
        F_perm = np.empty_like(F)
        F_perm[perm] = F
        g_perm = permute(g, perm)
        out_perm, _ = dpgcnn_block(Tensor(F_perm), g_perm, build_dual(g_perm), params, Tape())
        np.testing.assert_allclose(out_perm.value[perm], out.value, atol=1e-12)


# ---------------------------------------------------------------------------
# GAT as a special case
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("mode", [DualMode.CHAIN, DualMode.FAN])
def test_gat_reduction_equals_gat(mode: DualMode) -> None:
    for seed in range(20):
        g = add_self_loops(random_connected_bidirected(8, 5, seed))
        F = Tensor(_features(seed, g.n, 5))
        merge = "concat" if seed % 2 else "average"
        gat = GatLayerParams.init("gat", 5, 3, 2, Rng(seed), merge=merge)
        dual_params, primal_params = reduction_params_from_gat(gat)

        expected = gat_forward(F, g, gat, Tape()).value
        got = gat_reduction(F, g, build_dual(g, mode), dual_params, primal_params).value
        np.testing.assert_allclose(got, expected, atol=1e-10)


def test_gat_reduction_single_arc() -> None:
    g = add_self_loops(from_edge_list([], 1))
    F = Tensor(np.array([[0.4, -1.2]]))
    gat = GatLayerParams.init("gat", 2, 3, 1, Rng(0), activation="none")
    dual_params, primal_params = reduction_params_from_gat(gat)
    got = gat_reduction(F, g, build_dual(g), dual_params, primal_params).value
    np.testing.assert_allclose(got, F.value @ gat.W[0].value, atol=1e-15)


# ---------------------------------------------------------------------------
# Polynomial filters
# ---------------------------------------------------------------------------


def test_poly_order_zero_is_dense_layer() -> None:
    g = _graph(0)
    F = _features(0, g.n, 4)
    params = PolyConvParams.init("poly", 4, 3, 0, Rng(0), activation="none")
    out = poly_conv_forward(Tensor(F), g, params, Tape()).value
    np.testing.assert_allclose(out, F @ params.theta[0].value, atol=1e-14)


def test_poly_order_one_uniform_attention_matches_mean_oracle() -> None:
    g = _graph(1)
    F = _features(1, g.n, 4)
    params = PolyConvParams.init("poly", 4, 3, 1, Rng(1), activation="none")
    params.attention[0].value[:] = 0.0
    out = poly_conv_forward(Tensor(F), g, params, Tape()).value

    A = np.zeros((g.n, g.n))
    A[g.dst, g.src] = 1.0
    mean = A / A.sum(axis=1, keepdims=True)
    expected = F @ params.theta[0].value + mean @ F @ params.theta[1].value
    np.testing.assert_allclose(out, expected, atol=1e-13)


def test_poly_two_steps_reach_two_hops() -> None:
    g = add_self_loops(to_bidirected(from_edge_list([(0, 1), (1, 2), (2, 3), (3, 4)], 5)))
    params = PolyConvParams(
        theta=[Parameter(f"theta{i}", np.ones((1, 1))) for i in range(3)],
        attention=[Parameter(f"a{k}", np.zeros((2, 1))) for k in (1, 2)],
        activation="none",
    )
    F = Tensor(np.array([[1.0], [0.0], [0.0], [0.0], [0.0]]))
    out = poly_conv_forward(F, g, params, Tape()).value[:, 0]
    assert np.all(out[:3] > 0)
    np.testing.assert_array_equal(out[3:], [0.0, 0.0])


def test_poly_dual_attention_needs_dual_graph() -> None:
    g = _graph(2)
    params = PolyConvParams.init("poly", 4, 3, 2, Rng(2), dual_out=3)
    with pytest.raises(PreconditionError):
        poly_conv_forward(Tensor(np.ones((g.n, 4))), g, params, Tape())
    out = poly_conv_forward(Tensor(np.ones((g.n, 4))), g, params, Tape(), dual=build_dual(g))
    assert out.shape == (g.n, 3)


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(suites.LAYER_CASES))
def test_layer_gradients(name: str) -> None:
    for seed in range(3):
        fn, params = suites.LAYER_CASES[name](seed)
        result = check(fn, params, case=name, threshold=1e-4, max_entries=24, rng=Rng(seed))
        assert result.passed, [e.to_dict() for e in result.worst(3)]


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(suites.LAYER_CASES))
def test_layer_gradients_hundred_cases(name: str) -> None:
    for seed in range(100):
        fn, params = suites.LAYER_CASES[name](seed)
        result = check(
            fn, params, case=f"{name}[{seed}]", threshold=1e-4, max_entries=24, rng=Rng(seed)
        )
        assert result.passed, (seed, [e.to_dict() for e in result.worst(3)])
