"""Finite-difference suites over ops, layers and whole models.

Each case builder takes a seed and returns a loss closure plus the
parameters to check. Non-scalar outputs are reduced with fixed random
row and column weights, so a gradient routed to the wrong row or column
shows up.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from dpgcnn.autodiff import ops
from dpgcnn.autodiff.gradcheck import GradCheckResult, LossFn, check
from dpgcnn.autodiff.rng import Rng
from dpgcnn.autodiff.tensor import Parameter, Tape, Tensor
from dpgcnn.datasets.link import make_link_task
from dpgcnn.datasets.synthetic import planted_direction, random_connected_bidirected, two_cluster
from dpgcnn.errors import PreconditionError
from dpgcnn.graph.dual import build_dual
from dpgcnn.graph.primal import DirectedGraph, add_self_loops
from dpgcnn.layers.common import Dropout
from dpgcnn.layers.dual_conv import DualFeatures, dual_conv_forward
from dpgcnn.layers.gat import gat_forward
from dpgcnn.layers.models import GraphContext, Model, build_link_model, build_vertex_model
from dpgcnn.layers.params import (
    DpgcnnBlockParams,
    DualConvParams,
    GatLayerParams,
    PolyConvParams,
    PrimalConvParams,
)
from dpgcnn.layers.poly_conv import poly_conv_forward
from dpgcnn.layers.primal_conv import dpgcnn_block, primal_conv_forward
from dpgcnn.utils.logging import get_logger

log = get_logger(__name__)

Case = Tuple[LossFn, List[Parameter]]
CaseBuilder = Callable[[int], Case]

THRESHOLDS = {"ops": 1e-5, "layers": 1e-4, "model": 1e-4}


@dataclass
class SuiteReport:
    scope: str
    results: List[GradCheckResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def max_rel_error(self) -> float:
        return max((r.max_rel_error for r in self.results), default=0.0)

    def to_dict(self, worst: int = 5) -> dict:
        entries = [e for r in self.results for e in r.entries]
        entries.sort(key=lambda e: (-e.rel_error, e.case, e.parameter, e.index))
        return {
            "scope": self.scope,
            "passed": self.passed,
            "cases": len(self.results),
            "failed_cases": sorted({r.case for r in self.results if not r.passed}),
            "max_rel_error": self.max_rel_error,
            "worst": [e.to_dict() for e in entries[:worst]],
        }


def _param(name: str, rng: Rng, rows: int, cols: int, away_from_zero: bool = False) -> Parameter:
    value = rng.spawn(name).uniform((rows, cols)) * 2.0 - 1.0
    if away_from_zero:
        value = np.sign(value) * (0.1 + np.abs(value))
    return Parameter(name, value)


def _reduce(y: Tensor, rng: Rng) -> Tensor:
    """Scalar sum_i w_i sum_j y_ij r_j with fixed random w and r."""
    r = Tensor(rng.spawn("cols").uniform((y.cols, 1)) + 0.5)
    w = Tensor(rng.spawn("rows").uniform((y.rows, 1)) + 0.5)
    return ops.sum_all(ops.mul_rows(ops.matmul(y, r), w))


def _unary(op: Callable[[Tensor], Tensor], away_from_zero: bool = False) -> CaseBuilder:
    def build(seed: int) -> Case:
        rng = Rng(seed)
        x = _param("x", rng, 4, 3, away_from_zero)
        return (lambda tape: _reduce(op(tape.watch(x)), rng)), [x]

    return build


def _binary(op: Callable[[Tensor, Tensor], Tensor], shape_b: Tuple[int, int]) -> CaseBuilder:
    def build(seed: int) -> Case:
        rng = Rng(seed)
        a = _param("a", rng, 4, 3)
        b = _param("b", rng, *shape_b)
        return (lambda tape: _reduce(op(tape.watch(a), tape.watch(b)), rng)), [a, b]

    return build


def _segment_softmax(seed: int) -> Case:
    rng = Rng(seed)
    x = _param("logits", rng, 7, 1)
    segments = np.array([0, 0, 0, 1, 2, 2, 3])
    return (
        lambda tape: _reduce(ops.segment_softmax(tape.watch(x), segments, 4), rng)
    ), [x]


def _segment_sum(seed: int) -> Case:
    rng = Rng(seed)
    x = _param("x", rng, 6, 2)
    segments = np.array([0, 0, 1, 3, 3, 3])
    return (lambda tape: _reduce(ops.segment_sum(tape.watch(x), segments, 5), rng)), [x]


def _dropout(seed: int) -> Case:
    rng = Rng(seed)
    x = _param("x", rng, 5, 4)

    def fn(tape: Tape) -> Tensor:
        return _reduce(ops.dropout(tape.watch(x), 0.7, Rng(seed).spawn("mask")), rng)

    return fn, [x]


def _cross_entropy(seed: int) -> Case:
    rng = Rng(seed)
    x = _param("logits", rng, 6, 3)
    labels = np.array([0, 2, 1, 1, 0, 2])
    rows = np.array([0, 1, 3, 5])
    return (lambda tape: ops.masked_softmax_cross_entropy(tape.watch(x), labels, rows)), [x]


OPS_CASES: Dict[str, CaseBuilder] = {
    "matmul": _binary(ops.matmul, (3, 5)),
    "add": _binary(ops.add, (4, 3)),
    "add_bias": _binary(ops.add_bias, (1, 3)),
    "mul_rows": _binary(ops.mul_rows, (4, 1)),
    "concat_cols": _binary(ops.concat_cols, (4, 2)),
    "scale": _unary(lambda x: ops.scale(x, -1.7)),
    "row_slice": _unary(lambda x: ops.row_slice(x, 1, 3)),
    "gather_rows": _unary(lambda x: ops.gather_rows(x, [0, 2, 2, 3, 1])),
    "sum_all": _unary(lambda x: ops.scale(ops.sum_all(x), 0.5)),
    "leaky_relu": _unary(ops.leaky_relu, away_from_zero=True),
    "relu": _unary(ops.relu, away_from_zero=True),
    "elu": _unary(ops.elu, away_from_zero=True),
    "row_softmax": _unary(ops.row_softmax),
    "segment_sum": _segment_sum,
    "segment_softmax": _segment_softmax,
    "dropout": _dropout,
    "masked_softmax_cross_entropy": _cross_entropy,
}


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------


def _small_graph(seed: int) -> DirectedGraph:
    return add_self_loops(random_connected_bidirected(8, 5, seed))


def _gat(seed: int) -> Case:
    rng, g = Rng(seed), _small_graph(seed)
    F = _param("F", rng, g.n, 5)
    params = GatLayerParams.init("gat", 5, 3, 2, rng)

    def fn(tape: Tape) -> Tensor:
        return _reduce(gat_forward(tape.watch(F), g, params, tape), rng)

    return fn, [F] + params.parameters()


def _dual_conv(seed: int) -> Case:
    rng, g = Rng(seed), _small_graph(seed)
    dual = build_dual(g)
    F = _param("F", rng, g.n, 3)
    params = DualConvParams.init("dual", 6, 4, 2, rng, activation="elu")

    def fn(tape: Tape) -> Tensor:
        features = DualFeatures.from_graph(tape.watch(F), g, dual)
        return _reduce(dual_conv_forward(features, dual, params, tape), rng)

    return fn, [F] + params.parameters()


def _primal_conv(seed: int) -> Case:
    rng, g = Rng(seed), _small_graph(seed)
    F = _param("F", rng, g.n, 4)
    F_dual = _param("F_dual", rng, g.num_arcs, 3)
    params = PrimalConvParams.init("primal", 4, 3, 2, 3, rng)

    def fn(tape: Tape) -> Tensor:
        out = primal_conv_forward(tape.watch(F), tape.watch(F_dual), g, params, tape)
        return _reduce(out, rng)

    return fn, [F, F_dual] + params.parameters()


def _dpgcnn_block(seed: int) -> Case:
    rng, g = Rng(seed), _small_graph(seed)
    dual = build_dual(g)
    F = _param("F", rng, g.n, 4)
    edge = _param("edge", rng, g.num_arcs, 2)
    params = DpgcnnBlockParams.init("block", 4, 2, 2, 3, 1, rng, edge_in=2)

    def fn(tape: Tape) -> Tensor:
        out, F_dual = dpgcnn_block(tape.watch(F), g, dual, params, tape, edge=tape.watch(edge))
        return ops.add(_reduce(out, rng.spawn("vertex")), _reduce(F_dual, rng.spawn("edge")))

    return fn, [F, edge] + params.parameters()


def _poly(dual: bool) -> CaseBuilder:
    def build(seed: int) -> Case:
        rng, g = Rng(seed), _small_graph(seed)
        dual_graph = build_dual(g) if dual else None
        F = _param("F", rng, g.n, 4)
        params = PolyConvParams.init("poly", 4, 3, 2, rng, dual_out=3 if dual else None)

        def fn(tape: Tape) -> Tensor:
            out = poly_conv_forward(tape.watch(F), g, params, tape, dual=dual_graph)
            return _reduce(out, rng)

        return fn, [F] + params.parameters()

    return build


LAYER_CASES: Dict[str, CaseBuilder] = {
    "gat": _gat,
    "dual_conv": _dual_conv,
    "primal_conv": _primal_conv,
    "dpgcnn_block": _dpgcnn_block,
    "poly_conv": _poly(False),
    "poly_conv_dual": _poly(True),
}


# ---------------------------------------------------------------------------
# End-to-end models
# ---------------------------------------------------------------------------


def _vertex_model(seed: int) -> Case:
    data = two_cluster(n=10, q=4, seed=seed, degree=2)
    spec = build_vertex_model(4, 2, heads=2, hidden=3, dual_out=4)
    ctx = GraphContext.prepare(data.features, data.graph, spec)
    model = Model.init(spec, Rng(seed), 4)
    rows = np.arange(data.features.shape[0])

    def fn(tape: Tape) -> Tensor:
        plan = Dropout(0.8, Rng(seed).spawn("dropout"))
        logits = model.forward(ctx, tape, plan)
        return ops.masked_softmax_cross_entropy(logits, data.labels, rows)

    return fn, model.parameters()


def _link_model(seed: int) -> Case:
    data = planted_direction(n=10, q=4, seed=seed, degree=2)
    task = make_link_task(data.graph, (0.3, 0.3, 0.3), seed)
    spec = build_link_model(4, "dpgcnn", width=3)
    ctx = GraphContext.prepare(data.features, task.graph, spec, target_pairs=task.pairs)
    model = Model.init(spec, Rng(seed), 4)

    def fn(tape: Tape) -> Tensor:
        logits = model.forward(ctx, tape)
        return ops.masked_softmax_cross_entropy(logits, task.labels, task.train)

    return fn, model.parameters()


MODEL_CASES: Dict[str, CaseBuilder] = {
    "vertex_dpgcnn": _vertex_model,
    "link_dpgcnn": _link_model,
}

SUITES: Dict[str, Dict[str, CaseBuilder]] = {
    "ops": OPS_CASES,
    "layers": LAYER_CASES,
    "model": MODEL_CASES,
}


def run_suite(
    scope: str,
    seeds: Optional[List[int]] = None,
    threshold: Optional[float] = None,
    max_entries: Optional[int] = 24,
) -> SuiteReport:
    """Check every case of ``scope`` once per seed.

    Raises:
        PreconditionError: If the scope is unknown.
    """
    if scope not in SUITES:
        raise PreconditionError(f"unknown gradcheck scope {scope!r}; use {sorted(SUITES)}")
    limit = threshold if threshold is not None else THRESHOLDS.get(scope, 1e-4)
    results = []
    for name, build in SUITES[scope].items():
        for seed in seeds if seeds is not None else [0]:
            fn, params = build(seed)
            result = check(
                fn,
                params,
                case=f"{name}[{seed}]",
                threshold=limit,
                max_entries=max_entries,
                rng=Rng(seed).spawn("entries"),
            )
            log.info(
                "gradcheck_case",
                case=result.case,
                entries=len(result.entries),
                max_rel_error=result.max_rel_error,
                passed=result.passed,
            )
            results.append(result)
    return SuiteReport(scope, results)
