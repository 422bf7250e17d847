"""Model assembly from a ModelSpec, and the shipped architectures."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from dpgcnn.autodiff import ops
from dpgcnn.autodiff.rng import Rng
from dpgcnn.autodiff.tensor import Array, Parameter, Tape, Tensor
from dpgcnn.errors import ConfigError, PreconditionError, ShapeMismatch
from dpgcnn.graph.dual import DualGraph, build_dual, sparsify_dual
from dpgcnn.graph.primal import DirectedGraph, IntArray, add_self_loops, remove_self_loops
from dpgcnn.layers.common import Dropout, drop
from dpgcnn.layers.dual_conv import DualFeatures, dual_gat_forward
from dpgcnn.layers.gat import gat_forward
from dpgcnn.layers.params import (
    DenseParams,
    DpgcnnBlockParams,
    DualConvParams,
    GatLayerParams,
    PolyConvParams,
)
from dpgcnn.layers.poly_conv import poly_conv_forward
from dpgcnn.layers.primal_conv import arc_features, dpgcnn_block
from dpgcnn.layers.spec import LayerSpec, ModelSpec
from dpgcnn.utils.logging import get_logger

log = get_logger(__name__)

LINK_CLASSES = 2
LINK_WIDTH = 16
POLY_WIDTH = 16

LayerParams = Union[GatLayerParams, DpgcnnBlockParams, PolyConvParams, DualConvParams, DenseParams]


@dataclass
class GraphContext:
    """Everything a forward pass reads besides the parameters.

    ``graph`` is the primal graph as the model sees it (self-loops already
    added or removed per the spec). ``targets`` are arc ids of the
    (i, j), i < j, arcs a link model classifies and ``reverse_targets``
    the ids of their (j, i) twins.
    """

    features: Tensor
    graph: DirectedGraph
    dual: Optional[DualGraph] = None
    targets: Optional[IntArray] = None
    reverse_targets: Optional[IntArray] = None

    @classmethod
    def prepare(
        cls,
        features: Array,
        g: DirectedGraph,
        spec: ModelSpec,
        target_pairs: Optional[np.ndarray] = None,
        sparsify_k: Optional[int] = None,
        seed: int = 0,
    ) -> "GraphContext":
        """Apply the spec's self-loop rule, build (and sparsify) the dual, map targets.

        Raises:
            ShapeMismatch: If features and graph disagree on the vertex count.
            PreconditionError: If a target pair is not an arc of the graph.
        """
        if features.shape[0] != g.n:
            raise ShapeMismatch(f"{features.shape[0]} feature rows for {g.n} vertices")
        graph = add_self_loops(g) if spec.self_loops else remove_self_loops(g)
        dual = None
        if spec.uses_dual:
            dual = build_dual(graph, spec.dual_mode)
            if sparsify_k is not None:
                dual = sparsify_dual(dual, sparsify_k, seed)
        targets = reverse = None
        if target_pairs is not None:
            pairs = np.asarray(target_pairs, dtype=np.int64).reshape(-1, 2)
            targets = graph.arc_index(pairs[:, 0], pairs[:, 1])
            reverse = graph.arc_index(pairs[:, 1], pairs[:, 0])
            if np.any(targets < 0):
                raise PreconditionError("link targets must be arcs of the model graph")
            if spec.readout in ("edge", "both") and np.any(reverse < 0):
                raise PreconditionError("edge readouts need both orientations of every target")
        return cls(Tensor(features), graph, dual, targets, reverse)

    @property
    def target_src(self) -> IntArray:
        assert self.targets is not None
        return self.graph.src[self.targets]

    @property
    def target_dst(self) -> IntArray:
        assert self.targets is not None
        return self.graph.dst[self.targets]


class Model:
    """Parameters for every layer of a ModelSpec plus the forward pass."""

    def __init__(
        self,
        spec: ModelSpec,
        layers: List[LayerParams],
        readout: Optional[DenseParams] = None,
        in_features: Optional[int] = None,
    ) -> None:
        self.spec = spec
        self.layers = layers
        self.readout = readout
        self.in_features = in_features

    @classmethod
    def init(cls, spec: ModelSpec, rng: Rng, in_features: Optional[int] = None) -> "Model":
        """Allocate and initialise all parameters.

        Raises:
            ConfigError: If the spec is invalid or its widths do not chain.
        """
        spec.validate()
        q = in_features if in_features is not None else spec.in_features
        if q is None:
            raise ConfigError("input width unknown: set in_features")
        spec.check_dataset(q, None)
        rng = rng.spawn("init")

        width, edge_width = q, 0
        layers: List[LayerParams] = []
        for i, layer in enumerate(spec.layers):
            params, width, edge_width = _init_layer(f"layer{i}", layer, width, edge_width, rng)
            layers.append(params)

        readout = None
        if spec.task == "link_direction":
            if spec.readout in ("edge", "both") and edge_width == 0:
                raise ConfigError(f"readout {spec.readout!r} needs a layer producing edge features")
            fc_in = {
                "endpoints": 2 * width,
                "edge": 2 * edge_width,
                "both": 2 * width + 2 * edge_width,
            }[spec.readout]
            readout = DenseParams.init("readout", fc_in, LINK_CLASSES, rng, bias=True)
        model = cls(spec, layers, readout, q)
        log.debug("model_initialised", layers=len(layers), params=count_params(model))
        return model

    def parameters(self) -> List[Parameter]:
        params: List[Parameter] = []
        for layer in self.layers:
            params.extend(layer.parameters())
        if self.readout is not None:
            params.extend(self.readout.parameters())
        return params

    def state_dict(self) -> Dict[str, Array]:
        return {p.name: p.value.copy() for p in self.parameters()}

    def load_state_dict(self, state: Dict[str, Array]) -> None:
        """Copy values in by parameter name.

        Raises:
            ConfigError: If the names differ from this model's.
            ShapeMismatch: If a value has the wrong shape.
        """
        params = self.parameters()
        names = {p.name for p in params}
        if names != set(state):
            missing = sorted(names - set(state))[:3]
            extra = sorted(set(state) - names)[:3]
            raise ConfigError(f"state does not match model (missing {missing}, unexpected {extra})")
        for p in params:
            value = np.asarray(state[p.name], dtype=np.float64)
            if value.shape != p.value.shape:
                raise ShapeMismatch(f"{p.name}: {value.shape} vs {p.value.shape}")
            p.value[...] = value

    def forward(self, ctx: GraphContext, tape: Tape, dropout: Optional[Dropout] = None) -> Tensor:
        """Logits: n x classes for vertex models, targets x 2 for link models."""
        if ctx.features.cols != self.in_features:
            raise ShapeMismatch(
                f"model expects {self.in_features} input features, got {ctx.features.cols}"
            )
        g, dual = ctx.graph, ctx.dual
        h = ctx.features
        edge: Optional[Tensor] = None
        for layer, params in zip(self.spec.layers, self.layers):
            if isinstance(params, GatLayerParams):
                h = gat_forward(h, g, params, tape, dropout)
            elif isinstance(params, DpgcnnBlockParams):
                assert dual is not None
                prev = edge if layer.concat_edge else None
                h, edge = dpgcnn_block(
                    h, g, dual, params, tape, dropout, prev, self.spec.primal_summand
                )
            elif isinstance(params, PolyConvParams):
                h = poly_conv_forward(h, g, params, tape, dropout, dual)
            elif isinstance(params, DualConvParams):
                assert dual is not None
                source = edge if edge is not None else DualFeatures.from_graph(h, g, dual)
                edge = dual_gat_forward(source, dual, params, tape, dropout)
            else:
                h = ops.matmul(drop(dropout, h), tape.watch(params.W))

        if self.readout is None:
            return h
        return self._readout(h, edge, ctx, tape, dropout)

    def _readout(
        self,
        h: Tensor,
        edge: Optional[Tensor],
        ctx: GraphContext,
        tape: Tape,
        dropout: Optional[Dropout],
    ) -> Tensor:
        if ctx.targets is None:
            raise PreconditionError("link models need target arcs in the graph context")
        assert self.readout is not None and self.readout.b is not None
        parts: List[Tensor] = []
        if self.spec.readout in ("endpoints", "both"):
            parts += [ops.gather_rows(h, ctx.target_src), ops.gather_rows(h, ctx.target_dst)]
        if self.spec.readout in ("edge", "both"):
            assert edge is not None and ctx.reverse_targets is not None
            per_arc = arc_features(edge, ctx.graph, ctx.dual)
            parts += [
                ops.gather_rows(per_arc, ctx.targets),
                ops.gather_rows(per_arc, ctx.reverse_targets),
            ]
        x = drop(dropout, reduce(ops.concat_cols, parts))
        logits = ops.matmul(x, tape.watch(self.readout.W))
        return ops.add_bias(logits, tape.watch(self.readout.b))

    def predict(self, ctx: GraphContext) -> Array:
        """Class probabilities in eval mode."""
        return ops.row_softmax(self.forward(ctx, Tape())).value

    def __repr__(self) -> str:
        kinds = ",".join(layer.kind for layer in self.spec.layers)
        return f"Model(task={self.spec.task}, layers=[{kinds}], params={count_params(self)})"


def _init_layer(
    prefix: str, layer: LayerSpec, width: int, edge_width: int, rng: Rng
) -> Tuple[LayerParams, int, int]:
    """Parameters for one layer and the (vertex, edge) widths after it."""
    if layer.kind == "gat":
        params: LayerParams = GatLayerParams.init(
            prefix, width, layer.out_features, layer.heads, rng, layer.merge, layer.activation
        )
        return params, layer.width, edge_width
    if layer.kind == "dpgcnn":
        if layer.concat_edge and edge_width == 0:
            raise ConfigError(f"{prefix}: concat_edge needs edge features from an earlier layer")
        block = DpgcnnBlockParams.init(
            prefix,
            width,
            layer.out_features,
            layer.heads,
            layer.dual_out,
            layer.dual_heads,
            rng,
            merge=layer.merge,
            activation=layer.activation,
            dual_activation=layer.dual_activation,
            edge_in=edge_width if layer.concat_edge else 0,
        )
        return block, layer.width, block.dual.width
    if layer.kind == "poly":
        poly = PolyConvParams.init(
            prefix,
            width,
            layer.out_features,
            layer.order,
            rng,
            activation=layer.activation,
            dual_out=layer.dual_out if layer.dual else None,
            dual_heads=layer.dual_heads,
            dual_activation=layer.dual_activation,
        )
        return poly, layer.out_features, edge_width
    if layer.kind == "dual_gat":
        dual_in = edge_width if edge_width else 2 * width
        conv = DualConvParams.init(
            prefix, dual_in, layer.out_features, layer.heads, rng, layer.activation
        )
        return conv, width, conv.width
    return DenseParams.init(prefix, width, layer.out_features, rng, bias=False), layer.width, 0


def count_params(model: Model) -> int:
    return sum(p.size for p in model.parameters())


# ---------------------------------------------------------------------------
# Shipped architectures
# ---------------------------------------------------------------------------


def build_vertex_model(
    q_in: int,
    classes: int,
    variant: str = "dpgcnn",
    dual_layers: str = "all",
    heads: int = 8,
    hidden: int = 8,
    dual_out: int = 32,
) -> ModelSpec:
    """Two-layer citation classifier.

    Layer one has ``heads`` heads of ``hidden`` features, concatenated, ELU.
    Layer two has one head of ``classes`` features. ``variant="gat"`` uses
    plain attention throughout. With ``variant="dpgcnn"`` a dual conv (one
    head, ``dual_out`` features) precedes the primal step of the layers
    picked by ``dual_layers``: ``all``, ``first`` or ``last``.
    """
    if variant not in ("gat", "dpgcnn"):
        raise ConfigError(f"unknown vertex model variant {variant!r}")
    if dual_layers not in ("all", "first", "last"):
        raise ConfigError(f"dual_layers must be all, first or last, got {dual_layers!r}")
    use_dual = {
        "all": (True, True),
        "first": (True, False),
        "last": (False, True),
    }[dual_layers]
    kinds = ["dpgcnn" if variant == "dpgcnn" and dual else "gat" for dual in use_dual]
    layers = [
        LayerSpec(
            kind=kinds[0],
            out_features=hidden,
            heads=heads,
            merge="concat",
            activation="elu",
            dual_out=dual_out,
        ),
        LayerSpec(
            kind=kinds[1],
            out_features=classes,
            heads=1,
            merge="average",
            activation="softmax",
            dual_out=dual_out,
        ),
    ]
    spec = ModelSpec(
        task="vertex_classification", layers=layers, in_features=q_in, classes=classes
    )
    spec.validate()
    return spec


def build_link_model(q_in: int, variant: str = "dpgcnn", width: int = LINK_WIDTH) -> ModelSpec:
    """Three conv layers and a fully connected readout over each target pair.

    The pair {i, j} is read through both of its dual vertices, so edge
    readouts see [e_ij, e_ji].

    primal_gat
        GAT layers; readout over [h_i, h_j].
    dual_gat
        bias-free reduction to ``width`` features, then dual-only layers
        starting from [x_i, x_j]; readout over [e_ij, e_ji].
    dpgcnn
        dual-primal layers, the later ones also reading the previous edge
        features; readout over [h_i, h_j, e_ij, e_ji].
    """
    if variant == "primal_gat":
        layers = [LayerSpec(kind="gat", out_features=width) for _ in range(3)]
        readout = "endpoints"
    elif variant == "dual_gat":
        layers = [LayerSpec(kind="dense", out_features=width, activation="none")]
        layers += [LayerSpec(kind="dual_gat", out_features=width) for _ in range(3)]
        readout = "edge"
    elif variant == "dpgcnn":
        layers = [
            LayerSpec(kind="dpgcnn", out_features=width, dual_out=width, concat_edge=i > 0)
            for i in range(3)
        ]
        readout = "both"
    else:
        raise ConfigError(f"unknown link model variant {variant!r}")
    spec = ModelSpec(task="link_direction", layers=layers, in_features=q_in, readout=readout)
    spec.validate()
    return spec


def build_poly_model(
    q_in: int, classes: int, order: int, dual: bool = False, width: int = POLY_WIDTH
) -> ModelSpec:
    """Two polynomial attention layers; with ``dual`` only the second uses dual attention."""
    layers = [
        LayerSpec(kind="poly", out_features=width, order=order, activation="elu"),
        LayerSpec(
            kind="poly",
            out_features=classes,
            order=order,
            activation="softmax",
            dual=dual,
            dual_out=width,
        ),
    ]
    spec = ModelSpec(
        task="vertex_classification", layers=layers, in_features=q_in, classes=classes
    )
    spec.validate()
    return spec

