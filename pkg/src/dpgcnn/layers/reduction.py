"""GAT as a dual-primal network with identity dual attention."""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from dpgcnn.autodiff.tensor import Parameter, Tape, Tensor
from dpgcnn.graph.dual import DualGraph
from dpgcnn.graph.primal import DirectedGraph
from dpgcnn.layers.dual_conv import DualFeatures, dual_conv_forward
from dpgcnn.layers.params import DualConvParams, GatLayerParams, PrimalConvParams
from dpgcnn.layers.primal_conv import primal_conv_forward


def reduction_params_from_gat(gat: GatLayerParams) -> Tuple[DualConvParams, PrimalConvParams]:
    """Dual and primal parameters that reproduce ``gat`` exactly.

    The dual weight is blockdiag(W, W) with W the column concatenation of
    every head's weight, so the dual output of arc (j, i) is
    [f_j W, f_i W]. Head h's primal attention vector places that head's
    sender half of a against the f_j W block and its receiver half against
    the f_i W block, zero elsewhere.
    """
    w_all = np.concatenate([w.value for w in gat.W], axis=1)
    q, width = w_all.shape
    out = gat.out_features

    w_dual = np.zeros((2 * q, 2 * width))
    w_dual[:q, :width] = w_all
    w_dual[q:, width:] = w_all
    dual = DualConvParams(
        W=[Parameter("reduction.dual.head0.W", w_dual)],
        a=[Parameter("reduction.dual.head0.a", np.zeros((4 * width, 1)))],
        activation="none",
    )

    w_primal, a_primal = [], []
    for h, (w, a) in enumerate(zip(gat.W, gat.a)):
        receiver_half, sender_half = a.value[:out], a.value[out:]
        vec = np.zeros((2 * width, 1))
        vec[h * out : (h + 1) * out] = sender_half
        vec[width + h * out : width + (h + 1) * out] = receiver_half
        w_primal.append(Parameter(f"reduction.head{h}.W", w.value.copy()))
        a_primal.append(Parameter(f"reduction.head{h}.a", vec))
    primal = PrimalConvParams(w_primal, a_primal, gat.merge, gat.activation)
    return dual, primal


def gat_reduction(
    F: Tensor,
    g: DirectedGraph,
    dual: DualGraph,
    dual_params: DualConvParams,
    primal_params: PrimalConvParams,
    tape: Optional[Tape] = None,
    summand: str = "neighbor",
) -> Tensor:
    """Dual-primal forward pass with every dual vertex attending only to itself."""
    tape = tape if tape is not None else Tape()
    features = DualFeatures.from_graph(F, g, dual)
    F_dual = dual_conv_forward(features, dual, dual_params, tape, identity_attention=True)
    return primal_conv_forward(F, F_dual, g, primal_params, tape, summand=summand, dual=dual)
