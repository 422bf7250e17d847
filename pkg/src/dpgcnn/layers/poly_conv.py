"""Polynomial attention filters with one attention scorer per order."""

from __future__ import annotations

from typing import List, Optional

from dpgcnn.autodiff import ops
from dpgcnn.autodiff.tensor import Tape, Tensor
from dpgcnn.errors import PreconditionError
from dpgcnn.graph.dual import DualGraph
from dpgcnn.graph.primal import DirectedGraph
from dpgcnn.layers.common import Dropout, activate, attend, check_rows, drop, require_neighbors
from dpgcnn.layers.dual_conv import DualFeatures, dual_conv_forward
from dpgcnn.layers.gat import attention_logits
from dpgcnn.layers.params import PolyConvParams
from dpgcnn.layers.primal_conv import arc_features


def poly_conv_forward(
    F: Tensor,
    g: DirectedGraph,
    params: PolyConvParams,
    tape: Tape,
    dropout: Optional[Dropout] = None,
    dual: Optional[DualGraph] = None,
) -> Tensor:
    """activation(sum over l = 0..p of f^(l) theta_l).

    f^(0) = F and f^(k) diffuses f^(k-1) one step with the order-k
    attention. The diffusion is linear, so each term is computed as the
    diffusion of F theta_l and never at the input width.

    Order-k attention is LeakyReLU(a_k . [h_i, h_j]) with h = F theta_0,
    or LeakyReLU(a_k . f~'_arc) from a dual conv over [h_i, h_j] when the
    params carry dual weights.

    Raises:
        PreconditionError: Dual-derived attention without a dual graph.
        EmptyNeighborhood: If a vertex has no incoming arcs (order >= 1).
    """
    check_rows(F, g.n, "vertex features")
    x = drop(dropout, F)
    base = ops.matmul(x, tape.watch(params.theta[0]))
    if params.order == 0:
        return activate(params.activation, base)

    nb = g.neighborhoods()
    require_neighbors(nb)
    per_arc = None
    if params.dual is not None:
        if dual is None:
            raise PreconditionError("dual-derived attention needs a dual graph")
        features = DualFeatures.from_graph(base, g, dual)
        F_dual = dual_conv_forward(features, dual, params.dual, tape, dropout)
        per_arc = arc_features(F_dual, g, dual)

    alphas: List[Tensor] = []
    for a in params.attention:
        at = tape.watch(a)
        if per_arc is not None:
            logits = ops.leaky_relu(ops.matmul(per_arc, at))
        else:
            logits = attention_logits(base, at, nb.receivers, nb.senders)
        alphas.append(drop(dropout, ops.segment_softmax(logits, nb.receivers, nb.count)))

    out = base
    for order in range(1, params.order + 1):
        term = ops.matmul(x, tape.watch(params.theta[order]))
        for alpha in alphas[:order]:
            term = attend(term, alpha, nb, nb.senders)
        out = ops.add(out, term)
    return activate(params.activation, out)
