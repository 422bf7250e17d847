"""Attention layers on primal and dual graphs, and model assembly."""

from dpgcnn.layers.dual_conv import DualFeatures, dual_conv_forward, dual_features_init
from dpgcnn.layers.gat import gat_forward
from dpgcnn.layers.models import (
    GraphContext,
    Model,
    build_link_model,
    build_poly_model,
    build_vertex_model,
    count_params,
)
from dpgcnn.layers.params import (
    DenseParams,
    DpgcnnBlockParams,
    DualConvParams,
    GatLayerParams,
    PolyConvParams,
    PrimalConvParams,
)
from dpgcnn.layers.poly_conv import poly_conv_forward
from dpgcnn.layers.primal_conv import dpgcnn_block, primal_conv_forward
from dpgcnn.layers.reduction import gat_reduction, reduction_params_from_gat
from dpgcnn.layers.spec import LayerSpec, ModelSpec

__all__ = [
    "DenseParams",
    "DpgcnnBlockParams",
    "DualConvParams",
    "DualFeatures",
    "GatLayerParams",
    "GraphContext",
    "LayerSpec",
    "Model",
    "ModelSpec",
    "PolyConvParams",
    "PrimalConvParams",
    "build_link_model",
    "build_poly_model",
    "build_vertex_model",
    "count_params",
    "dpgcnn_block",
    "dual_conv_forward",
    "dual_features_init",
    "gat_forward",
    "gat_reduction",
    "poly_conv_forward",
    "primal_conv_forward",
    "reduction_params_from_gat",
]
