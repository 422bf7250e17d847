"""Dense float64 tensors with tape-based reverse-mode differentiation."""

from dpgcnn.autodiff.init import glorot_uniform, zeros
from dpgcnn.autodiff.ops import (
    add,
    add_bias,
    concat_cols,
    dropout,
    elu,
    gather_rows,
    leaky_relu,
    masked_softmax_cross_entropy,
    matmul,
    mul_rows,
    relu,
    row_slice,
    row_softmax,
    scale,
    segment_softmax,
    segment_sum,
    sum_all,
)
from dpgcnn.autodiff.optim import Adam, AdamState, adam_step
from dpgcnn.autodiff.rng import Rng
from dpgcnn.autodiff.tensor import Parameter, Tape, Tensor, backward, constant

__all__ = [
    "Adam",
    "AdamState",
    "Parameter",
    "Rng",
    "Tape",
    "Tensor",
    "adam_step",
    "add",
    "add_bias",
    "backward",
    "concat_cols",
    "constant",
    "dropout",
    "elu",
    "gather_rows",
    "glorot_uniform",
    "leaky_relu",
    "masked_softmax_cross_entropy",
    "matmul",
    "mul_rows",
    "relu",
    "row_slice",
    "row_softmax",
    "scale",
    "segment_softmax",
    "segment_sum",
    "sum_all",
    "zeros",
]
