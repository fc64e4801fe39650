"""Dense tensor algebra, reverse-mode differentiation and Adam."""

from kernel_estimation.tensor.gradcheck import grad_check, grad_check_parameters
from kernel_estimation.tensor.ops import (
    absolute,
    add,
    channel_slice,
    concat_channels,
    conv2d,
    conv_transpose2d,
    count_macs,
    mul,
    nearest_upsample,
    pad_replicate,
    relu,
    scale,
    softmax_channels,
    spatial_crop,
    split_channels,
    sub,
    sum_all,
)
from kernel_estimation.tensor.optim import Adam, AdamConfig, AdamState, adam_step
from kernel_estimation.tensor.tape import Gradients, Tape, backward, current_tape
from kernel_estimation.tensor.tensor import Parameter, Tensor

__all__ = [
    "Adam",
    "AdamConfig",
    "AdamState",
    "Gradients",
    "Parameter",
    "Tape",
    "Tensor",
    "absolute",
    "adam_step",
    "add",
    "backward",
    "channel_slice",
    "concat_channels",
    "conv2d",
    "conv_transpose2d",
    "count_macs",
    "current_tape",
    "grad_check",
    "grad_check_parameters",
    "mul",
    "nearest_upsample",
    "pad_replicate",
    "relu",
    "scale",
    "softmax_channels",
    "spatial_crop",
    "split_channels",
    "sub",
    "sum_all",
]
