"""Kernel reconstruction loss."""

from kernel_estimation.tensor.ops import absolute, scale, sub, sum_all
from kernel_estimation.tensor.tensor import Tensor
from kernel_estimation.utils.errors import DimensionError


def kernel_loss(prediction: Tensor, target: Tensor) -> Tensor:
    """
    Mean over batch and HR sites of the L1 distance between kernel vectors.

    The tap axis is summed, not averaged: the result is
    Σ|K − G| / (N·H·W) for N×(k·k)×H×W inputs.

    Args:
        prediction: Estimated kernel map
        target: Ground-truth kernel map

    Returns:
        Scalar tensor
    """
    if prediction.shape != target.shape or prediction.ndim != 4:
        raise DimensionError(
            "kernel maps must be N×(k·k)×H×W with equal shapes",
            details={"prediction": list(prediction.shape), "target": list(target.shape)},
        )
    n, _, height, width = prediction.shape
    return scale(sum_all(absolute(sub(prediction, target))), 1.0 / (n * height * width))
