"""Analytic and empirical receptive fields of MANet."""

from fractions import Fraction
from typing import List, Tuple

import numpy as np

from kernel_estimation.models.configs import MANetConfig
from kernel_estimation.models.reports import ReceptiveFieldProbe
from kernel_estimation.network.manet import MANet
from kernel_estimation.tensor.ops import mul, sum_all
from kernel_estimation.tensor.tape import Tape
from kernel_estimation.tensor.tensor import Tensor
from kernel_estimation.utils.errors import InvalidArgumentError
from kernel_estimation.utils.logger import get_logger

logger = get_logger(__name__)

# (kernel, stride, transposed)
LayerGeometry = Tuple[int, int, bool]

PROBE_EXTENT = 32


def layer_geometry(config: MANetConfig) -> List[LayerGeometry]:
    """Convolutions on the longest input-to-output path, in order."""
    block = [(3, 1, False)] * config.maconv_per_block
    return (
        [(3, 1, False)]
        + block
        + [(2, 2, False)]
        + block
        + [(2, 2, True)]
        + block
        + [(3, 1, False)]
    )


def receptive_field_analytic(config: MANetConfig) -> Tuple[int, int]:
    """
    Receptive field of one LR output site, in LR input pixels.

    Each convolution widens the field by (k − 1) times the accumulated
    stride; a stride-s convolution multiplies the accumulated stride by s
    and a stride-s transposed convolution with k = s divides it without
    widening the field.
    """
    size = 1
    jump = Fraction(1)
    for kernel, stride, transposed in layer_geometry(config):
        if transposed:
            if kernel != stride:
                raise InvalidArgumentError("only kernel == stride transposed convolutions are supported")
            jump /= stride
            continue
        size += int((kernel - 1) * jump)
        jump *= stride
    return size, size


def receptive_field_probe(
    net: MANet,
    extent: int = PROBE_EXTENT,
    seed: int = 0,
    positive: bool = True,
) -> ReceptiveFieldProbe:
    """
    Input-gradient support of the central output site.

    By default the probe runs on ``net.positive_copy()`` with a strictly
    positive input so no ReLU is inactive; the gradient of the summed tap
    logits at the central site is then nonzero exactly where the site
    depends on the input. With ``positive=False`` it runs on a float64 copy
    of the actual weights, whose support may be smaller but never larger.

    Args:
        net: Network to probe (left unchanged)
        extent: Side of the square LR probe input (even)
        seed: Seed for the probe input
        positive: Probe the all-positive twin instead of the actual weights

    Returns:
        ReceptiveFieldProbe
    """
    support = receptive_field_support(net, extent, seed, positive)
    rows = np.flatnonzero(support.any(axis=1))
    cols = np.flatnonzero(support.any(axis=0))
    height = int(rows[-1] - rows[0] + 1) if rows.size else 0
    width = int(cols[-1] - cols[0] + 1) if cols.size else 0

    analytic = receptive_field_analytic(net.config)
    contained = height <= analytic[0] and width <= analytic[1]
    low_coverage = height < analytic[0] or width < analytic[1]
    if low_coverage:
        logger.warning("receptive field probe below analytic window",
                       support=[height, width], analytic=list(analytic))
    return ReceptiveFieldProbe(
        height=height,
        width=width,
        analytic=analytic,
        contained=contained,
        low_coverage=low_coverage,
    )


def receptive_field_support(
    net: MANet,
    extent: int = PROBE_EXTENT,
    seed: int = 0,
    positive: bool = True,
) -> np.ndarray:
    """Boolean (extent, extent) support mask of the probe; always evaluated in float64."""
    if extent % 2 or extent < 4:
        raise InvalidArgumentError("probe extent must be an even integer >= 4", argument="extent")
    twin = net.positive_copy() if positive else net.copy(np.float64)
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.5, 1.0, size=(1, net.config.in_channels, extent, extent))
    centre = extent // 2
    with Tape() as tape:
        x = Tensor(values, requires_grad=True)
        logits = twin.forward_logits(x)
        selector = np.zeros(logits.shape, dtype=logits.dtype)
        selector[:, :, centre, centre] = 1.0
        objective = sum_all(mul(logits, Tensor(selector)))
    return np.any(tape.gradients(objective).of(x)[0] != 0, axis=0)
