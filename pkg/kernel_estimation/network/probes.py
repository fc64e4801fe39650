"""Behavioral probes of a kernel estimator on synthetic targets."""

import math
from typing import List, Sequence

import numpy as np

from kernel_estimation.degradation.blur import blur_invariant, decimate
from kernel_estimation.degradation.image import Image, KernelMap
from kernel_estimation.degradation.kernels import Kernel, KernelParams, second_moments, synth_kernel
from kernel_estimation.degradation.metrics import lr_fidelity
from kernel_estimation.models.reports import PatchProbePoint
from kernel_estimation.network.manet import MANet
from kernel_estimation.utils.errors import InvalidArgumentError
from kernel_estimation.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_STRUCTURE_SIZES = (9, 13, 21, 31, 41, 61)
PROBE_KERNEL = KernelParams(sigma1=6.0, sigma2=1.0, theta=math.pi / 4)


def probe_canvas_size(max_structure: int, scale: int, kernel_size: int) -> int:
    """Smallest HR side holding the structure plus a kernel margin, divisible by 2·scale."""
    needed = max(max_structure + 2 * kernel_size, 4 * kernel_size)
    step = 2 * scale
    return int(math.ceil(needed / step) * step)


def cross_image(canvas: int, structure_size: int) -> np.ndarray:
    """
    White canvas with a centred black cross spanning ``structure_size`` pixels.

    Arms are ``max(1, structure_size // 10)`` pixels thick.
    """
    if structure_size < 1 or structure_size > canvas:
        raise InvalidArgumentError("structure must fit the canvas", argument="structure_size")
    image = np.ones((canvas, canvas), dtype=np.float64)
    centre = canvas // 2
    half = structure_size // 2
    thick = max(1, structure_size // 10)
    lo, hi = centre - half, centre - half + structure_size
    t_lo = centre - thick // 2
    image[lo:hi, t_lo:t_lo + thick] = 0.0
    image[t_lo:t_lo + thick, lo:hi] = 0.0
    return image


def centre_kernel(net: MANet, lr: Image) -> np.ndarray:
    """Estimated kernel at the HR pixel in the middle of the image."""
    estimate = net.estimate(lr)
    height, width = estimate.extent
    return estimate.kernel_at(height // 2, width // 2)


def min_patch_probe(
    net: MANet,
    structure_sizes: Sequence[int] = DEFAULT_STRUCTURE_SIZES,
    kernel: KernelParams = PROBE_KERNEL,
) -> List[PatchProbePoint]:
    """
    Fidelity of the centre-pixel estimate as the visible structure grows.

    For every size a cross is drawn, blurred with ``kernel`` and decimated;
    the centre-pixel estimate is then used as one kernel for the whole
    canvas and scored with the LR-reconstruction fidelity.

    Args:
        net: Kernel estimator
        structure_sizes: Cross extents in HR pixels
        kernel: Ground-truth blur

    Returns:
        One point per structure size, tagged untrained when the network
        has never been optimized
    """
    if not structure_sizes:
        raise InvalidArgumentError("at least one structure size is required", argument="structure_sizes")
    scale = net.config.scale
    size = net.config.kernel_size
    canvas = probe_canvas_size(max(structure_sizes), scale, size)
    truth = synth_kernel(kernel, size)
    untrained = net.steps_trained == 0
    if untrained:
        logger.warning("min patch probe on an untrained network")

    points: List[PatchProbePoint] = []
    for structure in structure_sizes:
        hr = Image(cross_image(canvas, structure))
        if net.config.in_channels == 3:
            hr = Image(np.repeat(hr.data, 3, axis=0))
        lr = decimate(blur_invariant(hr, truth), scale)
        estimate = centre_kernel(net, lr)
        kmap = KernelMap.from_kernel(estimate.astype(np.float64), canvas, canvas)
        psnr_value, ssim_value = lr_fidelity(hr, lr, kmap, scale)
        points.append(
            PatchProbePoint(structure_size=structure, psnr=psnr_value, ssim=ssim_value, untrained=untrained)
        )
        logger.debug("probe point", structure=structure, psnr=psnr_value)
    return points


def flat_patch_kernel(net: MANet, extent: int = 32, level: float = 0.5) -> Kernel:
    """Kernel the network predicts for a structure-free LR input."""
    lr = Image(np.full((net.config.in_channels, extent, extent), level), role="lr", scale=net.config.scale)
    return Kernel(centre_kernel(net, lr))


def kernel_anisotropy(kernel: Kernel) -> float:
    """Ratio of the larger to the smaller eigenvalue of the tap second-moment matrix."""
    values = np.linalg.eigvalsh(second_moments(kernel))
    return float(values[-1] / max(values[0], 1e-12))
