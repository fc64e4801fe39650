"""Blur, decimation and noise: the forward degradation model."""

from typing import Tuple

import numpy as np
from scipy import ndimage, signal

from kernel_estimation.degradation.fields import KernelField, kernel_map
from kernel_estimation.degradation.image import Image, KernelMap
from kernel_estimation.degradation.kernels import DEFAULT_KERNEL_SIZE, Kernel, synth_kernel
from kernel_estimation.models.configs import DegradationConfig
from kernel_estimation.utils.errors import DimensionError, InvalidArgumentError
from kernel_estimation.utils.logger import get_logger

logger = get_logger(__name__)


def _require_fits(img: Image, size: int) -> None:
    if size > min(img.height, img.width):
        raise InvalidArgumentError(
            "kernel larger than image",
            argument="kernel",
            details={"kernel_size": size, "extent": list(img.extent)},
        )


def blur_invariant(img: Image, kernel: Kernel) -> Image:
    """
    Convolve every channel with one kernel, reflect-padding the borders.

    Args:
        img: Input image
        kernel: Blur kernel

    Returns:
        Blurred image of the same extent
    """
    _require_fits(img, kernel.size)
    taps = np.asarray(kernel.taps, dtype=img.dtype)
    # scipy "mirror" is numpy "reflect": the edge pixel is not repeated.
    out = np.stack([ndimage.convolve(channel, taps, mode="mirror") for channel in img.data])
    return img.with_data(out)


def blur_variant(img: Image, field: KernelField, kernel_size: int = DEFAULT_KERNEL_SIZE) -> Image:
    """
    Blur each pixel with the kernel of its own patch.

    Args:
        img: HR image
        field: Kernel field with the image's extent
        kernel_size: Side of the synthesized kernels

    Returns:
        Blurred image of the same extent
    """
    if field.extent != img.extent:
        raise DimensionError("field extent does not match image",
                             details={"field": list(field.extent), "image": list(img.extent)})
    _require_fits(img, kernel_size)
    pad = kernel_size // 2
    patch = field.patch_size
    out = np.empty_like(img.data)
    for c, channel in enumerate(img.data):
        padded = np.pad(channel, pad, mode="reflect")
        for j, row in enumerate(field.params):
            r0, r1 = j * patch, min(img.height, (j + 1) * patch)
            for i, params in enumerate(row):
                c0, c1 = i * patch, min(img.width, (i + 1) * patch)
                taps = synth_kernel(params, kernel_size, img.dtype).taps
                region = padded[r0:r1 + 2 * pad, c0:c1 + 2 * pad]
                out[c, r0:r1, c0:c1] = signal.convolve2d(region, taps, mode="valid")
    return img.with_data(out)


def blur_with_kernel_map(img: Image, kmap: KernelMap) -> Image:
    """
    Convolve with a different kernel at every pixel.

    Args:
        img: HR image
        kmap: Per-pixel kernels covering the image extent

    Returns:
        Blurred image of the same extent
    """
    if kmap.extent != img.extent:
        raise DimensionError("kernel map extent does not match image",
                             details={"map": list(kmap.extent), "image": list(img.extent)})
    size = kmap.kernel_size
    _require_fits(img, size)
    pad = size // 2
    height, width = img.extent
    values = kmap.values.astype(img.dtype, copy=False)
    out = np.zeros_like(img.data)
    for c, channel in enumerate(img.data):
        padded = np.pad(channel, pad, mode="reflect")
        for u in range(size):
            for v in range(size):
                window = padded[2 * pad - u:2 * pad - u + height, 2 * pad - v:2 * pad - v + width]
                out[c] += values[u * size + v] * window
    return img.with_data(out)


def decimate(img: Image, scale: int) -> Image:
    """Keep the top-left pixel of every scale×scale block."""
    if scale < 1:
        raise InvalidArgumentError("scale must be >= 1", argument="scale")
    if img.height % scale or img.width % scale:
        raise InvalidArgumentError(
            "image extent not divisible by scale",
            argument="scale",
            details={"extent": list(img.extent), "scale": scale},
        )
    return img.with_data(np.ascontiguousarray(img.data[:, ::scale, ::scale]), role="lr", scale=scale)


def add_noise(img: Image, noise_level: float, rng: np.random.Generator) -> Image:
    """
    Add i.i.d. Gaussian noise with standard deviation noise_level / 255.

    A zero level returns the image unchanged and draws nothing from ``rng``.
    """
    if noise_level < 0:
        raise InvalidArgumentError("noise level must be >= 0", argument="noise_level")
    if noise_level == 0:
        return img.with_data(img.data.copy())
    noise = rng.normal(0.0, noise_level / 255.0, size=img.data.shape)
    return img.with_data(img.data + noise.astype(img.dtype))


def degrade(
    img_hr: Image,
    field: KernelField,
    cfg: DegradationConfig,
    kernel_size: int = DEFAULT_KERNEL_SIZE,
) -> Tuple[Image, np.ndarray]:
    """
    Spatially variant blur, decimation and noise.

    Args:
        img_hr: HR image
        field: Kernel field covering the HR extent
        cfg: Scale, noise level and seed
        kernel_size: Kernel side

    Returns:
        (LR image, ground-truth kernel map of shape (kernel_size², H, W))
    """
    if img_hr.height % cfg.scale or img_hr.width % cfg.scale:
        raise InvalidArgumentError(
            "HR extent not divisible by scale",
            argument="scale",
            details={"extent": list(img_hr.extent), "scale": cfg.scale},
        )
    blurred = blur_variant(img_hr, field, kernel_size)
    lr = decimate(blurred, cfg.scale)
    lr = add_noise(lr, cfg.noise_level, np.random.default_rng(cfg.seed))
    gt_map = kernel_map(field, kernel_size, img_hr.dtype)
    logger.debug("degraded", extent=list(img_hr.extent), scale=cfg.scale, noise_level=cfg.noise_level)
    return lr, gt_map
