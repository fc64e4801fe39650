"""Kernel renderings and estimate montages."""

from typing import List, Optional, Tuple

import numpy as np
from PIL import Image as PILImage
from PIL import ImageDraw

from kernel_estimation.degradation.image import Image, KernelMap
from kernel_estimation.storage.images import to_uint8
from kernel_estimation.utils.errors import DimensionError, InvalidArgumentError


def render_kernel(taps: np.ndarray, magnify: int = 1) -> np.ndarray:
    """
    Normalize a kernel for display: the largest tap maps to 1.

    Args:
        taps: (k, k) kernel or flat k·k vector
        magnify: Nearest-neighbor magnification

    Returns:
        (k·magnify, k·magnify) float array in [0, 1]
    """
    values = np.asarray(taps, dtype=np.float64)
    if values.ndim == 1:
        side = int(round(np.sqrt(values.size)))
        if side * side != values.size:
            raise DimensionError("flat kernel length is not a square", details={"length": int(values.size)})
        values = values.reshape(side, side)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DimensionError("kernel must be square", details={"shape": list(values.shape)})
    if magnify < 1:
        raise InvalidArgumentError("magnification must be positive", argument="magnify")
    peak = values.max()
    rendered = values / peak if peak > 0 else np.zeros_like(values)
    return np.kron(rendered, np.ones((magnify, magnify)))


def sample_sites(height: int, width: int, spacing: int, margin: int = 0) -> List[Tuple[int, int]]:
    """Regular grid of (row, col) sites, ``margin`` pixels away from every border."""
    if spacing < 1:
        raise InvalidArgumentError("site spacing must be positive", argument="spacing")
    rows = range(margin + spacing // 2, height - margin, spacing)
    cols = range(margin + spacing // 2, width - margin, spacing)
    return [(r, c) for r in rows for c in cols]


def kernel_montage(
    lr: Image,
    kmap: KernelMap,
    scale: int,
    spacing: Optional[int] = None,
    margin: int = 0,
) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """
    LR image upscaled by nearest neighbor with estimated kernels pasted at
    a grid of sites, each framed by a one-pixel border.

    Args:
        lr: LR image (first channel is shown)
        kmap: Kernel map at HR extent
        scale: SR scale factor
        spacing: Site distance in HR pixels (defaults to twice the kernel side)
        margin: HR pixels kept free of sites along each border

    Returns:
        (grayscale montage in [0, 1], sampled sites)
    """
    height, width = lr.height * scale, lr.width * scale
    if kmap.extent != (height, width):
        raise DimensionError(
            "kernel map does not cover the upscaled image",
            details={"map": list(kmap.extent), "image": [height, width]},
        )
    size = kmap.kernel_size
    spacing = spacing or 2 * size
    background = np.kron(lr.data[0].astype(np.float64), np.ones((scale, scale)))
    canvas = PILImage.fromarray(to_uint8(background))
    draw = ImageDraw.Draw(canvas)

    sites = sample_sites(height, width, spacing, margin)
    half = size // 2
    for row, col in sites:
        top = min(max(row - half, 1), height - size - 1)
        left = min(max(col - half, 1), width - size - 1)
        if top < 1 or left < 1:
            continue
        tile = PILImage.fromarray(to_uint8(render_kernel(kmap.kernel_at(row, col))))
        canvas.paste(tile, (left, top))
        draw.rectangle([left - 1, top - 1, left + size, top + size], outline=255)
    return np.asarray(canvas, dtype=np.float64) / 255.0, sites
