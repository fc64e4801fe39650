"""Image fidelity metrics."""

import math
from typing import Tuple

import numpy as np
from scipy import signal

from kernel_estimation.degradation.blur import blur_with_kernel_map, decimate
from kernel_estimation.degradation.image import Image, KernelMap
from kernel_estimation.utils.errors import DimensionError, InvalidArgumentError

PSNR_CAP = 100.0
MSE_FLOOR = 1e-10

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# Half the 21-tap kernel support, in HR pixels.
FIDELITY_BORDER_HR = 11


def _check_pair(a: Image, b: Image) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionError("images differ in extent",
                             details={"a": list(a.data.shape), "b": list(b.data.shape)})


def psnr(a: Image, b: Image) -> float:
    """
    Peak signal-to-noise ratio in dB for data in [0, 1].

    Capped at 100 dB when the mean squared error drops below 1e-10.
    """
    _check_pair(a, b)
    mse = float(np.mean((a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2))
    if mse < MSE_FLOOR:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized separable Gaussian window."""
    offsets = np.arange(size, dtype=np.float64) - size // 2
    line = np.exp(-0.5 * (offsets / sigma) ** 2)
    line /= line.sum()
    return np.outer(line, line)


def _ssim_channel(x: np.ndarray, y: np.ndarray, window: np.ndarray) -> float:
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2

    def filt(values: np.ndarray) -> np.ndarray:
        return signal.convolve2d(values, window, mode="valid")

    mu_x, mu_y = filt(x), filt(y)
    var_x = filt(x * x) - mu_x * mu_x
    var_y = filt(y * y) - mu_y * mu_y
    cov = filt(x * y) - mu_x * mu_y
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(numerator / denominator))


def ssim(a: Image, b: Image) -> float:
    """
    Structural similarity with an 11×11 Gaussian window (σ = 1.5).

    Windows lie fully inside the image; the score is averaged over windows
    and then over channels.
    """
    _check_pair(a, b)
    if min(a.extent) < SSIM_WINDOW:
        raise DimensionError("image smaller than the SSIM window",
                             details={"extent": list(a.extent), "window": SSIM_WINDOW})
    window = gaussian_window()
    x = a.data.astype(np.float64)
    y = b.data.astype(np.float64)
    return float(np.mean([_ssim_channel(x[c], y[c], window) for c in range(a.channels)]))


def border_crop(scale: int) -> int:
    """LR pixels dropped per border before fidelity metrics."""
    return math.ceil(FIDELITY_BORDER_HR / scale)


def reconstruct_lr(img_hr: Image, est_map: KernelMap, scale: int) -> Image:
    """Re-blur HR with per-pixel kernels and decimate."""
    return decimate(blur_with_kernel_map(img_hr, est_map), scale)


def lr_fidelity(
    img_hr: Image,
    img_lr_observed: Image,
    est_map: KernelMap,
    scale: int,
) -> Tuple[float, float]:
    """
    LR-reconstruction fidelity of an estimated kernel map.

    Args:
        img_hr: HR image
        img_lr_observed: Noise-free observed LR image
        est_map: Estimated kernels covering the HR extent
        scale: SR scale factor

    Returns:
        (PSNR in dB, SSIM) on the border-cropped LR images
    """
    if est_map.extent != img_hr.extent:
        raise DimensionError("kernel map does not cover the HR extent",
                             details={"map": list(est_map.extent), "image": list(img_hr.extent)})
    if scale < 1:
        raise InvalidArgumentError("scale must be >= 1", argument="scale")
    reconstructed = reconstruct_lr(img_hr, est_map, scale)
    _check_pair(reconstructed, img_lr_observed)

    crop = border_crop(scale)
    height, width = reconstructed.extent
    if height <= 2 * crop or width <= 2 * crop:
        raise DimensionError("LR image too small for the evaluation border",
                             details={"extent": [height, width], "crop": crop})
    ours = reconstructed.crop(crop, crop, height - 2 * crop, width - 2 * crop)
    theirs = img_lr_observed.crop(crop, crop, height - 2 * crop, width - 2 * crop)
    return psnr(ours, theirs), ssim(ours, theirs)
