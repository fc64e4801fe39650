"""Image files: 8-bit PGM (P5) and PNG through Pillow."""

from pathlib import Path
from typing import List, Union

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from kernel_estimation.degradation.image import Image, ImageRole
from kernel_estimation.utils.errors import DatasetError, FormatError, InvalidArgumentError
from kernel_estimation.utils.logger import get_logger

logger = get_logger(__name__)

IMAGE_SUFFIXES = (".pgm", ".png")
PathLike = Union[str, Path]


def rgb_to_y(rgb: np.ndarray) -> np.ndarray:
    """
    Luma of a (3, H, W) RGB array in [0, 1] (ITU-R BT.601, studio range).

    Returns:
        (1, H, W) array
    """
    r, g, b = rgb[0], rgb[1], rgb[2]
    y = (16.0 + 65.481 * r + 128.553 * g + 24.966 * b) / 255.0
    return y[None, :, :]


def to_uint8(data: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and round to 8 bits."""
    return np.round(np.clip(data, 0.0, 1.0) * 255.0).astype(np.uint8)


def read_image(path: PathLike, role: ImageRole = "hr", luminance: bool = False) -> Image:
    """
    Load a grayscale or RGB image as floats in [0, 1].

    Args:
        path: PGM or PNG file
        role: HR or LR
        luminance: Reduce RGB to the Y channel

    Returns:
        Image with 1 or 3 channels
    """
    source = Path(path)
    if not source.is_file():
        raise FormatError("image not found", path=str(source))
    try:
        with PILImage.open(source) as handle:
            if handle.mode in ("L", "P", "1", "I", "I;16"):
                array = np.asarray(handle.convert("L"), dtype=np.float64)[None] / 255.0
            else:
                array = np.asarray(handle.convert("RGB"), dtype=np.float64).transpose(2, 0, 1) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise FormatError(f"unreadable image: {exc}", path=str(source)) from exc
    if luminance and array.shape[0] == 3:
        array = rgb_to_y(array)
    return Image(array, role=role)


def write_image(path: PathLike, image: Union[Image, np.ndarray]) -> Path:
    """
    Save an image; ``.pgm`` is written as binary P5 (grayscale only), ``.png``
    as 8-bit gray or RGB.

    Values are clamped to [0, 1] here and nowhere else.
    """
    target = Path(path)
    data = image.data if isinstance(image, Image) else np.asarray(image)
    if data.ndim == 2:
        data = data[None]
    suffix = target.suffix.lower()
    if suffix not in IMAGE_SUFFIXES:
        raise InvalidArgumentError(f"unsupported image suffix {suffix}", argument="path")
    if suffix == ".pgm" and data.shape[0] != 1:
        raise InvalidArgumentError("PGM output needs a single channel", argument="path")

    pixels = to_uint8(data)
    if pixels.shape[0] == 1:
        pil = PILImage.fromarray(pixels[0])
    else:
        pil = PILImage.fromarray(np.ascontiguousarray(pixels.transpose(1, 2, 0)))
    target.parent.mkdir(parents=True, exist_ok=True)
    pil.save(target, format="PPM" if suffix == ".pgm" else "PNG")
    logger.debug("image written", path=str(target), extent=list(data.shape[1:]))
    return target


def list_images(directory: PathLike) -> List[Path]:
    """Sorted PGM/PNG files of a directory."""
    root = Path(directory)
    if not root.is_dir():
        raise DatasetError("image directory not found", source=str(root))
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())
    if not files:
        raise DatasetError("image directory is empty", source=str(root))
    return files
