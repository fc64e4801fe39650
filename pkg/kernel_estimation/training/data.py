"""Training data: HR image pools and on-the-fly degradation."""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
from PIL import Image as PILImage
from PIL import ImageDraw

from kernel_estimation.config import resolve_dtype
from kernel_estimation.degradation.blur import add_noise, blur_invariant, decimate
from kernel_estimation.degradation.image import Image
from kernel_estimation.degradation.kernels import KernelParams, sample_training_params, synth_kernel
from kernel_estimation.models.configs import DatasetSource, TrainConfig
from kernel_estimation.storage.images import list_images, read_image
from kernel_estimation.utils.errors import DatasetError
from kernel_estimation.utils.helpers import derive_rng
from kernel_estimation.utils.logger import get_logger

logger = get_logger(__name__)

# Crops whose standard deviation stays below this are treated as flat.
FLAT_STD = 0.02
CROP_ATTEMPTS = 16


@dataclass
class TrainSample:
    """One degraded crop with its ground truth."""
    lr: np.ndarray
    gt: np.ndarray
    params: KernelParams
    noise_level: float
    index: int


@dataclass
class Batch:
    """Stacked samples of one optimizer step."""
    lr: np.ndarray
    gt: np.ndarray
    params: List[KernelParams]
    noise_levels: List[float]
    indices: List[int]

    @property
    def size(self) -> int:
        return int(self.lr.shape[0])


def procedural_image(size: int, rng: np.random.Generator, density: float = 1.0) -> np.ndarray:
    """
    Grayscale scene of piecewise-constant polygons, oriented edges and corner
    crosses over a smooth gradient.

    Args:
        size: Image side
        rng: Generator
        density: Relative number of structures (0 gives only the gradient)

    Returns:
        (size, size) float array in [0, 1]
    """
    ys, xs = np.mgrid[0:size, 0:size] / max(1, size - 1)
    angle = rng.uniform(0.0, 2 * math.pi)
    base = rng.uniform(0.2, 0.8) + 0.2 * (math.cos(angle) * xs + math.sin(angle) * ys - 0.5)
    canvas = PILImage.fromarray(np.round(np.clip(base, 0, 1) * 255).astype(np.uint8))
    draw = ImageDraw.Draw(canvas)

    count = int(round(6 * density))
    for _ in range(count):
        shade = int(rng.integers(0, 256))
        vertices = int(rng.integers(3, 7))
        cx, cy = rng.uniform(0, size, size=2)
        radius = rng.uniform(size * 0.08, size * 0.35)
        angles = np.sort(rng.uniform(0, 2 * math.pi, size=vertices))
        points = [(float(cx + radius * math.cos(a)), float(cy + radius * math.sin(a))) for a in angles]
        draw.polygon(points, fill=shade)

    for _ in range(count):
        shade = int(rng.integers(0, 256))
        x0, y0, x1, y1 = rng.uniform(0, size, size=4)
        draw.line([(float(x0), float(y0)), (float(x1), float(y1))], fill=shade,
                  width=int(rng.integers(1, max(2, size // 24))))

    for _ in range(max(0, count // 2)):
        shade = int(rng.integers(0, 256))
        cx, cy = rng.uniform(size * 0.1, size * 0.9, size=2)
        arm = rng.uniform(size * 0.05, size * 0.2)
        thick = int(rng.integers(1, 4))
        draw.rectangle([float(cx - arm), float(cy - thick), float(cx + arm), float(cy + thick)], fill=shade)
        draw.rectangle([float(cx - thick), float(cy - arm), float(cx + thick), float(cy + arm)], fill=shade)

    return np.asarray(canvas, dtype=np.float64) / 255.0


class ImagePool:
    """
    Indexed HR images from a directory or the procedural generator.

    Procedural images are generated lazily from (seed, index) and cached.
    """

    def __init__(self, source: DatasetSource, channels: int = 1) -> None:
        self.source = source
        self.channels = channels
        self._cache: Dict[int, np.ndarray] = {}
        if source.kind == "directory":
            self._paths = list_images(source.directory)
            self._size = len(self._paths)
        else:
            self._paths = []
            self._size = source.num_images

    def __len__(self) -> int:
        return self._size

    def image(self, index: int) -> np.ndarray:
        """(C, H, W) float64 HR image."""
        if index not in self._cache:
            if self.source.kind == "directory":
                loaded = read_image(self._paths[index], luminance=self.channels == 1).data
            else:
                rng = derive_rng(self.source.seed, index)
                gray = procedural_image(self.source.image_size, rng, self.source.structure_density)
                loaded = gray[None]
            if loaded.shape[0] != self.channels:
                loaded = np.repeat(loaded[:1], self.channels, axis=0)
            self._cache[index] = loaded
        return self._cache[index]

    def image_for_sample(self, sample_index: int) -> int:
        """Image used by a sample; each pass over the pool is a fresh permutation."""
        epoch, position = divmod(sample_index, self._size)
        order = derive_rng(self.source.seed, 1_000_003, epoch).permutation(self._size)
        return int(order[position])


def dihedral(image: np.ndarray, variant: int) -> np.ndarray:
    """One of the 8 rotations/flips of a (C, H, W) array."""
    out = np.rot90(image, variant % 4, axes=(1, 2))
    if variant >= 4:
        out = out[:, :, ::-1]
    return np.ascontiguousarray(out)


def _crop(image: np.ndarray, size: int, rng: np.random.Generator, augment: bool, require_structure: bool) -> np.ndarray:
    _, height, width = image.shape
    if height < size or width < size:
        raise DatasetError("image smaller than the crop", details={"extent": [height, width], "crop": size})
    if not augment:
        return image[:, :size, :size]
    crop = image[:, :size, :size]
    for _ in range(CROP_ATTEMPTS):
        top = int(rng.integers(0, height - size + 1))
        left = int(rng.integers(0, width - size + 1))
        crop = image[:, top:top + size, left:left + size]
        if not require_structure or crop.std() >= FLAT_STD:
            break
    return crop


def training_params(cfg: TrainConfig, rng: np.random.Generator) -> KernelParams:
    """Fixed kernel when configured, otherwise a random draw."""
    if cfg.fixed_sigma1 is not None:
        return KernelParams(sigma1=cfg.fixed_sigma1, sigma2=cfg.fixed_sigma2, theta=cfg.fixed_theta or 0.0)
    return sample_training_params(rng, cfg.scale)


def make_sample(pool: ImagePool, cfg: TrainConfig, index: int) -> TrainSample:
    """
    Degrade one crop; fully determined by (cfg.seed, index).

    Crop → dihedral transform → one random kernel for the whole crop →
    blur, decimate, optional noise with σ_n ~ U(0, noise_max).
    """
    rng = derive_rng(cfg.seed, index)
    dtype = resolve_dtype(cfg.precision)
    hr = pool.image(pool.image_for_sample(index))
    crop = _crop(hr, cfg.crop_size, rng, cfg.augment, pool.source.structure_density > 0)
    if cfg.augment:
        crop = dihedral(crop, int(rng.integers(0, 8)))

    params = training_params(cfg, rng)
    kernel = synth_kernel(params, cfg.kernel_size)
    lr = decimate(blur_invariant(Image(crop), kernel), cfg.scale)
    noise_level = float(rng.uniform(0.0, cfg.noise_max)) if cfg.noise_max > 0 else 0.0
    lr = add_noise(lr, noise_level, rng)

    gt = np.broadcast_to(kernel.flatten()[:, None, None], (kernel.size ** 2, cfg.crop_size, cfg.crop_size))
    return TrainSample(
        lr=lr.data.astype(dtype),
        gt=np.ascontiguousarray(gt, dtype=dtype),
        params=params,
        noise_level=noise_level,
        index=index,
    )


def make_batch(
    source: DatasetSource,
    cfg: TrainConfig,
    batch_index: int,
    pool: Optional[ImagePool] = None,
) -> Batch:
    """
    Batch ``batch_index`` of a run: sample k uses index batch_index·B + k.

    Args:
        source: Image source
        cfg: Training configuration
        batch_index: Step number
        pool: Reusable image pool (built from ``source`` when omitted)

    Returns:
        Batch with LR inputs (B, C, h, w) and ground truth (B, k·k, H, W)
    """
    pool = pool or ImagePool(source, cfg.in_channels)
    start = batch_index * cfg.batch_size
    samples = [make_sample(pool, cfg, start + k) for k in range(cfg.batch_size)]
    return Batch(
        lr=np.stack([s.lr for s in samples]),
        gt=np.stack([s.gt for s in samples]),
        params=[s.params for s in samples],
        noise_levels=[s.noise_level for s in samples],
        indices=[s.index for s in samples],
    )
