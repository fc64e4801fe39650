"""Anisotropic Gaussian blur kernels."""

import math
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from kernel_estimation.utils.errors import InvalidArgumentError

SIGMA_FLOOR = 1e-3
DEFAULT_KERNEL_SIZE = 21

# Widths sampled for the 9-kernel evaluation grid, per scale.
EVAL_WIDTHS: Dict[int, Tuple[float, float, float]] = {
    2: (1.0, 3.0, 5.0),
    3: (1.0, 4.0, 7.0),
    4: (1.0, 5.0, 9.0),
}


class KernelParams(BaseModel):
    """Widths (HR pixels) and orientation of one Gaussian kernel."""

    model_config = ConfigDict(frozen=True)

    sigma1: float = Field(..., description="Width along the rotated x axis")
    sigma2: float = Field(..., description="Width along the rotated y axis")
    theta: float = Field(default=0.0, description="Rotation in radians, normalized into [0, pi)")

    @field_validator("sigma1", "sigma2")
    @classmethod
    def validate_sigma(cls, v: float) -> float:
        if not math.isfinite(v) or v <= 0:
            raise InvalidArgumentError("kernel widths must be positive", argument="sigma", details={"value": v})
        return float(v)

    @field_validator("theta")
    @classmethod
    def normalize_theta(cls, v: float) -> float:
        if not math.isfinite(v):
            raise InvalidArgumentError("theta must be finite", argument="theta")
        theta = math.fmod(float(v), math.pi)
        if theta < 0:
            theta += math.pi
        if theta >= math.pi:
            theta = 0.0
        return theta

    @property
    def is_isotropic(self) -> bool:
        return self.sigma1 == self.sigma2

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.sigma1, self.sigma2, self.theta


class Kernel:
    """Odd-sized, nonnegative, sum-1 blur kernel."""

    __slots__ = ("taps",)

    def __init__(self, taps: np.ndarray) -> None:
        taps = np.asarray(taps)
        if taps.ndim != 2 or taps.shape[0] != taps.shape[1] or taps.shape[0] % 2 == 0:
            raise InvalidArgumentError("kernel taps must be an odd square grid", argument="taps",
                                       details={"shape": list(taps.shape)})
        self.taps = taps

    @property
    def size(self) -> int:
        return int(self.taps.shape[0])

    @property
    def center(self) -> int:
        return self.size // 2

    def flatten(self) -> np.ndarray:
        return self.taps.reshape(-1)

    @classmethod
    def from_flat(cls, values: np.ndarray) -> "Kernel":
        """Rebuild a kernel from h·w flattened taps."""
        values = np.asarray(values)
        size = int(round(math.sqrt(values.size)))
        if size * size != values.size:
            raise InvalidArgumentError("flattened kernel is not square", argument="values",
                                       details={"size": int(values.size)})
        return cls(values.reshape(size, size))

    @classmethod
    def delta(cls, size: int = DEFAULT_KERNEL_SIZE, dtype: np.dtype = np.float64) -> "Kernel":
        """Identity kernel."""
        _require_odd(size)
        taps = np.zeros((size, size), dtype=dtype)
        taps[size // 2, size // 2] = 1.0
        return cls(taps)

    @classmethod
    def uniform(cls, size: int = DEFAULT_KERNEL_SIZE, dtype: np.dtype = np.float64) -> "Kernel":
        """Box kernel with equal taps."""
        _require_odd(size)
        return cls(np.full((size, size), 1.0 / (size * size), dtype=dtype))


def _require_odd(size: int) -> None:
    if size < 1 or size % 2 == 0:
        raise InvalidArgumentError("kernel size must be a positive odd integer", argument="size",
                                   details={"size": size})


def inverse_covariance(params: KernelParams) -> Tuple[float, float, float]:
    """
    Entries (a, b, c) of Σ⁻¹ = [[a, b], [b, c]] for Σ = R diag(σ1², σ2²) Rᵀ.

    Args:
        params: Kernel parameters

    Returns:
        Tuple (a, b, c)
    """
    s1 = max(params.sigma1, SIGMA_FLOOR)
    s2 = max(params.sigma2, SIGMA_FLOOR)
    cos_t, sin_t = math.cos(params.theta), math.sin(params.theta)
    inv1, inv2 = 1.0 / (s1 * s1), 1.0 / (s2 * s2)
    a = cos_t * cos_t * inv1 + sin_t * sin_t * inv2
    b = cos_t * sin_t * (inv1 - inv2)
    c = sin_t * sin_t * inv1 + cos_t * cos_t * inv2
    return a, b, c


def synth_kernel(
    params: KernelParams,
    size: int = DEFAULT_KERNEL_SIZE,
    dtype: np.dtype = np.float64,
) -> Kernel:
    """
    Discretize an anisotropic Gaussian on an odd grid.

    Taps are the density sampled at integer offsets from the center tap,
    then normalized to sum to one.

    Args:
        params: Kernel widths and rotation
        size: Odd side length
        dtype: Output float dtype

    Returns:
        Kernel of shape (size, size)
    """
    _require_odd(size)
    a, b, c = inverse_covariance(params)
    offsets = np.arange(size, dtype=np.float64) - size // 2
    dy, dx = np.meshgrid(offsets, offsets, indexing="ij")
    quad = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
    taps = np.exp(-0.5 * quad)
    taps /= taps.sum()
    return Kernel(taps.astype(dtype, copy=False))


def sample_training_params(rng: np.random.Generator, scale: int) -> KernelParams:
    """
    Draw σ1, σ2 ~ U(0.175s, 2.5s) and θ ~ U(0, π).

    Args:
        rng: Seeded generator
        scale: SR scale factor

    Returns:
        Random kernel parameters
    """
    if scale < 1:
        raise InvalidArgumentError("scale must be >= 1", argument="scale")
    low, high = 0.175 * scale, 2.5 * scale
    sigma1 = float(rng.uniform(low, high))
    sigma2 = float(rng.uniform(low, high))
    theta = float(rng.uniform(0.0, math.pi))
    return KernelParams(sigma1=sigma1, sigma2=sigma2, theta=theta)


def eval_kernel_grid(scale: int) -> List[KernelParams]:
    """
    The 9 deduplicated evaluation kernels for a scale.

    Pairs with σ1 >= σ2 at θ = 0, then the strictly anisotropic pairs again
    at θ = π/4.

    Args:
        scale: 2, 3 or 4

    Returns:
        Nine kernel parameter triples
    """
    if scale not in EVAL_WIDTHS:
        raise InvalidArgumentError(f"no evaluation grid for scale {scale}", argument="scale")
    widths = EVAL_WIDTHS[scale]
    grid: List[KernelParams] = []
    for i, sigma1 in enumerate(widths):
        for sigma2 in widths[: i + 1]:
            grid.append(KernelParams(sigma1=sigma1, sigma2=sigma2, theta=0.0))
    for i, sigma1 in enumerate(widths):
        for sigma2 in widths[:i]:
            grid.append(KernelParams(sigma1=sigma1, sigma2=sigma2, theta=math.pi / 4))
    return grid


def second_moments(kernel: Kernel) -> np.ndarray:
    """2×2 second-moment matrix of the taps about the centre, in (x, y) order."""
    taps = np.asarray(kernel.taps, dtype=np.float64)
    offsets = np.arange(kernel.size, dtype=np.float64) - kernel.center
    dy, dx = np.meshgrid(offsets, offsets, indexing="ij")
    moments = np.array([
        [(taps * dx * dx).sum(), (taps * dx * dy).sum()],
        [(taps * dx * dy).sum(), (taps * dy * dy).sum()],
    ])
    return moments


def second_moment_direction(kernel: Kernel) -> float:
    """Orientation (radians in [0, π)) of the principal axis of the tap moments."""
    values, vectors = np.linalg.eigh(second_moments(kernel))
    principal = vectors[:, int(np.argmax(values))]
    return math.atan2(principal[1], principal[0]) % math.pi
