"""Spatially variant kernel fields over an HR image."""

import math
from typing import Dict, List, Optional, Sequence

import numpy as np

from kernel_estimation.degradation.kernels import DEFAULT_KERNEL_SIZE, KernelParams, synth_kernel
from kernel_estimation.utils.errors import DimensionError, InvalidArgumentError
from kernel_estimation.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_PATCH_SIZE = 40
CHECKERBOARD_PATCH_SIZE = 80

CONSTANT_FIELD = 0
FORMULA_FIELD_TYPES = (1, 2, 3, 4, 5)
CHECKERBOARD_FIELD = 6


class KernelField:
    """
    Per-patch kernel parameters covering an H×W HR image.

    The grid has ``m = ceil(W / patch_size)`` columns and
    ``n = ceil(H / patch_size)`` rows; pixel (r, c) belongs to patch
    (row r // patch_size, column c // patch_size).
    """

    def __init__(
        self,
        height: int,
        width: int,
        patch_size: int,
        params: Sequence[Sequence[KernelParams]],
        field_type: int,
        scale: int,
        seed: Optional[int] = None,
    ) -> None:
        if height < 1 or width < 1:
            raise InvalidArgumentError("field extent must be positive", argument="extent")
        if patch_size < 1:
            raise InvalidArgumentError("patch size must be positive", argument="patch_size")
        rows, cols = math.ceil(height / patch_size), math.ceil(width / patch_size)
        grid = [list(row) for row in params]
        if len(grid) != rows or any(len(row) != cols for row in grid):
            raise DimensionError(
                "patch grid does not cover the field extent",
                details={"expected": [rows, cols], "rows": len(grid)},
            )
        self.height = height
        self.width = width
        self.patch_size = patch_size
        self.params: List[List[KernelParams]] = grid
        self.field_type = field_type
        self.scale = scale
        self.seed = seed

    @property
    def extent(self) -> tuple:
        return self.height, self.width

    @property
    def grid_shape(self) -> tuple:
        """(n rows, m columns)."""
        return len(self.params), len(self.params[0])

    def params_at(self, row: int, col: int) -> KernelParams:
        """Parameters of the patch containing HR pixel (row, col)."""
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise InvalidArgumentError("pixel outside field", argument="pixel", details={"pixel": [row, col]})
        return self.params[row // self.patch_size][col // self.patch_size]

    def patch_index_map(self) -> np.ndarray:
        """(H, W) array of flat patch indices (row-major over the grid)."""
        _, cols = self.grid_shape
        rows_idx = np.arange(self.height) // self.patch_size
        cols_idx = np.arange(self.width) // self.patch_size
        return rows_idx[:, None] * cols + cols_idx[None, :]

    def flat_params(self) -> List[KernelParams]:
        return [p for row in self.params for p in row]

    def is_constant(self) -> bool:
        flat = self.flat_params()
        return all(p == flat[0] for p in flat)

    def header(self) -> Dict[str, str]:
        """Sidecar key=value description."""
        values = {
            "field_type": str(self.field_type),
            "s": str(self.scale),
            "patch_size": str(self.patch_size),
            "height": str(self.height),
            "width": str(self.width),
        }
        if self.seed is not None:
            values["seed"] = str(self.seed)
        return values

    @classmethod
    def constant(
        cls,
        params: KernelParams,
        height: int,
        width: int,
        scale: int = 4,
        patch_size: int = DEFAULT_PATCH_SIZE,
    ) -> "KernelField":
        """Spatially invariant field where every patch shares ``params``."""
        rows, cols = math.ceil(height / patch_size), math.ceil(width / patch_size)
        grid = [[params] * cols for _ in range(rows)]
        return cls(height, width, patch_size, grid, CONSTANT_FIELD, scale)


def field_formula(
    field_type: int,
    x: float,
    y: float,
    scale: int,
    rng: Optional[np.random.Generator] = None,
) -> KernelParams:
    """
    Kernel parameters of a formula field at normalized position (x, y).

    With a = 2.325s and b = 0.175s:
      1: σ1 = a+b, σ2 = ax+b, θ = 0
      2: σ1 = ay+b, σ2 = ax+b, θ = 0
      3: σ1 = a+b, σ2 = b, θ = πx
      4: σ1 = ay+b, σ2 = ax+b, θ = πx
      5: σ1, σ2 ~ U(b, a+b), θ ~ U(0, π)

    Args:
        field_type: 1 to 5
        x: Column position in [0, 1]
        y: Row position in [0, 1]
        scale: SR scale factor
        rng: Generator (required for type 5)

    Returns:
        Kernel parameters
    """
    a, b = 2.325 * scale, 0.175 * scale
    if field_type == 1:
        return KernelParams(sigma1=a + b, sigma2=a * x + b, theta=0.0)
    if field_type == 2:
        return KernelParams(sigma1=a * y + b, sigma2=a * x + b, theta=0.0)
    if field_type == 3:
        return KernelParams(sigma1=a + b, sigma2=b, theta=math.pi * x)
    if field_type == 4:
        return KernelParams(sigma1=a * y + b, sigma2=a * x + b, theta=math.pi * x)
    if field_type == 5:
        if rng is None:
            raise InvalidArgumentError("random field type needs an rng", argument="rng")
        sigma1 = float(rng.uniform(b, a + b))
        sigma2 = float(rng.uniform(b, a + b))
        theta = float(rng.uniform(0.0, math.pi))
        return KernelParams(sigma1=sigma1, sigma2=sigma2, theta=theta)
    raise InvalidArgumentError(f"unknown field type {field_type}", argument="field_type",
                               details={"supported": list(FORMULA_FIELD_TYPES)})


def make_kernel_field(
    field_type: int,
    height: int,
    width: int,
    patch_size: int = DEFAULT_PATCH_SIZE,
    scale: int = 4,
    rng: Optional[np.random.Generator] = None,
    seed: Optional[int] = None,
) -> KernelField:
    """
    Build a formula field (types 1-5) on a patch grid.

    Patch (column i, row j) is evaluated at x = i/m, y = j/n. Type 5 draws
    patches in row-major order from ``rng``.

    Args:
        field_type: 1 to 5
        height: HR height
        width: HR width
        patch_size: Patch side in HR pixels
        scale: SR scale factor
        rng: Generator for type 5 (built from ``seed`` when omitted)
        seed: Seed recorded in the field header

    Returns:
        KernelField
    """
    if field_type not in FORMULA_FIELD_TYPES:
        raise InvalidArgumentError(f"unknown field type {field_type}", argument="field_type",
                                   details={"supported": list(FORMULA_FIELD_TYPES)})
    if patch_size < 1:
        raise InvalidArgumentError("patch size must be positive", argument="patch_size")
    if field_type == 5 and rng is None:
        rng = np.random.default_rng(seed or 0)

    cols, rows = math.ceil(width / patch_size), math.ceil(height / patch_size)
    grid = [
        [field_formula(field_type, i / cols, j / rows, scale, rng) for i in range(cols)]
        for j in range(rows)
    ]
    logger.debug("kernel field built", field_type=field_type, grid=[rows, cols], scale=scale)
    return KernelField(height, width, patch_size, grid, field_type, scale, seed)


def make_checkerboard_field(
    height: int,
    width: int,
    patch_size: int = CHECKERBOARD_PATCH_SIZE,
    scale: int = 4,
) -> KernelField:
    """
    Checkerboard of two kernels with crossed orientations.

    Widths are σ1 = 2.5s, σ2 = 0.175s; patches with an even coordinate sum
    use θ = π/4, the others 3π/4.
    """
    first = KernelParams(sigma1=2.5 * scale, sigma2=0.175 * scale, theta=math.pi / 4)
    second = KernelParams(sigma1=2.5 * scale, sigma2=0.175 * scale, theta=3 * math.pi / 4)
    cols, rows = math.ceil(width / patch_size), math.ceil(height / patch_size)
    grid = [[first if (i + j) % 2 == 0 else second for i in range(cols)] for j in range(rows)]
    return KernelField(height, width, patch_size, grid, CHECKERBOARD_FIELD, scale)


def patch_kernels(field: KernelField, size: int = DEFAULT_KERNEL_SIZE, dtype: np.dtype = np.float64) -> np.ndarray:
    """(patches, size·size) flattened kernels, row-major over the patch grid."""
    cache: Dict[tuple, np.ndarray] = {}
    rows = []
    for params in field.flat_params():
        key = params.as_tuple()
        if key not in cache:
            cache[key] = synth_kernel(params, size, dtype).flatten()
        rows.append(cache[key])
    return np.stack(rows)


def kernel_map(field: KernelField, size: int = DEFAULT_KERNEL_SIZE, dtype: np.dtype = np.float64) -> np.ndarray:
    """
    Dense ground-truth kernel map of a field.

    Args:
        field: Kernel field
        size: Kernel side
        dtype: Output dtype

    Returns:
        Array of shape (size·size, H, W)
    """
    kernels = patch_kernels(field, size, dtype)
    index = field.patch_index_map()
    return np.ascontiguousarray(kernels[index].transpose(2, 0, 1))
