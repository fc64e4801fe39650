"""In-memory images and dense kernel maps."""

import math
from typing import Literal, Optional

import numpy as np

from kernel_estimation.utils.errors import DimensionError, InvalidArgumentError

ImageRole = Literal["hr", "lr"]


class Image:
    """
    Channel-first float image with values nominally in [0, 1].

    Values are never clamped here; clamping happens only at export.
    """

    __slots__ = ("data", "role", "scale")

    def __init__(self, data: np.ndarray, role: ImageRole = "hr", scale: Optional[int] = None) -> None:
        array = np.asarray(data)
        if array.ndim == 2:
            array = array[None, :, :]
        if array.ndim != 3 or array.shape[0] not in (1, 3):
            raise DimensionError("images are (C, H, W) with 1 or 3 channels",
                                 details={"shape": list(array.shape)})
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        if role not in ("hr", "lr"):
            raise InvalidArgumentError("role must be 'hr' or 'lr'", argument="role")
        self.data = array
        self.role = role
        self.scale = scale

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    @property
    def extent(self) -> tuple:
        return self.height, self.width

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def with_data(self, data: np.ndarray, role: Optional[ImageRole] = None, scale: Optional[int] = None) -> "Image":
        """Same role and scale, new pixels."""
        return Image(data, role or self.role, scale if scale is not None else self.scale)

    def astype(self, dtype: np.dtype) -> "Image":
        return self.with_data(self.data.astype(dtype))

    def crop(self, top: int, left: int, height: int, width: int) -> "Image":
        if top < 0 or left < 0 or top + height > self.height or left + width > self.width:
            raise DimensionError("crop outside image", details={"crop": [top, left, height, width],
                                                                "extent": list(self.extent)})
        return self.with_data(self.data[:, top:top + height, left:left + width].copy())

    def clamped(self) -> np.ndarray:
        """Pixels clipped into [0, 1] for export."""
        return np.clip(self.data, 0.0, 1.0)


class KernelMap:
    """
    Dense per-pixel kernels: ``values[t, r, c]`` is tap t (row-major over the
    kernel grid) of the kernel at pixel (r, c).
    """

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray) -> None:
        array = np.asarray(values)
        if array.ndim != 3:
            raise DimensionError("kernel maps are (taps, H, W)", details={"shape": list(array.shape)})
        size = int(round(math.sqrt(array.shape[0])))
        if size * size != array.shape[0] or size % 2 == 0:
            raise DimensionError("kernel map taps must form an odd square grid",
                                 details={"taps": int(array.shape[0])})
        self.values = array

    @property
    def kernel_size(self) -> int:
        return int(round(math.sqrt(self.values.shape[0])))

    @property
    def extent(self) -> tuple:
        return int(self.values.shape[1]), int(self.values.shape[2])

    def kernel_at(self, row: int, col: int) -> np.ndarray:
        """(size, size) kernel at one pixel."""
        size = self.kernel_size
        return self.values[:, row, col].reshape(size, size)

    @classmethod
    def from_kernel(cls, taps: np.ndarray, height: int, width: int) -> "KernelMap":
        """Spatially invariant map repeating one kernel."""
        flat = np.asarray(taps).reshape(-1)
        return cls(np.broadcast_to(flat[:, None, None], (flat.size, height, width)).copy())
