"""Immutable dense tensors and learnable parameters."""

from typing import Any, Optional, Tuple, Union

import numpy as np

from kernel_estimation.utils.errors import DimensionError, InvalidArgumentError, NumericError

ArrayLike = Union[np.ndarray, float, int, list, tuple]

SUPPORTED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


def as_float_array(data: ArrayLike, dtype: Optional[Union[np.dtype, type]] = None) -> np.ndarray:
    """
    Convert ``data`` to a C-contiguous 32- or 64-bit float array.

    Args:
        data: Array-like input
        dtype: Target dtype; inferred from ``data`` when omitted (non-float inputs become float64)

    Returns:
        Contiguous float array
    """
    array = np.asarray(data)
    if dtype is None:
        dtype = array.dtype if array.dtype in SUPPORTED_DTYPES else np.float64
    dtype = np.dtype(dtype)
    if dtype not in SUPPORTED_DTYPES:
        raise InvalidArgumentError(f"Unsupported dtype {dtype}", argument="dtype")
    if array.ndim == 0:
        # ascontiguousarray promotes scalars to shape (1,)
        return np.array(array, dtype=dtype)
    return np.ascontiguousarray(array, dtype=dtype)


class Tensor:
    """
    Dense row-major float array that never changes after construction.

    Feature maps use batch-channel-row-column layout. A tensor flagged
    ``requires_grad`` is a leaf the active tape differentiates against;
    tensors produced by recorded operations inherit the flag.
    """

    __slots__ = ("_data", "requires_grad", "parameter", "__weakref__")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype: Optional[Union[np.dtype, type]] = None,
    ) -> None:
        array = as_float_array(data, dtype)
        if array is data:
            array = array.copy()
        array.flags.writeable = False
        self._data = array
        self.requires_grad = requires_grad
        self.parameter: Optional["Parameter"] = None

    @property
    def data(self) -> np.ndarray:
        """Read-only view of the values."""
        return self._data

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._data.shape

    @property
    def dtype(self) -> np.dtype:
        return self._data.dtype

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return int(self._data.size)

    def item(self) -> float:
        """Return the single value of a one-element tensor."""
        if self._data.size != 1:
            raise DimensionError("item() needs a one-element tensor", details={"shape": self.shape})
        return float(self._data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Return a writable copy of the values."""
        return self._data.copy()

    def detach(self) -> "Tensor":
        """Same values, no gradient tracking."""
        return Tensor(self._data, requires_grad=False)

    def astype(self, dtype: Union[np.dtype, type]) -> "Tensor":
        return Tensor(self._data.astype(dtype), requires_grad=False)

    @classmethod
    def zeros(cls, shape: Tuple[int, ...], dtype: Union[np.dtype, type] = np.float64) -> "Tensor":
        return cls(np.zeros(shape, dtype=dtype))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # Operator sugar; the functional forms live in ``ops``.
    def __add__(self, other: Any) -> "Tensor":
        from kernel_estimation.tensor import ops
        return ops.add(self, other)

    def __sub__(self, other: Any) -> "Tensor":
        from kernel_estimation.tensor import ops
        return ops.sub(self, other)

    def __mul__(self, other: Any) -> "Tensor":
        from kernel_estimation.tensor import ops
        return ops.mul(self, other)


def ensure_finite(array: np.ndarray, operation: str) -> np.ndarray:
    """
    Raise NumericError when ``array`` holds NaN or Inf.

    Args:
        array: Values to check
        operation: Name reported in the error

    Returns:
        The unchanged array
    """
    if not np.all(np.isfinite(array)):
        raise NumericError(
            f"Non-finite values produced by {operation}",
            operation=operation,
            details={"nan": int(np.isnan(array).sum()), "inf": int(np.isinf(array).sum())},
        )
    return array


class Parameter:
    """A learnable tensor paired with its gradient accumulator."""

    def __init__(self, name: str, value: ArrayLike, dtype: Optional[Union[np.dtype, type]] = None) -> None:
        """
        Initialize a parameter.

        Args:
            name: Identifier, unique within its owning network
            value: Initial values
            dtype: Storage dtype
        """
        self.name = name
        self._value: Tensor = Tensor(value, requires_grad=True, dtype=dtype)
        self._value.parameter = self
        self.grad: Tensor = Tensor.zeros(self._value.shape, dtype=self._value.dtype)

    @property
    def value(self) -> Tensor:
        return self._value

    @value.setter
    def value(self, new_value: Union[Tensor, ArrayLike]) -> None:
        array = new_value.data if isinstance(new_value, Tensor) else as_float_array(new_value, self._value.dtype)
        if array.shape != self._value.shape:
            raise DimensionError(
                f"Parameter {self.name} expects shape {self._value.shape}",
                details={"expected": list(self._value.shape), "got": list(array.shape)},
            )
        tensor = Tensor(array, requires_grad=True, dtype=self._value.dtype)
        tensor.parameter = self
        self._value = tensor

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._value.shape

    @property
    def dtype(self) -> np.dtype:
        return self._value.dtype

    @property
    def size(self) -> int:
        return self._value.size

    def zero_grad(self) -> None:
        """Reset the accumulator to zeros."""
        self.grad = Tensor.zeros(self.shape, dtype=self.dtype)

    def accumulate(self, gradient: np.ndarray) -> None:
        """Add ``gradient`` to the accumulator."""
        if gradient.shape != self.shape:
            raise DimensionError(
                f"Gradient shape mismatch for {self.name}",
                details={"expected": list(self.shape), "got": list(gradient.shape)},
            )
        self.grad = Tensor(self.grad.data + gradient.astype(self.dtype, copy=False))

    def __repr__(self) -> str:
        return f"Parameter(name={self.name!r}, shape={self.shape}, dtype={self.dtype})"
