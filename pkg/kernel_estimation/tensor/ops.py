"""
Differentiable operators on batch-channel-row-column tensors.

Every operator validates shapes, rejects non-finite results and, when a
tape is active and an input requires gradients, records its adjoint.
Convolutions are evaluated as a loop over kernel taps with one BLAS
contraction per tap, which keeps forward and adjoint code symmetric.
"""

from contextlib import contextmanager
from contextvars import ContextVar
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from kernel_estimation.tensor.tape import BackwardFn, current_tape
from kernel_estimation.tensor.tensor import Tensor, ensure_finite
from kernel_estimation.utils.errors import DimensionError, InvalidArgumentError

Operand = Union[Tensor, np.ndarray, float, int]


class MacCounter:
    """Accumulates convolution multiply-accumulates executed in its context."""

    def __init__(self) -> None:
        self.total = 0
        self.by_op: dict = {}

    def add(self, op: str, macs: int) -> None:
        self.total += int(macs)
        self.by_op[op] = self.by_op.get(op, 0) + int(macs)


_mac_counter: ContextVar[Optional[MacCounter]] = ContextVar("mac_counter", default=None)


@contextmanager
def count_macs() -> Iterator[MacCounter]:
    """
    Count convolution multiply-accumulates of everything run inside the block.

    Yields:
        MacCounter whose ``total`` grows as convolutions execute
    """
    counter = MacCounter()
    token = _mac_counter.set(counter)
    try:
        yield counter
    finally:
        _mac_counter.reset(token)


def _count(op: str, macs: int) -> None:
    counter = _mac_counter.get()
    if counter is not None:
        counter.add(op, macs)


def _as_tensor(value: Operand, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value), dtype=dtype)


def _emit(op: str, inputs: Tuple[Tensor, ...], out: np.ndarray, backward: BackwardFn) -> Tensor:
    ensure_finite(out, op)
    tape = current_tape()
    tracked = tape is not None and any(t.requires_grad for t in inputs)
    result = Tensor(out, requires_grad=tracked)
    if tracked:
        tape.record(op, inputs, result, backward)
    return result


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum out broadcast dimensions so ``grad`` matches ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _require_4d(x: Tensor, op: str) -> None:
    if x.ndim != 4:
        raise DimensionError(f"{op} expects a 4-D tensor", details={"shape": list(x.shape)})


# ---------------------------------------------------------------------------
# Convolutions
# ---------------------------------------------------------------------------

def conv2d(
    input: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    pad: int = 0,
) -> Tensor:
    """
    Zero-padded 2-D cross-correlation.

    Args:
        input: N×C_in×H×W tensor
        weight: C_out×C_in×k×k tensor
        bias: Optional length-C_out vector
        stride: Step between output sites (≥ 1)
        pad: Zero padding on every border (≥ 0)

    Returns:
        N×C_out×H_out×W_out tensor with H_out = (H + 2·pad − k) // stride + 1
    """
    _require_4d(input, "conv2d")
    if weight.ndim != 4:
        raise DimensionError("conv2d weight must be 4-D", details={"shape": list(weight.shape)})
    if stride < 1:
        raise InvalidArgumentError("stride must be >= 1", argument="stride")
    if pad < 0:
        raise InvalidArgumentError("pad must be >= 0", argument="pad")

    n, c, h, w = input.shape
    c_out, c_in, kh, kw = weight.shape
    if c != c_in:
        raise DimensionError(
            "conv2d input channels do not match weight",
            details={"input_channels": c, "weight_channels": c_in},
        )
    if bias is not None and bias.shape != (c_out,):
        raise DimensionError("conv2d bias must have C_out entries", details={"shape": list(bias.shape)})

    h_out = (h + 2 * pad - kh) // stride + 1
    w_out = (w + 2 * pad - kw) // stride + 1
    if h_out < 1 or w_out < 1:
        raise DimensionError(
            "conv2d kernel does not fit the padded input",
            details={"input": [h, w], "kernel": [kh, kw], "pad": pad},
        )

    x = input.data
    wt = weight.data
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    row_span = stride * (h_out - 1) + 1
    col_span = stride * (w_out - 1) + 1

    acc = np.zeros((n, h_out, w_out, c_out), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i:i + row_span:stride, j:j + col_span:stride]
            acc += np.tensordot(patch, wt[:, :, i, j], axes=([1], [1]))
    out = np.ascontiguousarray(acc.transpose(0, 3, 1, 2))
    if bias is not None:
        out += bias.data[None, :, None, None]
    _count("conv2d", n * c_out * h_out * w_out * c_in * kh * kw)

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        grad_x = np.zeros_like(xp) if input.requires_grad else None
        grad_w = np.zeros_like(wt) if weight.requires_grad else None
        for i in range(kh):
            for j in range(kw):
                if grad_w is not None:
                    patch = xp[:, :, i:i + row_span:stride, j:j + col_span:stride]
                    grad_w[:, :, i, j] = np.tensordot(grad, patch, axes=([0, 2, 3], [0, 2, 3]))
                if grad_x is not None:
                    contrib = np.tensordot(grad, wt[:, :, i, j], axes=([1], [0]))
                    grad_x[:, :, i:i + row_span:stride, j:j + col_span:stride] += contrib.transpose(0, 3, 1, 2)
        if grad_x is not None and pad:
            grad_x = grad_x[:, :, pad:pad + h, pad:pad + w]
        grad_b = grad.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return (grad_x, grad_w, grad_b)

    inputs = (input, weight) if bias is None else (input, weight, bias)
    return _emit("conv2d", inputs, out, backward)


def conv_transpose2d(
    input: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
) -> Tensor:
    """
    Transposed convolution without padding; the adjoint of ``conv2d``.

    Args:
        input: N×C_in×H×W tensor
        weight: C_in×C_out×k×k tensor (same layout ``conv2d`` uses for the reverse map)
        bias: Optional length-C_out vector
        stride: Upsampling step (≥ 1)

    Returns:
        N×C_out×((H−1)·stride + k)×((W−1)·stride + k) tensor
    """
    _require_4d(input, "conv_transpose2d")
    if weight.ndim != 4:
        raise DimensionError("conv_transpose2d weight must be 4-D", details={"shape": list(weight.shape)})
    if stride < 1:
        raise InvalidArgumentError("stride must be >= 1", argument="stride")

    n, c, h, w = input.shape
    c_in, c_out, kh, kw = weight.shape
    if c != c_in:
        raise DimensionError(
            "conv_transpose2d input channels do not match weight",
            details={"input_channels": c, "weight_channels": c_in},
        )
    if bias is not None and bias.shape != (c_out,):
        raise DimensionError("conv_transpose2d bias must have C_out entries", details={"shape": list(bias.shape)})

    h_out = (h - 1) * stride + kh
    w_out = (w - 1) * stride + kw
    row_span = stride * (h - 1) + 1
    col_span = stride * (w - 1) + 1
    x = input.data
    wt = weight.data

    out = np.zeros((n, c_out, h_out, w_out), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(x, wt[:, :, i, j], axes=([1], [0]))
            out[:, :, i:i + row_span:stride, j:j + col_span:stride] += contrib.transpose(0, 3, 1, 2)
    if bias is not None:
        out += bias.data[None, :, None, None]
    _count("conv_transpose2d", n * c_in * c_out * h * w * kh * kw)

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        grad_x = np.zeros_like(x) if input.requires_grad else None
        grad_w = np.zeros_like(wt) if weight.requires_grad else None
        for i in range(kh):
            for j in range(kw):
                window = grad[:, :, i:i + row_span:stride, j:j + col_span:stride]
                if grad_x is not None:
                    grad_x += np.tensordot(window, wt[:, :, i, j], axes=([1], [1])).transpose(0, 3, 1, 2)
                if grad_w is not None:
                    grad_w[:, :, i, j] = np.tensordot(x, window, axes=([0, 2, 3], [0, 2, 3]))
        grad_b = grad.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return (grad_x, grad_w, grad_b)

    inputs = (input, weight) if bias is None else (input, weight, bias)
    return _emit("conv_transpose2d", inputs, out, backward)


# ---------------------------------------------------------------------------
# Pointwise and channel operators
# ---------------------------------------------------------------------------

def relu(input: Tensor) -> Tensor:
    """Elementwise max(0, x); the subgradient at 0 is 0."""
    x = input.data
    out = np.maximum(x, 0)

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad * (x > 0),)

    return _emit("relu", (input,), out, backward)


def softmax_channels(input: Tensor) -> Tensor:
    """Softmax along the channel axis at every (n, h, w) site."""
    _require_4d(input, "softmax_channels")
    x = ensure_finite(input.data, "softmax_channels")
    shifted = np.exp(x - x.max(axis=1, keepdims=True))
    out = shifted / shifted.sum(axis=1, keepdims=True)

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (out * (grad - (grad * out).sum(axis=1, keepdims=True)),)

    return _emit("softmax_channels", (input,), out, backward)


def nearest_upsample(input: Tensor, s: int) -> Tensor:
    """Replicate every pixel into an s×s block."""
    _require_4d(input, "nearest_upsample")
    if s < 1:
        raise InvalidArgumentError("scale must be >= 1", argument="s")
    if s == 1:
        out = input.data.copy()
    else:
        out = np.repeat(np.repeat(input.data, s, axis=2), s, axis=3)
    n, c, h, w = input.shape

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad.reshape(n, c, h, s, w, s).sum(axis=(3, 5)),)

    return _emit("nearest_upsample", (input,), out, backward)


def channel_slice(input: Tensor, start: int, stop: int) -> Tensor:
    """Channels ``[start, stop)`` of a 4-D tensor."""
    _require_4d(input, "channel_slice")
    c = input.shape[1]
    if not 0 <= start < stop <= c:
        raise InvalidArgumentError(
            "channel range out of bounds",
            argument="channels",
            details={"start": start, "stop": stop, "channels": c},
        )
    out = input.data[:, start:stop].copy()

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        full = np.zeros(input.shape, dtype=grad.dtype)
        full[:, start:stop] = grad
        return (full,)

    return _emit("channel_slice", (input,), out, backward)


def pad_replicate(input: Tensor, bottom: int, right: int) -> Tensor:
    """Extend the last row ``bottom`` times and the last column ``right`` times."""
    _require_4d(input, "pad_replicate")
    if bottom < 0 or right < 0:
        raise InvalidArgumentError("padding must be >= 0", argument="padding",
                                   details={"bottom": bottom, "right": right})
    out = np.pad(input.data, ((0, 0), (0, 0), (0, bottom), (0, right)), mode="edge")
    _, _, h, w = input.shape

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        folded = grad[:, :, :h].copy()
        folded[:, :, h - 1] += grad[:, :, h:].sum(axis=2)
        result = folded[:, :, :, :w].copy()
        result[:, :, :, w - 1] += folded[:, :, :, w:].sum(axis=3)
        return (result,)

    return _emit("pad_replicate", (input,), out, backward)


def spatial_crop(input: Tensor, height: int, width: int) -> Tensor:
    """Top-left ``height``×``width`` window."""
    _require_4d(input, "spatial_crop")
    n, c, h, w = input.shape
    if not (1 <= height <= h and 1 <= width <= w):
        raise InvalidArgumentError(
            "crop window exceeds the input",
            argument="extent",
            details={"crop": [height, width], "input": [h, w]},
        )
    out = input.data[:, :, :height, :width].copy()

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        full = np.zeros(input.shape, dtype=grad.dtype)
        full[:, :, :height, :width] = grad
        return (full,)

    return _emit("spatial_crop", (input,), out, backward)


def split_channels(input: Tensor, S: int) -> List[Tensor]:
    """
    Split the channel axis into ``S`` equal consecutive groups.

    Split i holds channels ``[i·C/S, (i+1)·C/S)``.
    """
    _require_4d(input, "split_channels")
    c = input.shape[1]
    if S < 1 or c % S != 0:
        raise InvalidArgumentError(
            f"{S} splits do not divide {c} channels",
            argument="S",
            details={"channels": c, "splits": S},
        )
    width = c // S
    return [channel_slice(input, i * width, (i + 1) * width) for i in range(S)]


def concat_channels(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate 4-D tensors along the channel axis, in order."""
    if not tensors:
        raise InvalidArgumentError("concat needs at least one tensor", argument="tensors")
    for t in tensors:
        _require_4d(t, "concat_channels")
    base = tensors[0].shape
    for t in tensors[1:]:
        if t.shape[0] != base[0] or t.shape[2:] != base[2:]:
            raise DimensionError(
                "concat needs equal batch and spatial extents",
                details={"first": list(base), "other": list(t.shape)},
            )
    out = np.concatenate([t.data for t in tensors], axis=1)
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return tuple(grad[:, bounds[k]:bounds[k + 1]] for k in range(len(tensors)))

    return _emit("concat_channels", tuple(tensors), out, backward)


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(
            f"{op} operands do not broadcast",
            details={"left": list(a.shape), "right": list(b.shape)},
        ) from None


def add(a: Operand, b: Operand) -> Tensor:
    """Elementwise sum with numpy broadcasting."""
    ta = _as_tensor(a, b if isinstance(b, Tensor) else None)
    tb = _as_tensor(b, ta)
    _binary_shapes(ta, tb, "add")
    out = ta.data + tb.data

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (_unbroadcast(grad, ta.shape), _unbroadcast(grad, tb.shape))

    return _emit("add", (ta, tb), out, backward)


def sub(a: Operand, b: Operand) -> Tensor:
    """Elementwise difference with numpy broadcasting."""
    ta = _as_tensor(a, b if isinstance(b, Tensor) else None)
    tb = _as_tensor(b, ta)
    _binary_shapes(ta, tb, "sub")
    out = ta.data - tb.data

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (_unbroadcast(grad, ta.shape), _unbroadcast(-grad, tb.shape))

    return _emit("sub", (ta, tb), out, backward)


def mul(a: Operand, b: Operand) -> Tensor:
    """Elementwise (Hadamard) product with numpy broadcasting."""
    ta = _as_tensor(a, b if isinstance(b, Tensor) else None)
    tb = _as_tensor(b, ta)
    _binary_shapes(ta, tb, "mul")
    x, y = ta.data, tb.data
    out = x * y

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (_unbroadcast(grad * y, ta.shape), _unbroadcast(grad * x, tb.shape))

    return _emit("mul", (ta, tb), out, backward)


def scale(input: Tensor, factor: float) -> Tensor:
    """Multiply by a constant."""
    out = input.data * input.dtype.type(factor)

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad * input.dtype.type(factor),)

    return _emit("scale", (input,), out, backward)


def absolute(input: Tensor) -> Tensor:
    """Elementwise absolute value; the subgradient at 0 is 0."""
    x = input.data
    out = np.abs(x)

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad * np.sign(x),)

    return _emit("absolute", (input,), out, backward)


def sum_all(input: Tensor) -> Tensor:
    """Sum of all entries as a 0-d tensor."""
    out = np.asarray(input.data.sum(), dtype=input.dtype)

    def backward(grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (np.full(input.shape, grad.reshape(()), dtype=input.dtype),)

    return _emit("sum_all", (input,), out, backward)
