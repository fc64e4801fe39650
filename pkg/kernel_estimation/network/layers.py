"""Base module and plain convolution layers."""

from abc import ABC, abstractmethod
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from kernel_estimation.tensor.ops import conv2d, conv_transpose2d
from kernel_estimation.tensor.tensor import Parameter, Tensor
from kernel_estimation.utils.errors import InvalidArgumentError


class Module(ABC):
    """
    Abstract base class for network components.

    Subclasses register parameters and child modules in construction order;
    ``parameters()`` walks them depth-first so the order is stable across
    runs and checkpoints.
    """

    def __init__(self, name: str) -> None:
        self.name = name
        self._parameters: List[Parameter] = []
        self._children: List["Module"] = []

    @abstractmethod
    def forward(self, x: Tensor) -> Tensor:
        """Apply the module to a batch-channel-row-column tensor."""

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def register_parameter(self, suffix: str, value: np.ndarray) -> Parameter:
        parameter = Parameter(f"{self.name}.{suffix}", value)
        self._parameters.append(parameter)
        return parameter

    def register_module(self, module: "Module") -> "Module":
        self._children.append(module)
        return module

    def children(self) -> List["Module"]:
        return list(self._children)

    def modules(self) -> Iterator["Module"]:
        """This module and every descendant, depth-first."""
        yield self
        for child in self._children:
            yield from child.modules()

    def parameters(self) -> List[Parameter]:
        params = list(self._parameters)
        for child in self._children:
            params.extend(child.parameters())
        return params

    def named_parameters(self) -> Dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def zero_grad(self) -> None:
        for parameter in self.parameters():
            parameter.zero_grad()


def fan_in_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, dtype: np.dtype) -> np.ndarray:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in)) initial values."""
    bound = 1.0 / np.sqrt(max(1, fan_in))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d(Module):
    """Zero-padded convolution with optional bias."""

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: Optional[int] = None,
        bias: bool = True,
        dtype: np.dtype = np.float32,
    ) -> None:
        super().__init__(name)
        if in_channels < 1 or out_channels < 1 or kernel_size < 1:
            raise InvalidArgumentError("channel counts and kernel size must be positive", argument=name)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = self.register_parameter(
            "weight",
            fan_in_uniform(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in, dtype),
        )
        self.bias: Optional[Parameter] = None
        if bias:
            self.bias = self.register_parameter("bias", fan_in_uniform(rng, (out_channels,), fan_in, dtype))

    def forward(self, x: Tensor) -> Tensor:
        bias = self.bias.value if self.bias is not None else None
        return conv2d(x, self.weight.value, bias, stride=self.stride, pad=self.padding)

    def output_extent(self, height: int, width: int) -> Tuple[int, int]:
        k, p, s = self.kernel_size, self.padding, self.stride
        return (height + 2 * p - k) // s + 1, (width + 2 * p - k) // s + 1

    def weight_count(self) -> int:
        return self.out_channels * self.in_channels * self.kernel_size * self.kernel_size

    def macs(self, height: int, width: int) -> int:
        """Multiply-accumulates for one input of the given extent."""
        h_out, w_out = self.output_extent(height, width)
        return self.weight_count() * h_out * w_out


class ConvTranspose2d(Module):
    """Unpadded transposed convolution (learned upsampling)."""

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        bias: bool = True,
        dtype: np.dtype = np.float32,
    ) -> None:
        super().__init__(name)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        taps_per_output = max(1, (kernel_size // stride) ** 2)
        fan_in = in_channels * taps_per_output
        self.weight = self.register_parameter(
            "weight",
            fan_in_uniform(rng, (in_channels, out_channels, kernel_size, kernel_size), fan_in, dtype),
        )
        self.bias: Optional[Parameter] = None
        if bias:
            self.bias = self.register_parameter("bias", fan_in_uniform(rng, (out_channels,), fan_in, dtype))

    def forward(self, x: Tensor) -> Tensor:
        bias = self.bias.value if self.bias is not None else None
        return conv_transpose2d(x, self.weight.value, bias, stride=self.stride)

    def output_extent(self, height: int, width: int) -> Tuple[int, int]:
        k, s = self.kernel_size, self.stride
        return (height - 1) * s + k, (width - 1) * s + k

    def weight_count(self) -> int:
        return self.out_channels * self.in_channels * self.kernel_size * self.kernel_size

    def macs(self, height: int, width: int) -> int:
        return self.weight_count() * height * width
