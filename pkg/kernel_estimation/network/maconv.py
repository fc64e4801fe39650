"""Mutual affine convolution."""

from typing import List, Optional

import numpy as np

from kernel_estimation.models.configs import MAConvConfig
from kernel_estimation.network.layers import Conv2d, Module
from kernel_estimation.tensor.ops import add, channel_slice, concat_channels, mul, relu, split_channels
from kernel_estimation.tensor.tensor import Tensor
from kernel_estimation.utils.errors import DimensionError


class AffineBranch(Module):
    """
    One split of a MAConv layer.

    A 1×1 → ReLU → 1×1 subnet maps the complementary channels to per-pixel
    scale β and shift γ for this split, followed by a 3×3 convolution.
    """

    def __init__(
        self,
        name: str,
        config: MAConvConfig,
        index: int,
        rng: np.random.Generator,
        bias: bool = True,
        dtype: np.dtype = np.float32,
    ) -> None:
        super().__init__(name)
        self.index = index
        self.splits = config.splits
        self.split_in = config.split_in
        self.affine_hidden = self.register_module(
            Conv2d(f"{name}.affine_hidden", config.complement_channels, config.hidden_channels, 1, rng,
                   bias=bias, dtype=dtype)
        )
        self.affine_out = self.register_module(
            Conv2d(f"{name}.affine_out", config.hidden_channels, 2 * config.split_in, 1, rng,
                   bias=bias, dtype=dtype)
        )
        self.conv = self.register_module(
            Conv2d(f"{name}.conv", config.split_in, config.split_out, 3, rng, bias=bias, dtype=dtype)
        )
        if self.affine_out.bias is not None:
            # β starts at 1 and γ at 0.
            initial = np.zeros(2 * config.split_in, dtype=dtype)
            initial[: config.split_in] = 1.0
            self.affine_out.bias.value = initial

    def affine(self, complement: Tensor) -> tuple:
        """(β, γ) predicted from the complementary splits."""
        params = self.affine_out(relu(self.affine_hidden(complement)))
        beta = channel_slice(params, 0, self.split_in)
        gamma = channel_slice(params, self.split_in, 2 * self.split_in)
        return beta, gamma

    def forward(self, x: Tensor) -> Tensor:
        """z_i for the full C_in-channel input ``x``."""
        parts = split_channels(x, self.splits)
        others = [parts[j] for j in range(self.splits) if j != self.index]
        complement = others[0] if len(others) == 1 else concat_channels(others)
        beta, gamma = self.affine(complement)
        return self.conv(add(mul(beta, parts[self.index]), gamma))


class MAConv(Module):
    """
    Mutual affine convolution over ``S`` channel splits.

    Split i is scaled and shifted by an affine map predicted from the
    concatenation (ascending order) of all other splits, convolved 3×3,
    and the results are concatenated in split order.
    """

    def __init__(
        self,
        name: str,
        config: MAConvConfig,
        rng: np.random.Generator,
        bias: bool = True,
        dtype: np.dtype = np.float32,
    ) -> None:
        super().__init__(name)
        self.config = config
        self.branches: List[AffineBranch] = [
            self.register_module(AffineBranch(f"{name}.split{i}", config, i, rng, bias=bias, dtype=dtype))
            for i in range(config.splits)
        ]

    @property
    def in_channels(self) -> int:
        return self.config.in_channels

    @property
    def out_channels(self) -> int:
        return self.config.out_channels

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise DimensionError(
                "MAConv input channel mismatch",
                details={"expected": self.config.in_channels, "shape": list(x.shape)},
            )
        return concat_channels([branch(x) for branch in self.branches])

    def complement_indices(self, split: int) -> List[int]:
        """Input channel indices feeding the affine subnet of ``split``."""
        width = self.config.split_in
        return [
            c
            for j in range(self.config.splits)
            if j != split
            for c in range(j * width, (j + 1) * width)
        ]

    def set_identity_affine(self) -> None:
        """Zero every affine weight so β = 1 and γ = 0 everywhere."""
        for branch in self.branches:
            for conv in (branch.affine_hidden, branch.affine_out):
                conv.weight.value = np.zeros(conv.weight.shape, dtype=conv.weight.dtype)
            if branch.affine_out.bias is not None:
                initial = np.zeros(branch.affine_out.bias.shape, dtype=branch.affine_out.bias.dtype)
                initial[: self.config.split_in] = 1.0
                branch.affine_out.bias.value = initial

    def grouped_weight(self) -> np.ndarray:
        """Dense (C_out, C_in, 3, 3) weight equivalent to the split convolutions."""
        cfg = self.config
        dense = np.zeros((cfg.out_channels, cfg.in_channels, 3, 3),
                         dtype=self.branches[0].conv.weight.dtype)
        for i, branch in enumerate(self.branches):
            rows = slice(i * cfg.split_out, (i + 1) * cfg.split_out)
            cols = slice(i * cfg.split_in, (i + 1) * cfg.split_in)
            dense[rows, cols] = branch.conv.weight.value.data
        return dense

    def grouped_bias(self) -> Optional[np.ndarray]:
        if self.branches[0].conv.bias is None:
            return None
        return np.concatenate([branch.conv.bias.value.data for branch in self.branches])
