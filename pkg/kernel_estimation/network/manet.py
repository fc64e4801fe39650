"""MANet: fully convolutional per-pixel kernel estimator."""

from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from kernel_estimation.degradation.image import Image, KernelMap
from kernel_estimation.models.configs import MAConvConfig, MANetConfig
from kernel_estimation.network.layers import Conv2d, ConvTranspose2d, Module
from kernel_estimation.network.maconv import MAConv
from kernel_estimation.tensor.ops import add, nearest_upsample, pad_replicate, relu, softmax_channels, spatial_crop
from kernel_estimation.tensor.tensor import Tensor
from kernel_estimation.utils.errors import DimensionError, StateError
from kernel_estimation.utils.logger import get_logger

logger = get_logger(__name__)

AFFINE_DAMPING = 1e-3


class ResidualBlock(Module):
    """MAConv layers with ReLU between them plus an identity shortcut."""

    def __init__(
        self,
        name: str,
        channels: int,
        splits: int,
        depth: int,
        rng: np.random.Generator,
        dtype: np.dtype = np.float32,
    ) -> None:
        super().__init__(name)
        config = MAConvConfig(in_channels=channels, out_channels=channels, splits=splits)
        self.layers: List[MAConv] = [
            self.register_module(MAConv(f"{name}.maconv{i}", config, rng, dtype=dtype))
            for i in range(depth)
        ]

    def forward(self, x: Tensor) -> Tensor:
        out = x
        for i, layer in enumerate(self.layers):
            if i:
                out = relu(out)
            out = layer(out)
        return add(out, x)


class MANet(Module):
    """
    Kernel estimator over an LR image.

    Feature extraction runs a head convolution, a residual block, a
    stride-2 downsampler, a wider residual block, a stride-2 transposed
    upsampler and a last residual block. The upsampled features are summed
    with the first block's output and the head output. A 3×3 reconstruction
    convolution emits one logit per kernel tap; the channel softmax turns
    every LR site into a kernel which nearest upsampling spreads over its
    s×s HR block.
    """

    def __init__(
        self,
        config: MANetConfig,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = np.float32,
    ) -> None:
        super().__init__("manet")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = config
        self.dtype = np.dtype(dtype)
        self.steps_trained = 0
        c1, c2, _ = config.channels
        depth = config.maconv_per_block

        self.head = self.register_module(Conv2d("head", config.in_channels, c1, 3, rng, dtype=dtype))
        self.block1 = self.register_module(ResidualBlock("block1", c1, config.splits, depth, rng, dtype))
        self.down = self.register_module(Conv2d("down", c1, c2, 2, rng, stride=2, padding=0, dtype=dtype))
        self.block2 = self.register_module(ResidualBlock("block2", c2, config.splits, depth, rng, dtype))
        self.up = self.register_module(ConvTranspose2d("up", c2, c1, 2, rng, stride=2, dtype=dtype))
        self.block3 = self.register_module(ResidualBlock("block3", c1, config.splits, depth, rng, dtype))
        self.tail = self.register_module(Conv2d("tail", c1, config.kernel_taps, 3, rng, dtype=dtype))

        logger.debug(
            "MANet built",
            channels=config.channels,
            splits=config.splits,
            parameters=sum(p.size for p in self.parameters()),
        )

    def _check_input(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise DimensionError(
                "MANet input must be N×C×H×W with the configured channel count",
                details={"expected_channels": self.config.in_channels, "shape": list(x.shape)},
            )
        if x.dtype != self.dtype:
            x = x.astype(self.dtype)
        return x

    def forward_logits(self, x: Tensor) -> Tensor:
        """
        Pre-softmax tap logits at LR extent.

        An odd height or width is replicate-padded by one row or column for
        the stride-2 path and the logits are cropped back to the input extent.
        """
        x = self._check_input(x)
        height, width = x.shape[2], x.shape[3]
        if height % 2 or width % 2:
            x = pad_replicate(x, height % 2, width % 2)
        head = self.head(x)
        skip = self.block1(head)
        deep = self.block2(self.down(skip))
        merged = add(add(self.up(deep), skip), head)
        logits = self.tail(self.block3(merged))
        if logits.shape[2:] != (height, width):
            logits = spatial_crop(logits, height, width)
        return logits

    def forward(self, x: Tensor) -> Tensor:
        """
        Kernel map for a batch of LR images.

        Args:
            x: N×C×h×w LR tensor

        Returns:
            N×(k·k)×(s·h)×(s·w) tensor whose sites are probability vectors
        """
        return nearest_upsample(softmax_channels(self.forward_logits(x)), self.config.scale)

    def estimate(self, image: Image) -> KernelMap:
        """Dense kernel map over the HR extent of one LR image."""
        if image.channels != self.config.in_channels:
            raise DimensionError(
                "image channel count does not match the network",
                details={"image": image.channels, "network": self.config.in_channels},
            )
        batch = Tensor(image.data[None].astype(self.dtype))
        return KernelMap(self.forward(batch).data[0])

    def layer_extents(self, height: int, width: int) -> List[Tuple[Module, int, int]]:
        """Direct children with the input extent each one sees, after odd-extent padding."""
        height, width = height + height % 2, width + width % 2
        half_h, half_w = height // 2, width // 2
        return [
            (self.head, height, width),
            (self.block1, height, width),
            (self.down, height, width),
            (self.block2, half_h, half_w),
            (self.up, half_h, half_w),
            (self.block3, height, width),
            (self.tail, height, width),
        ]

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {p.name: p.value.numpy() for p in self.parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Replace every parameter value; names and shapes must match exactly."""
        params = self.named_parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise StateError(
                "checkpoint parameters do not match the network",
                details={"missing": missing[:5], "unexpected": unexpected[:5]},
            )
        for name, parameter in params.items():
            value = np.asarray(state[name])
            if value.shape != parameter.shape:
                raise StateError(
                    f"shape mismatch for {name}",
                    details={"expected": list(parameter.shape), "got": list(value.shape)},
                )
            parameter.value = value.astype(self.dtype)

    def copy(
        self,
        dtype: Optional[np.dtype] = None,
        transform: Optional[Callable[[str, np.ndarray], np.ndarray]] = None,
    ) -> "MANet":
        """Same architecture and step counter; ``transform(name, value)`` rewrites each parameter."""
        twin = MANet(self.config, np.random.default_rng(0), self.dtype if dtype is None else dtype)
        state = self.state_dict()
        if transform is not None:
            state = {name: transform(name, value) for name, value in state.items()}
        twin.load_state_dict(state)
        twin.steps_trained = self.steps_trained
        return twin

    def positive_copy(self) -> "MANet":
        """
        Float64 twin whose weights and biases are all positive.

        Every weight becomes |w| divided by its fan-in, and the weights of
        the affine subnets are damped by ``AFFINE_DAMPING`` so β stays close
        to its bias. Activations then grow at most linearly with depth while
        each connection of the original keeps a nonzero weight.
        """

        def positive(name: str, value: np.ndarray) -> np.ndarray:
            magnitude = np.abs(value.astype(np.float64))
            if magnitude.ndim == 4:
                magnitude /= magnitude.size // magnitude.shape[0]
                if ".affine_" in name:
                    magnitude *= AFFINE_DAMPING
            return magnitude

        return self.copy(np.float64, positive)
