"""Pydantic configuration models for degradation, networks and training."""

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from kernel_estimation.utils.errors import InvalidArgumentError
from kernel_estimation.utils.helpers import parse_int_list

SUPPORTED_SCALES = (2, 3, 4)


class DegradationConfig(BaseModel):
    """Scale, noise and seed of one degradation."""
    scale: int = Field(default=4, description="Downsampling factor s")
    noise_level: float = Field(default=0.0, description="Gaussian noise standard deviation in 0-255 units")
    seed: int = Field(default=0, ge=0, description="Seed of the noise generator")

    @field_validator("scale")
    @classmethod
    def validate_scale(cls, v: int) -> int:
        if v not in SUPPORTED_SCALES:
            raise InvalidArgumentError(f"scale must be one of {SUPPORTED_SCALES}", argument="scale")
        return v

    @field_validator("noise_level")
    @classmethod
    def validate_noise(cls, v: float) -> float:
        if v < 0:
            raise InvalidArgumentError("noise level must be >= 0", argument="noise_level")
        return v


class MAConvConfig(BaseModel):
    """Channel counts and split number of one mutual affine convolution."""
    in_channels: int = Field(..., description="C_in")
    out_channels: int = Field(..., description="C_out")
    splits: int = Field(default=2, description="Number of channel splits S")

    @model_validator(mode="after")
    def validate_divisibility(self) -> "MAConvConfig":
        c_in, c_out, s = self.in_channels, self.out_channels, self.splits
        details = {"in_channels": c_in, "out_channels": c_out, "splits": s}
        if s < 2:
            raise InvalidArgumentError("MAConv needs at least 2 splits", argument="splits", details=details)
        if c_in % s or c_out % s:
            raise InvalidArgumentError("splits must divide both channel counts", argument="splits", details=details)
        if (c_in * (s - 1)) % (2 * s) or c_in * (s - 1) // (2 * s) < 1:
            raise InvalidArgumentError(
                "affine hidden width C_in(S-1)/(2S) must be a positive integer",
                argument="in_channels",
                details=details,
            )
        return self

    @property
    def split_in(self) -> int:
        return self.in_channels // self.splits

    @property
    def split_out(self) -> int:
        return self.out_channels // self.splits

    @property
    def complement_channels(self) -> int:
        return self.in_channels * (self.splits - 1) // self.splits

    @property
    def hidden_channels(self) -> int:
        return self.in_channels * (self.splits - 1) // (2 * self.splits)


class MANetConfig(BaseModel):
    """Architecture of the kernel estimator."""
    channels: List[int] = Field(default=[128, 256, 128], description="Residual block widths [c1, c2, c3]")
    splits: int = Field(default=2, description="MAConv split number S")
    kernel_size: int = Field(default=21, description="Side of the estimated kernels (h = w)")
    scale: int = Field(default=4, description="SR scale factor s")
    in_channels: int = Field(default=1, description="LR input channels (1 luminance, 3 RGB)")
    maconv_per_block: int = Field(default=2, ge=1, description="MAConv layers per residual block")

    @field_validator("channels", mode="before")
    @classmethod
    def parse_channels(cls, v: Any) -> List[int]:
        """Parse channels from a comma separated string or list."""
        return parse_int_list(v)

    @field_validator("scale")
    @classmethod
    def validate_scale(cls, v: int) -> int:
        if v < 1:
            raise InvalidArgumentError("scale must be >= 1", argument="scale")
        return v

    @field_validator("kernel_size")
    @classmethod
    def validate_kernel_size(cls, v: int) -> int:
        if v < 1 or v % 2 == 0:
            raise InvalidArgumentError("kernel_size must be a positive odd integer", argument="kernel_size")
        return v

    @field_validator("in_channels")
    @classmethod
    def validate_in_channels(cls, v: int) -> int:
        if v not in (1, 3):
            raise InvalidArgumentError("in_channels must be 1 or 3", argument="in_channels")
        return v

    @model_validator(mode="after")
    def validate_blocks(self) -> "MANetConfig":
        if len(self.channels) != 3:
            raise InvalidArgumentError("channels needs exactly three entries", argument="channels")
        c1, c2, c3 = self.channels
        if c1 != c3:
            raise InvalidArgumentError("first and last block widths must match", argument="channels")
        MAConvConfig(in_channels=c1, out_channels=c1, splits=self.splits)
        MAConvConfig(in_channels=c2, out_channels=c2, splits=self.splits)
        return self

    @property
    def kernel_taps(self) -> int:
        return self.kernel_size * self.kernel_size


class TrainConfig(BaseModel):
    """Desk-scale training run."""
    scale: int = Field(default=4, description="SR scale factor s")
    crop_size: int = Field(default=192, description="HR crop side")
    batch_size: int = Field(default=4, ge=1, description="Samples per step")
    steps: int = Field(default=1000, ge=1, description="Optimizer steps")
    lr: float = Field(default=1e-4, ge=0.0, description="Adam learning rate")
    lr_milestones: List[int] = Field(default_factory=list, description="Steps at which the learning rate halves")
    noise_max: float = Field(default=0.0, ge=0.0, description="Upper bound of the per-sample noise level (0-255)")
    seed: int = Field(default=0, ge=0, description="Run seed")
    checkpoint_every: int = Field(default=500, ge=1, description="Checkpoint cadence in steps")
    channels: List[int] = Field(default=[128, 256, 128], description="Residual block widths")
    splits: int = Field(default=2, description="MAConv split number")
    kernel_size: int = Field(default=21, description="Kernel side")
    in_channels: int = Field(default=1, description="LR input channels")
    maconv_per_block: int = Field(default=2, ge=1, description="MAConv layers per residual block")
    precision: int = Field(default=32, description="32 or 64")
    fixed_sigma1: Optional[float] = Field(default=None, description="Use one fixed kernel instead of random draws")
    fixed_sigma2: Optional[float] = Field(default=None, description="Second width of the fixed kernel")
    fixed_theta: Optional[float] = Field(default=None, description="Angle of the fixed kernel")
    augment: bool = Field(default=True, description="Random crop position and dihedral transform per sample")
    output_dir: Path = Field(default=Path("runs/train"), description="Directory for checkpoints and logs")

    @field_validator("channels", "lr_milestones", mode="before")
    @classmethod
    def parse_lists(cls, v: Any) -> List[int]:
        """Parse integer lists from comma separated strings."""
        return parse_int_list(v)

    @field_validator("precision")
    @classmethod
    def validate_precision(cls, v: int) -> int:
        if v not in (32, 64):
            raise InvalidArgumentError("precision must be 32 or 64", argument="precision")
        return v

    @model_validator(mode="after")
    def validate_crop(self) -> "TrainConfig":
        if self.crop_size < 1 or self.crop_size % (2 * self.scale):
            raise InvalidArgumentError(
                "crop size must be divisible by 2·scale",
                argument="crop_size",
                details={"crop_size": self.crop_size, "scale": self.scale},
            )
        fixed = [self.fixed_sigma1, self.fixed_sigma2, self.fixed_theta]
        if any(v is not None for v in fixed) and any(v is None for v in (self.fixed_sigma1, self.fixed_sigma2)):
            raise InvalidArgumentError("a fixed kernel needs both sigma1 and sigma2", argument="fixed_sigma1")
        return self

    def network_config(self) -> MANetConfig:
        """Architecture implied by this run."""
        return MANetConfig(
            channels=self.channels,
            splits=self.splits,
            kernel_size=self.kernel_size,
            scale=self.scale,
            in_channels=self.in_channels,
            maconv_per_block=self.maconv_per_block,
        )

    def to_key_values(self) -> Dict[str, str]:
        """Flatten into sidecar-ready strings."""
        values: Dict[str, str] = {}
        for key, value in self.model_dump().items():
            if value is None:
                continue
            if isinstance(value, list):
                values[key] = ",".join(str(v) for v in value)
            else:
                values[key] = str(value)
        return values


class DatasetSource(BaseModel):
    """Where HR training images come from."""
    kind: Literal["directory", "procedural"] = Field(default="procedural", description="Source type")
    directory: Optional[Path] = Field(default=None, description="Directory of PGM/PNG images")
    seed: int = Field(default=0, ge=0, description="Seed of the procedural generator")
    image_size: int = Field(default=192, ge=16, description="Side of procedural images")
    num_images: int = Field(default=64, ge=1, description="Number of procedural images per epoch")
    structure_density: float = Field(default=1.0, ge=0.0, description="Relative amount of edges, corners and polygons")

    @model_validator(mode="after")
    def validate_directory(self) -> "DatasetSource":
        if self.kind == "directory" and self.directory is None:
            raise InvalidArgumentError("directory source needs a directory", argument="directory")
        return self
