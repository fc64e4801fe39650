"""Pytest configuration and fixtures."""

import numpy as np
import pytest

from kernel_estimation.config import Settings
from kernel_estimation.degradation.image import Image
from kernel_estimation.models.configs import DatasetSource, MANetConfig, TrainConfig
from kernel_estimation.network.manet import MANet
from kernel_estimation.training.data import procedural_image


@pytest.fixture
def test_settings(tmp_path):
    """Settings for testing."""
    return Settings(
        log_level="WARNING",
        json_logs=False,
        precision=64,
        default_seed=0,
        kernel_size=21,
        output_dir=tmp_path / "runs",
    )


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    """Smallest architecture used across network tests."""
    return MANetConfig(channels=[8, 16, 8], splits=2, kernel_size=21, scale=4)


@pytest.fixture
def small_kernel_config():
    """Tiny architecture with 5×5 kernels for fast forward passes."""
    return MANetConfig(channels=[8, 16, 8], splits=2, kernel_size=5, scale=2)


@pytest.fixture
def tiny_net(tiny_config):
    """64-bit tiny network with fixed weights."""
    return MANet(tiny_config, np.random.default_rng(7), np.float64)


@pytest.fixture
def structured_hr():
    """96×96 procedural HR image with edges and corners."""
    return Image(procedural_image(96, np.random.default_rng(3))[None])


@pytest.fixture
def random_hr(rng):
    """48×48 uniform-noise HR image."""
    return Image(rng.uniform(0.0, 1.0, size=(1, 48, 48)))


@pytest.fixture
def procedural_source():
    """Small procedural dataset."""
    return DatasetSource(kind="procedural", seed=5, image_size=48, num_images=4)


@pytest.fixture
def tiny_train_config(tmp_path):
    """Few-step training run at 64-bit precision."""
    return TrainConfig(
        scale=2,
        crop_size=16,
        batch_size=2,
        steps=4,
        lr=1e-3,
        seed=11,
        checkpoint_every=2,
        channels=[4, 8, 4],
        splits=2,
        kernel_size=5,
        precision=64,
        output_dir=tmp_path / "run",
    )
