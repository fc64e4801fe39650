"""Unit tests for settings, run-config files and visualization helpers."""

import numpy as np
import pytest

from kernel_estimation.config import Settings, load_key_value_file, resolve_dtype
from kernel_estimation.degradation.image import Image, KernelMap
from kernel_estimation.services.visualization import kernel_montage, render_kernel, sample_sites
from kernel_estimation.utils.errors import ConfigurationError, DimensionError, InvalidArgumentError


@pytest.mark.unit
class TestSettings:
    """Test environment-driven settings."""

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("KERNEL_EST_PRECISION", raising=False)
        monkeypatch.delenv("KERNEL_EST_KERNEL_SIZE", raising=False)
        settings = Settings(_env_file=None)
        assert settings.precision == 32
        assert settings.kernel_size == 21
        assert settings.dtype == np.float32

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("KERNEL_EST_PRECISION", "64")
        assert Settings(_env_file=None).dtype == np.float64

    def test_invalid_precision(self):
        with pytest.raises(ConfigurationError):
            Settings(_env_file=None, precision=16)

    def test_even_kernel_size(self):
        with pytest.raises(ConfigurationError):
            Settings(_env_file=None, kernel_size=20)

    def test_resolve_dtype(self):
        assert resolve_dtype(64) == np.float64
        with pytest.raises(ConfigurationError):
            resolve_dtype(8)


@pytest.mark.unit
class TestKeyValueFile:
    """Test plain-text run configurations."""

    def test_comments_and_key_normalization(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\nCrop-Size=64\nchannels=8,16,8\n")
        assert load_key_value_file(path) == {"crop_size": "64", "channels": "8,16,8"}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc_info:
            load_key_value_file(tmp_path / "absent.cfg")
        assert exc_info.value.exit_code == 2


@pytest.mark.unit
class TestRendering:
    """Test kernel renderings and montages."""

    def test_peak_maps_to_one(self):
        taps = np.array([[0.0, 0.1, 0.0], [0.1, 0.6, 0.1], [0.0, 0.1, 0.0]])
        rendered = render_kernel(taps)
        assert rendered.max() == 1.0
        assert rendered[0, 1] == pytest.approx(1.0 / 6.0)

    def test_magnify(self):
        rendered = render_kernel(np.eye(3).ravel(), magnify=2)
        assert rendered.shape == (6, 6)
        np.testing.assert_array_equal(rendered[:2, :2], 1.0)

    def test_non_square_flat_kernel(self):
        with pytest.raises(DimensionError):
            render_kernel(np.ones(8))

    def test_bad_magnification(self):
        with pytest.raises(InvalidArgumentError):
            render_kernel(np.ones((3, 3)), magnify=0)

    def test_sample_sites(self):
        assert sample_sites(32, 32, 10) == [(r, c) for r in (5, 15, 25) for c in (5, 15, 25)]
        assert sample_sites(32, 32, 10, margin=6) == [(r, c) for r in (11, 21) for c in (11, 21)]

    def test_montage_pastes_framed_kernels(self):
        delta = np.zeros((25, 32, 32))
        delta[12] = 1.0
        montage, sites = kernel_montage(Image(np.zeros((1, 8, 8))), KernelMap(delta), scale=4, spacing=10)
        assert montage.shape == (32, 32)
        assert len(sites) == 9
        assert montage[15, 15] == 1.0
        assert montage[13, 13] == 0.0
        assert montage[12, 12] == 1.0

    def test_montage_extent_mismatch(self):
        with pytest.raises(DimensionError):
            kernel_montage(Image(np.zeros((1, 8, 8))), KernelMap(np.zeros((25, 16, 16))), scale=4)
