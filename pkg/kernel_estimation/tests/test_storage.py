"""Unit tests for containers, image files and sidecars."""

import struct

import numpy as np
import pytest

from kernel_estimation.degradation.image import Image
from kernel_estimation.storage import (
    list_images,
    read_checkpoint,
    read_image,
    read_sidecar,
    read_tensor,
    rgb_to_y,
    sidecar_path,
    write_checkpoint,
    write_image,
    write_sidecar,
    write_tensor,
)
from kernel_estimation.storage.containers import encode_tensor
from kernel_estimation.utils.errors import DatasetError, FormatError, InvalidArgumentError


@pytest.mark.unit
class TestTensorContainer:
    """Test MANT files."""

    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_roundtrip(self, tmp_path, rng, dtype):
        array = rng.standard_normal((3, 4, 5)).astype(dtype)
        path = write_tensor(tmp_path / "t.mant", array)
        loaded = read_tensor(path)
        assert loaded.dtype == dtype
        np.testing.assert_array_equal(loaded, array)

    def test_header_layout(self):
        encoded = encode_tensor(np.zeros((2, 3), dtype=np.float64))
        assert encoded[:4] == b"MANT"
        version, code, ndim = struct.unpack("<IBB", encoded[4:10])
        assert (version, code, ndim) == (1, 1, 2)
        assert struct.unpack("<2I", encoded[10:18]) == (2, 3)
        assert len(encoded) == 18 + 6 * 8

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "t.mant"
        path.write_bytes(encode_tensor(np.ones(4)) + b"\x00")
        with pytest.raises(FormatError):
            read_tensor(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.mant"
        path.write_bytes(encode_tensor(np.ones(4))[:-3])
        with pytest.raises(FormatError):
            read_tensor(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "t.mant"
        path.write_bytes(b"NOPE" + encode_tensor(np.ones(2))[4:])
        with pytest.raises(FormatError):
            read_tensor(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError):
            read_tensor(tmp_path / "absent.mant")

    def test_integer_rejected(self):
        with pytest.raises(InvalidArgumentError):
            encode_tensor(np.arange(4))


@pytest.mark.unit
class TestCheckpointContainer:
    """Test MANC files."""

    def test_order_and_values(self, tmp_path, rng):
        entries = {
            "param/b": rng.standard_normal(3),
            "param/a": rng.standard_normal((2, 2)),
            "meta/step": np.array([7.0]),
        }
        path = write_checkpoint(tmp_path / "c.manc", entries)
        loaded = read_checkpoint(path)
        assert list(loaded) == list(entries)
        for name, value in entries.items():
            np.testing.assert_array_equal(loaded[name], value)

    def test_no_temporary_left(self, tmp_path):
        write_checkpoint(tmp_path / "c.manc", {"x": np.zeros(1)})
        assert [p.name for p in tmp_path.iterdir()] == ["c.manc"]

    def test_trailing_bytes(self, tmp_path):
        path = write_checkpoint(tmp_path / "c.manc", {"x": np.zeros(1)})
        path.write_bytes(path.read_bytes() + b"junk")
        with pytest.raises(FormatError):
            read_checkpoint(path)

    def test_tensor_file_is_not_a_checkpoint(self, tmp_path):
        path = write_tensor(tmp_path / "t.mant", np.zeros(2))
        with pytest.raises(FormatError):
            read_checkpoint(path)


@pytest.mark.unit
class TestImages:
    """Test PGM/PNG input and output."""

    def test_pgm_roundtrip_is_quantized(self, tmp_path, rng):
        data = rng.uniform(size=(1, 6, 7))
        path = write_image(tmp_path / "img.pgm", Image(data))
        assert path.read_bytes()[:2] == b"P5"
        loaded = read_image(path)
        assert loaded.extent == (6, 7)
        np.testing.assert_allclose(loaded.data, np.round(data * 255) / 255, atol=1e-12)

    def test_values_clamped_on_export(self, tmp_path):
        path = write_image(tmp_path / "img.png", np.array([[-0.5, 1.5]]))
        np.testing.assert_array_equal(read_image(path).data[0], [[0.0, 1.0]])

    def test_rgb_png(self, tmp_path, rng):
        data = rng.uniform(size=(3, 4, 4))
        path = write_image(tmp_path / "rgb.png", Image(data))
        assert read_image(path).channels == 3
        assert read_image(path, luminance=True).channels == 1

    def test_rgb_pgm_rejected(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            write_image(tmp_path / "rgb.pgm", np.zeros((3, 4, 4)))

    def test_unreadable(self, tmp_path):
        path = tmp_path / "broken.png"
        path.write_bytes(b"not an image")
        with pytest.raises(FormatError):
            read_image(path)

    def test_luma_of_white(self):
        y = rgb_to_y(np.ones((3, 2, 2)))
        np.testing.assert_allclose(y, 235.0 / 255.0)

    def test_list_images(self, tmp_path):
        for name in ("b.png", "a.pgm", "notes.txt"):
            (tmp_path / name).write_bytes(b"")
        assert [p.name for p in list_images(tmp_path)] == ["a.pgm", "b.png"]

    def test_empty_directory(self, tmp_path):
        with pytest.raises(DatasetError):
            list_images(tmp_path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DatasetError):
            list_images(tmp_path / "absent")


@pytest.mark.unit
class TestSidecar:
    """Test resolved-configuration sidecars."""

    def test_roundtrip(self, tmp_path):
        artifact = tmp_path / "out.pgm"
        write_sidecar(artifact, {"scale": 4, "channels": [8, 16, 8], "lr": 0.0001, "skip": None},
                      comment="degrade")
        assert sidecar_path(artifact).name == "out.pgm.cfg"
        values = read_sidecar(artifact)
        assert values == {"channels": "8,16,8", "lr": "0.0001", "scale": "4"}

    def test_sorted_keys(self, tmp_path):
        path = write_sidecar(tmp_path / "a", {"z": 1, "a": 2})
        assert path.read_text().splitlines() == ["a=2", "z=1"]
