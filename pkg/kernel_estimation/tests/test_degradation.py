"""Unit tests for kernels, fields, blur and fidelity metrics."""

import math

import numpy as np
import pytest

from kernel_estimation.degradation import (
    Image,
    Kernel,
    KernelField,
    KernelMap,
    KernelParams,
    add_noise,
    blur_invariant,
    blur_variant,
    blur_with_kernel_map,
    decimate,
    degrade,
    eval_kernel_grid,
    field_formula,
    kernel_map,
    lr_fidelity,
    make_checkerboard_field,
    make_kernel_field,
    psnr,
    sample_training_params,
    ssim,
    synth_kernel,
)
from kernel_estimation.degradation.kernels import second_moment_direction
from kernel_estimation.degradation.metrics import border_crop
from kernel_estimation.models.configs import DegradationConfig
from kernel_estimation.utils.errors import DimensionError, InvalidArgumentError


def loop_blur(channel, taps):
    """Per-pixel true convolution over a reflect-padded image."""
    size = taps.shape[0]
    pad = size // 2
    padded = np.pad(channel, pad, mode="reflect")
    out = np.zeros_like(channel)
    for r in range(channel.shape[0]):
        for c in range(channel.shape[1]):
            total = 0.0
            for u in range(size):
                for v in range(size):
                    total += taps[u, v] * padded[r + 2 * pad - u, c + 2 * pad - v]
            out[r, c] = total
    return out


@pytest.mark.unit
class TestKernels:
    """Test Gaussian kernel synthesis."""

    def test_isotropic_kernel_ignores_theta(self):
        base = synth_kernel(KernelParams(sigma1=1.0, sigma2=1.0, theta=0.0)).taps
        for theta in (0.3, 1.1, 2.9):
            other = synth_kernel(KernelParams(sigma1=1.0, sigma2=1.0, theta=theta)).taps
            np.testing.assert_allclose(other, base, atol=1e-15)
        np.testing.assert_allclose(np.rot90(base), base, atol=1e-15)

    def test_random_kernels_are_valid(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            params = sample_training_params(rng, 4)
            taps = synth_kernel(params).taps
            assert taps.min() >= 0.0
            assert abs(taps.sum() - 1.0) < 1e-12
            np.testing.assert_allclose(taps, taps[::-1, ::-1], atol=1e-9)
            swapped = synth_kernel(KernelParams(sigma1=params.sigma2, sigma2=params.sigma1,
                                                theta=params.theta + math.pi / 2)).taps
            np.testing.assert_allclose(swapped, taps, atol=1e-12)

    def test_diagonal_kernel_direction(self):
        kernel = synth_kernel(KernelParams(sigma1=6.0, sigma2=1.0, theta=math.pi / 4))
        assert abs(math.degrees(second_moment_direction(kernel)) - 45.0) < 1.0

    def test_theta_normalized(self):
        assert KernelParams(sigma1=2.0, sigma2=1.0, theta=math.pi).theta == 0.0
        assert KernelParams(sigma1=2.0, sigma2=1.0, theta=-math.pi / 4).theta == pytest.approx(3 * math.pi / 4)

    @pytest.mark.parametrize("sigma1,sigma2", [(0.0, 1.0), (1.0, -2.0), (float("nan"), 1.0)])
    def test_non_positive_width_rejected(self, sigma1, sigma2):
        with pytest.raises(InvalidArgumentError):
            KernelParams(sigma1=sigma1, sigma2=sigma2)

    def test_even_size_rejected(self):
        with pytest.raises(InvalidArgumentError):
            synth_kernel(KernelParams(sigma1=1.0, sigma2=1.0), size=20)

    def test_flat_roundtrip_and_delta(self):
        kernel = Kernel.delta(5)
        assert Kernel.from_flat(kernel.flatten()).taps[2, 2] == 1.0
        with pytest.raises(InvalidArgumentError):
            Kernel.from_flat(np.ones(10))


@pytest.mark.unit
class TestSampling:
    """Test training-kernel sampling."""

    def test_ranges(self):
        rng = np.random.default_rng(1)
        for _ in range(2000):
            params = sample_training_params(rng, 4)
            assert 0.7 <= params.sigma1 <= 10.0
            assert 0.7 <= params.sigma2 <= 10.0
            assert 0.0 <= params.theta < math.pi

    def test_deterministic(self):
        first = [sample_training_params(np.random.default_rng(9), 3) for _ in range(3)]
        second = [sample_training_params(np.random.default_rng(9), 3) for _ in range(3)]
        assert first == second

    def test_mean_width(self):
        rng = np.random.default_rng(2)
        widths = [sample_training_params(rng, 4).sigma1 for _ in range(100_000)]
        expected = (0.175 * 4 + 2.5 * 4) / 2
        assert abs(np.mean(widths) - expected) / expected < 0.01


@pytest.mark.unit
class TestEvalGrid:
    """Test the evaluation kernel grid."""

    @pytest.mark.parametrize("scale", [2, 3, 4])
    def test_nine_distinct_kernels(self, scale):
        grid = eval_kernel_grid(scale)
        assert len(grid) == 9
        kernels = [synth_kernel(p).taps for p in grid]
        for i in range(9):
            for j in range(i + 1, 9):
                assert np.abs(kernels[i] - kernels[j]).max() > 1e-6

    def test_scale_four_composition(self):
        grid = eval_kernel_grid(4)
        assert sum(p.is_isotropic for p in grid) == 3
        assert {p.sigma1 for p in grid} | {p.sigma2 for p in grid} == {1.0, 5.0, 9.0}
        assert all(p.theta == pytest.approx(math.pi / 4) for p in grid[6:])

    def test_scale_two_widths(self):
        widths = {w for p in eval_kernel_grid(2) for w in (p.sigma1, p.sigma2)}
        assert widths == {1.0, 3.0, 5.0}

    def test_unsupported_scale(self):
        with pytest.raises(InvalidArgumentError):
            eval_kernel_grid(5)


@pytest.mark.unit
class TestFields:
    """Test kernel fields."""

    def test_type_one_formula(self):
        field = make_kernel_field(1, 160, 200, patch_size=40, scale=4)
        assert field.grid_shape == (4, 5)
        a, b = 2.325 * 4, 0.175 * 4
        for row in field.params:
            assert all(p.sigma1 == pytest.approx(a + b) for p in row)
            sigma2 = [p.sigma2 for p in row]
            assert sigma2 == sorted(sigma2)
            assert sigma2[0] == pytest.approx(b)

    def test_type_three_period(self):
        left = synth_kernel(field_formula(3, 0.0, 0.5, 4)).taps
        right = synth_kernel(field_formula(3, 1.0, 0.5, 4)).taps
        np.testing.assert_allclose(left, right, atol=1e-12)

    def test_type_two_uses_rows(self):
        field = make_kernel_field(2, 80, 80, patch_size=40, scale=2)
        assert field.params[0][0].sigma1 < field.params[1][0].sigma1

    def test_type_five_reproducible(self):
        first = make_kernel_field(5, 120, 120, rng=np.random.default_rng(4))
        second = make_kernel_field(5, 120, 120, rng=np.random.default_rng(4))
        assert first.params == second.params
        b, top = 0.175 * 4, 2.5 * 4
        assert all(b <= p.sigma1 <= top for p in first.flat_params())

    def test_unknown_type(self):
        with pytest.raises(InvalidArgumentError):
            make_kernel_field(7, 40, 40)

    def test_checkerboard_alternates(self):
        field = make_checkerboard_field(160, 160, scale=2)
        assert field.grid_shape == (2, 2)
        assert field.params[0][0] == field.params[1][1]
        assert field.params[0][0].theta != field.params[0][1].theta

    def test_constant_field(self):
        params = KernelParams(sigma1=2.0, sigma2=1.0, theta=0.5)
        field = KernelField.constant(params, 90, 50, patch_size=40)
        assert field.grid_shape == (3, 2)
        assert field.is_constant()
        assert field.params_at(89, 49) == params

    def test_grid_mismatch(self):
        params = KernelParams(sigma1=1.0, sigma2=1.0)
        with pytest.raises(DimensionError):
            KernelField(80, 80, 40, [[params]], 0, 4)

    def test_kernel_map_shape(self):
        field = make_kernel_field(3, 48, 48, patch_size=24, scale=2)
        values = kernel_map(field, 7)
        assert values.shape == (49, 48, 48)
        np.testing.assert_allclose(values.sum(axis=0), 1.0, atol=1e-12)


@pytest.mark.unit
class TestBlur:
    """Test blur operators against loop oracles."""

    def test_delta_is_identity(self, random_hr):
        out = blur_invariant(random_hr, Kernel.delta(21))
        np.testing.assert_allclose(out.data, random_hr.data, atol=1e-15)

    def test_constant_image_preserved(self):
        img = Image(np.full((1, 32, 32), 0.37))
        kernel = synth_kernel(KernelParams(sigma1=3.0, sigma2=1.0, theta=0.4))
        np.testing.assert_allclose(blur_invariant(img, kernel).data, 0.37, atol=1e-12)
        field = make_kernel_field(4, 32, 32, patch_size=16, scale=2)
        np.testing.assert_allclose(blur_variant(img, field, 7).data, 0.37, atol=1e-12)

    def test_invariant_matches_loop(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            img = Image(rng.uniform(size=(1, 16, 16)))
            params = KernelParams(sigma1=rng.uniform(0.5, 3), sigma2=rng.uniform(0.5, 3),
                                  theta=rng.uniform(0, math.pi))
            kernel = synth_kernel(params, size=7)
            expected = loop_blur(img.data[0], kernel.taps)
            np.testing.assert_allclose(blur_invariant(img, kernel).data[0], expected, atol=1e-10)

    def test_variant_equals_invariant_on_constant_field(self):
        rng = np.random.default_rng(6)
        params = KernelParams(sigma1=2.5, sigma2=0.8, theta=1.0)
        for _ in range(5):
            img = Image(rng.uniform(size=(1, 40, 40)))
            field = KernelField.constant(params, 40, 40, patch_size=16)
            variant = blur_variant(img, field, 9)
            invariant = blur_invariant(img, synth_kernel(params, 9))
            np.testing.assert_allclose(variant.data, invariant.data, atol=1e-10)

    def test_two_patch_field_matches_loop(self):
        rng = np.random.default_rng(8)
        img = Image(rng.uniform(size=(1, 16, 16)))
        left = KernelParams(sigma1=2.0, sigma2=0.5, theta=0.0)
        right = KernelParams(sigma1=0.7, sigma2=1.9, theta=2.0)
        field = KernelField(16, 16, 8, [[left, right], [left, right]], 0, 2)
        out = blur_variant(img, field, 5).data[0]
        left_full = loop_blur(img.data[0], synth_kernel(left, 5).taps)
        right_full = loop_blur(img.data[0], synth_kernel(right, 5).taps)
        np.testing.assert_allclose(out[:, :8], left_full[:, :8], atol=1e-10)
        np.testing.assert_allclose(out[:, 8:], right_full[:, 8:], atol=1e-10)

    def test_kernel_map_blur_matches_field_blur(self):
        rng = np.random.default_rng(9)
        img = Image(rng.uniform(size=(1, 24, 24)))
        field = make_kernel_field(4, 24, 24, patch_size=8, scale=2)
        expected = blur_variant(img, field, 7)
        out = blur_with_kernel_map(img, KernelMap(kernel_map(field, 7)))
        np.testing.assert_allclose(out.data, expected.data, atol=1e-10)

    def test_extent_mismatch(self, random_hr):
        field = make_kernel_field(1, 40, 48, scale=4)
        with pytest.raises(DimensionError):
            blur_variant(random_hr, field)

    def test_kernel_larger_than_image(self):
        img = Image(np.zeros((1, 10, 10)))
        with pytest.raises(InvalidArgumentError):
            blur_invariant(img, Kernel.delta(21))


@pytest.mark.unit
class TestDegrade:
    """Test decimation, noise and the full degradation."""

    def test_decimate_keeps_block_origin(self):
        data = np.arange(64, dtype=np.float64).reshape(1, 8, 8)
        lr = decimate(Image(data), 4)
        np.testing.assert_array_equal(lr.data[0], [[0.0, 4.0], [32.0, 36.0]])
        assert lr.role == "lr" and lr.scale == 4

    def test_decimate_indivisible(self):
        with pytest.raises(InvalidArgumentError):
            decimate(Image(np.zeros((1, 10, 10))), 4)

    def test_zero_noise_is_identity(self, random_hr):
        rng = np.random.default_rng(0)
        out = add_noise(random_hr, 0.0, rng)
        np.testing.assert_array_equal(out.data, random_hr.data)

    def test_noise_level(self):
        img = Image(np.zeros((1, 200, 200)))
        out = add_noise(img, 15.0, np.random.default_rng(0))
        assert out.data.std() == pytest.approx(15.0 / 255.0, rel=0.02)

    def test_shapes(self):
        img = Image(np.random.default_rng(1).uniform(size=(1, 192, 192)))
        field = make_kernel_field(2, 192, 192, scale=4)
        lr, gt = degrade(img, field, DegradationConfig(scale=4))
        assert lr.extent == (48, 48)
        assert gt.shape == (441, 192, 192)

    def test_reproducible(self, random_hr):
        field = make_kernel_field(3, 48, 48, patch_size=16, scale=2)
        cfg = DegradationConfig(scale=2, noise_level=5.0, seed=3)
        first, _ = degrade(random_hr, field, cfg, 7)
        second, _ = degrade(random_hr, field, cfg, 7)
        np.testing.assert_array_equal(first.data, second.data)


@pytest.mark.unit
class TestMetrics:
    """Test PSNR, SSIM and LR-reconstruction fidelity."""

    def test_identical_images(self, random_hr):
        assert psnr(random_hr, random_hr) == 100.0
        assert ssim(random_hr, random_hr) == pytest.approx(1.0)

    def test_constant_offset_is_twenty_db(self):
        a = Image(np.full((1, 16, 16), 0.2))
        b = Image(np.full((1, 16, 16), 0.3))
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    def test_extent_mismatch(self):
        with pytest.raises(DimensionError):
            psnr(Image(np.zeros((1, 8, 8))), Image(np.zeros((1, 8, 9))))

    def test_ssim_matches_reference(self):
        metrics = pytest.importorskip("skimage.metrics")
        rng = np.random.default_rng(4)
        a = rng.uniform(size=(40, 40))
        b = np.clip(a + rng.normal(0, 0.1, size=a.shape), 0, 1)
        reference = metrics.structural_similarity(
            a, b, data_range=1.0, gaussian_weights=True, sigma=1.5, use_sample_covariance=False
        )
        ours = ssim(Image(a[None]), Image(b[None]))
        assert ours == pytest.approx(reference, abs=1e-6)

    def test_border_crop(self):
        assert border_crop(4) == 3
        assert border_crop(2) == 6
        assert border_crop(3) == 4

    def test_ground_truth_map_reaches_cap(self, structured_hr):
        field = make_kernel_field(3, 96, 96, patch_size=24, scale=4)
        lr, gt = degrade(structured_hr, field, DegradationConfig(scale=4))
        score, similarity = lr_fidelity(structured_hr, lr, KernelMap(gt), 4)
        assert score == 100.0
        assert similarity == pytest.approx(1.0)

    def test_uniform_map_scores_lower(self, structured_hr):
        field = make_kernel_field(1, 96, 96, patch_size=24, scale=4)
        lr, gt = degrade(structured_hr, field, DegradationConfig(scale=4))
        uniform = KernelMap.from_kernel(Kernel.uniform(21).taps, 96, 96)
        assert lr_fidelity(structured_hr, lr, uniform, 4)[0] < lr_fidelity(structured_hr, lr, KernelMap(gt), 4)[0]

    def test_fidelity_extent_mismatch(self, structured_hr):
        lr = decimate(structured_hr, 4)
        with pytest.raises(DimensionError):
            lr_fidelity(structured_hr, lr, KernelMap.from_kernel(Kernel.delta(21).taps, 48, 48), 4)
