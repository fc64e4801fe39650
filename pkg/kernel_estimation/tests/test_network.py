"""Unit tests for MAConv, MANet, cost accounting and receptive fields."""

import numpy as np
import pytest

from kernel_estimation.degradation.image import Image
from kernel_estimation.degradation.kernels import KernelParams, synth_kernel
from kernel_estimation.models.configs import MAConvConfig, MANetConfig
from kernel_estimation.network import (
    MAConv,
    MANet,
    count_flops,
    count_params,
    maconv_closed_form_flops,
    maconv_mac_formula,
    maconv_param_formula,
    min_patch_probe,
    receptive_field_analytic,
    receptive_field_probe,
)
from kernel_estimation.network.costs import plain_conv_params
from kernel_estimation.network.probes import cross_image, flat_patch_kernel, kernel_anisotropy
from kernel_estimation.network.receptive_field import receptive_field_support
from kernel_estimation.tensor import Tensor, conv2d, count_macs, grad_check_parameters, mul, sum_all
from kernel_estimation.training.loss import kernel_loss
from kernel_estimation.utils.errors import DimensionError, InvalidArgumentError, StateError


def maconv(channels, splits, rng=None):
    config = MAConvConfig(in_channels=channels, out_channels=channels, splits=splits)
    return MAConv("probe", config, rng or np.random.default_rng(0), dtype=np.float64)


@pytest.mark.unit
class TestMAConvConfig:
    """Test split validation."""

    def test_indivisible_channels(self):
        with pytest.raises(InvalidArgumentError):
            MAConvConfig(in_channels=10, out_channels=10, splits=4)

    def test_single_split(self):
        with pytest.raises(InvalidArgumentError):
            MAConvConfig(in_channels=8, out_channels=8, splits=1)

    def test_hidden_width(self):
        config = MAConvConfig(in_channels=128, out_channels=128, splits=4)
        assert config.complement_channels == 96
        assert config.hidden_channels == 48


@pytest.mark.unit
class TestMAConv:
    """Test the mutual affine convolution."""

    def test_identity_affine_is_grouped_conv(self, rng):
        layer = maconv(8, 2)
        layer.set_identity_affine()
        x = rng.standard_normal((2, 8, 6, 6))
        out = layer(Tensor(x)).data
        expected = conv2d(Tensor(x), Tensor(layer.grouped_weight()), Tensor(layer.grouped_bias()), pad=1).data
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_complement_indices(self):
        layer = maconv(8, 4)
        assert layer.complement_indices(2) == [0, 1, 2, 3, 6, 7]
        assert maconv(8, 2).complement_indices(0) == [4, 5, 6, 7]

    def test_affine_uses_only_local_context(self, rng):
        layer = maconv(8, 2)
        x = rng.standard_normal((1, 8, 9, 9))
        bumped = x.copy()
        bumped[0, 5, 4, 4] += 1.0
        diff = np.abs(layer(Tensor(bumped)).data - layer(Tensor(x)).data).sum(axis=1)[0]
        changed = np.argwhere(diff > 0)
        assert changed.min(axis=0).tolist() == [3, 3]
        assert changed.max(axis=0).tolist() == [5, 5]

    def test_complement_drives_other_split(self, rng):
        layer = maconv(8, 2)
        x = rng.standard_normal((1, 8, 5, 5))
        bumped = x.copy()
        bumped[0, 6] += 0.5
        diff = np.abs(layer(Tensor(bumped)).data - layer(Tensor(x)).data)
        assert diff[0, :4].max() > 0

    def test_channel_mismatch(self, rng):
        with pytest.raises(DimensionError):
            maconv(8, 2)(Tensor(rng.standard_normal((1, 6, 4, 4))))

    def test_affine_bias_initial_values(self):
        branch = maconv(8, 2).branches[0]
        bias = branch.affine_out.bias.value.data
        np.testing.assert_array_equal(bias, [1, 1, 1, 1, 0, 0, 0, 0])


@pytest.mark.unit
class TestMANet:
    """Test the estimator forward pass."""

    def test_output_shape_and_probabilities(self, tiny_net, rng):
        out = tiny_net(Tensor(rng.uniform(size=(2, 1, 8, 8)))).data
        assert out.shape == (2, 441, 32, 32)
        assert out.min() >= 0.0
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)

    def test_sites_share_their_lr_kernel(self, tiny_net, rng):
        out = tiny_net(Tensor(rng.uniform(size=(1, 1, 8, 8)))).data
        np.testing.assert_array_equal(out[0, :, 4, 4], out[0, :, 7, 7])

    def test_flat_input_gives_equal_interior_kernels(self, tiny_config):
        net = MANet(tiny_config, np.random.default_rng(2), np.float64)
        logits = net.forward_logits(Tensor(np.full((1, 1, 48, 48), 0.5))).data[0]
        interior = logits[:, 12:36:2, 12:36:2]
        np.testing.assert_allclose(interior, interior[:, :1, :1] * np.ones_like(interior), atol=1e-10)

    def test_odd_extent_covers_hr_grid(self, tiny_net, rng):
        kmap = tiny_net.estimate(Image(rng.uniform(size=(1, 15, 15))))
        assert kmap.values.shape == (441, 60, 60)
        np.testing.assert_allclose(kmap.values.sum(axis=0), 1.0, atol=1e-12)

    def test_odd_extent_matches_padded_input(self, tiny_net, rng):
        x = rng.uniform(size=(1, 1, 7, 9))
        padded = np.pad(x, ((0, 0), (0, 0), (0, 1), (0, 1)), mode="edge")
        logits = tiny_net.forward_logits(Tensor(x)).data
        assert logits.shape == (1, 441, 7, 9)
        np.testing.assert_array_equal(logits, tiny_net.forward_logits(Tensor(padded)).data[:, :, :7, :9])

    def test_channel_mismatch(self, tiny_net):
        with pytest.raises(DimensionError):
            tiny_net(Tensor(np.zeros((1, 3, 8, 8))))

    def test_rgb_input(self, rng):
        config = MANetConfig(channels=[4, 8, 4], splits=2, kernel_size=5, scale=2, in_channels=3)
        net = MANet(config, np.random.default_rng(1), np.float64)
        assert net(Tensor(rng.uniform(size=(1, 3, 4, 4)))).shape == (1, 25, 8, 8)

    def test_state_roundtrip(self, tiny_config, tiny_net):
        twin = MANet(tiny_config, np.random.default_rng(99), np.float64)
        twin.load_state_dict(tiny_net.state_dict())
        x = Tensor(np.random.default_rng(0).uniform(size=(1, 1, 8, 8)))
        np.testing.assert_array_equal(twin(x).data, tiny_net(x).data)

    def test_state_mismatch(self, tiny_net):
        state = tiny_net.state_dict()
        state.pop("head.weight")
        with pytest.raises(StateError):
            tiny_net.load_state_dict(state)

    def test_positive_copy(self, tiny_net):
        twin = tiny_net.positive_copy()
        assert all((value >= 0).all() for value in twin.state_dict().values())

    def test_positive_copy_is_float64_and_bounded(self, tiny_config):
        net = MANet(tiny_config, np.random.default_rng(7), np.float32)
        twin = net.positive_copy()
        assert twin.dtype == np.float64
        assert net.dtype == np.float32
        out = twin.forward_logits(Tensor(np.ones((1, 1, 32, 32)))).data
        assert np.isfinite(out).all()
        assert out.max() < 1e3

    def test_copy_applies_transform(self, tiny_net):
        twin = tiny_net.copy(np.float32, lambda name, value: value * 2.0)
        assert twin.dtype == np.float32
        np.testing.assert_allclose(twin.state_dict()["head.weight"], 2.0 * tiny_net.state_dict()["head.weight"],
                                   rtol=1e-6)

    def test_invalid_block_widths(self):
        with pytest.raises(InvalidArgumentError):
            MANetConfig(channels=[8, 16, 4])

    def test_parameter_gradients(self):
        config = MANetConfig(channels=[4, 8, 4], splits=2, kernel_size=5, scale=2)
        net = MANet(config, np.random.default_rng(3), np.float64)
        data_rng = np.random.default_rng(4)
        x = Tensor(data_rng.uniform(size=(1, 1, 4, 4)))
        target = Tensor(data_rng.standard_normal((1, 25, 8, 8)))
        params = net.named_parameters()
        chosen = [params["head.weight"], params["tail.weight"],
                  params["block2.maconv0.split1.affine_hidden.weight"], params["up.weight"]]

        def loss():
            return sum_all(mul(net(x), target))

        error = grad_check_parameters(loss, chosen, eps=1e-7, max_checks=4, seed=0)
        assert error < 1e-4

    def test_all_parameter_gradients_under_kernel_loss(self, tiny_config):
        net = MANet(tiny_config, np.random.default_rng(3), np.float64)
        data_rng = np.random.default_rng(4)
        x = Tensor(data_rng.uniform(size=(1, 1, 4, 4)))
        target = data_rng.uniform(size=(1, 441, 16, 16))
        target = Tensor(target / target.sum(axis=1, keepdims=True))

        def loss():
            return kernel_loss(net(x), target)

        error = grad_check_parameters(loss, net.parameters(), eps=1e-6, max_checks=2, seed=0, floor=1e-5)
        assert error < 1e-4


@pytest.mark.unit
class TestCosts:
    """Test parameter and FLOP accounting."""

    def test_reference_layer_counts(self):
        assert plain_conv_params(128, 128) == 147456
        assert count_params(maconv(128, 2)).parameters == 86016
        assert count_params(maconv(128, 4)).parameters == 67584

    @pytest.mark.parametrize("channels,splits", [(16, 2), (32, 2), (16, 4), (64, 4), (36, 6), (72, 6), (144, 6)])
    def test_formula_matches_enumeration(self, channels, splits):
        layer = maconv(channels, splits)
        assert count_params(layer).parameters == maconv_param_formula(channels, channels, splits)
        flops = count_flops(layer, 10, 12).flops
        assert flops == maconv_mac_formula(channels, channels, splits, 10, 12)

    def test_closed_form_flops(self):
        assert maconv_closed_form_flops(128, 128, 2, 1, 1) == 81920
        assert maconv_closed_form_flops(128, 128, 4, 1, 1) == 43008
        assert maconv_closed_form_flops(16, 16, 2, 10, 12) == 120 * maconv_closed_form_flops(16, 16, 2, 1, 1)
        assert maconv_mac_formula(128, 128, 2, 1, 1) == 86016

    def test_bias_counted_on_request(self):
        layer = maconv(16, 2)
        with_bias = count_params(layer, include_bias=True).parameters
        assert with_bias > count_params(layer).parameters

    def test_flops_match_executed_macs(self, tiny_net, rng):
        with count_macs() as counter:
            tiny_net(Tensor(rng.uniform(size=(1, 1, 8, 8))))
        assert counter.total == count_flops(tiny_net, 8, 8).flops

    def test_flops_match_executed_macs_at_odd_extent(self, tiny_net, rng):
        with count_macs() as counter:
            tiny_net(Tensor(rng.uniform(size=(1, 1, 7, 9))))
        assert counter.total == count_flops(tiny_net, 7, 9).flops

    def test_layer_sum(self, tiny_net):
        report = count_flops(tiny_net, 16, 16)
        assert report.flops == sum(layer.flops for layer in report.layers)
        assert report.extent == (16, 16)
        assert {layer.kind for layer in report.layers} == {"conv2d", "conv_transpose2d"}


@pytest.mark.unit
class TestReceptiveField:
    """Test analytic and probed receptive fields."""

    def test_default_architecture(self):
        assert receptive_field_analytic(MANetConfig()) == (22, 22)

    def test_deeper_blocks(self):
        assert receptive_field_analytic(MANetConfig(maconv_per_block=4)) == (38, 38)

    def test_probe_matches_analytic(self, tiny_net):
        probe = receptive_field_probe(tiny_net, extent=32)
        assert probe.contained
        assert not probe.low_coverage
        assert (probe.height, probe.width) == (22, 22)

    def test_probe_on_float32_network(self, tiny_config):
        net = MANet(tiny_config, np.random.default_rng(7), np.float32)
        probe = receptive_field_probe(net, extent=32)
        assert (probe.height, probe.width) == (22, 22)
        assert not probe.low_coverage

    def test_probe_deeper_blocks(self):
        config = MANetConfig(channels=[4, 8, 4], splits=2, kernel_size=5, scale=2, maconv_per_block=4)
        net = MANet(config, np.random.default_rng(5), np.float32)
        probe = receptive_field_probe(net, extent=48)
        assert (probe.height, probe.width) == (38, 38)
        assert probe.contained

    @pytest.mark.slow
    def test_probe_default_architecture(self):
        net = MANet(MANetConfig(), np.random.default_rng(0), np.float32)
        probe = receptive_field_probe(net, extent=32)
        assert (probe.height, probe.width) == (22, 22)

    @pytest.mark.parametrize("seed", range(50))
    def test_actual_weights_stay_inside_analytic_window(self, tiny_config, seed):
        net = MANet(tiny_config, np.random.default_rng(seed), np.float64)
        probe = receptive_field_probe(net, extent=32, seed=seed, positive=False)
        assert probe.contained
        assert 0 < probe.height <= 22 and 0 < probe.width <= 22

    def test_probe_leaves_network_unchanged(self, tiny_net):
        before = {k: v.copy() for k, v in tiny_net.state_dict().items()}
        receptive_field_support(tiny_net, extent=32)
        for name, value in tiny_net.state_dict().items():
            np.testing.assert_array_equal(value, before[name])

    def test_odd_probe_extent(self, tiny_net):
        with pytest.raises(InvalidArgumentError):
            receptive_field_probe(tiny_net, extent=31)


@pytest.mark.unit
class TestProbes:
    """Test behavioral probes on untrained networks."""

    def test_cross_image(self):
        image = cross_image(40, 21)
        assert image.min() == 0.0 and image.max() == 1.0
        assert image[20, 20] == 0.0
        assert image[0, 0] == 1.0

    def test_min_patch_probe(self, tiny_net):
        points = min_patch_probe(tiny_net, structure_sizes=(9, 21))
        assert [p.structure_size for p in points] == [9, 21]
        assert all(p.untrained for p in points)
        assert all(np.isfinite(p.psnr) and -1.0 <= p.ssim <= 1.0 for p in points)

    def test_empty_sizes(self, tiny_net):
        with pytest.raises(InvalidArgumentError):
            min_patch_probe(tiny_net, structure_sizes=())

    def test_flat_patch_kernel(self, tiny_net):
        kernel = flat_patch_kernel(tiny_net)
        assert kernel.size == 21
        assert kernel.taps.sum() == pytest.approx(1.0)

    def test_anisotropy(self):
        round_kernel = synth_kernel(KernelParams(sigma1=2.0, sigma2=2.0))
        long_kernel = synth_kernel(KernelParams(sigma1=4.0, sigma2=1.0, theta=0.3))
        assert kernel_anisotropy(round_kernel) == pytest.approx(1.0)
        assert kernel_anisotropy(long_kernel) > 5.0
