"""Tests for training data, the loss, the trainer and evaluation."""

import math

import numpy as np
import pytest

from kernel_estimation.degradation import (
    Image,
    Kernel,
    KernelMap,
    KernelParams,
    blur_invariant,
    decimate,
    lr_fidelity,
    synth_kernel,
)
from kernel_estimation.models.configs import DatasetSource, TrainConfig
from kernel_estimation.network.manet import MANet
from kernel_estimation.network.probes import min_patch_probe
from kernel_estimation.storage import sidecar_path
from kernel_estimation.tensor import Tensor
from kernel_estimation.training import (
    ImagePool,
    Trainer,
    evaluate,
    kernel_loss,
    load_network,
    make_batch,
    procedural_image,
    save_checkpoint,
    train,
)
from kernel_estimation.training.data import dihedral
from kernel_estimation.training.evaluation import prepare_image
from kernel_estimation.training.trainer import learning_rate, signature_from_state
from kernel_estimation.utils.errors import DimensionError, InvalidArgumentError, StateError


@pytest.mark.unit
class TestData:
    """Test procedural images and batch synthesis."""

    def test_procedural_image(self):
        image = procedural_image(64, np.random.default_rng(0))
        assert image.shape == (64, 64)
        assert 0.0 <= image.min() and image.max() <= 1.0
        assert image.std() > 0.02

    def test_zero_density_is_smooth(self):
        image = procedural_image(64, np.random.default_rng(0), density=0.0)
        assert np.abs(np.diff(image, axis=1)).max() <= 2.0 / 255.0 + 1e-12

    def test_pool_is_reproducible(self, procedural_source):
        first = ImagePool(procedural_source).image(2)
        second = ImagePool(procedural_source).image(2)
        np.testing.assert_array_equal(first, second)

    def test_each_epoch_visits_every_image(self, procedural_source):
        pool = ImagePool(procedural_source)
        assert sorted(pool.image_for_sample(i) for i in range(4)) == [0, 1, 2, 3]
        assert sorted(pool.image_for_sample(i) for i in range(4, 8)) == [0, 1, 2, 3]

    def test_dihedral_group(self):
        image = np.arange(16, dtype=np.float64).reshape(1, 4, 4)
        variants = {dihedral(image, v).tobytes() for v in range(8)}
        assert len(variants) == 8

    def test_batch_shapes(self, procedural_source, tiny_train_config):
        batch = make_batch(procedural_source, tiny_train_config, 0)
        assert batch.lr.shape == (2, 1, 8, 8)
        assert batch.gt.shape == (2, 25, 16, 16)
        assert batch.indices == [0, 1]
        np.testing.assert_allclose(batch.gt.sum(axis=1), 1.0, atol=1e-12)

    def test_batch_depends_only_on_seed_and_step(self, procedural_source, tiny_train_config):
        first = make_batch(procedural_source, tiny_train_config, 3)
        second = make_batch(procedural_source, tiny_train_config, 3)
        np.testing.assert_array_equal(first.lr, second.lr)
        assert first.params == second.params
        other = make_batch(procedural_source, tiny_train_config, 4)
        assert not np.array_equal(first.lr, other.lr)

    def test_noise_levels_bounded(self, procedural_source, tiny_train_config):
        cfg = tiny_train_config.model_copy(update={"noise_max": 10.0})
        batch = make_batch(procedural_source, cfg, 0)
        assert all(0.0 <= level <= 10.0 for level in batch.noise_levels)

    def test_fixed_kernel(self, procedural_source, tiny_train_config):
        cfg = tiny_train_config.model_copy(update={"fixed_sigma1": 2.0, "fixed_sigma2": 1.0, "fixed_theta": 0.5})
        batch = make_batch(procedural_source, cfg, 1)
        assert {p.as_tuple() for p in batch.params} == {(2.0, 1.0, 0.5)}


@pytest.mark.unit
class TestLoss:
    """Test the kernel reconstruction loss."""

    def test_zero_for_equal_maps(self, rng):
        maps = rng.uniform(size=(2, 9, 4, 4))
        assert kernel_loss(Tensor(maps), Tensor(maps)).item() == 0.0

    def test_matches_direct_sum(self, rng):
        a = rng.uniform(size=(2, 9, 4, 6))
        b = rng.uniform(size=(2, 9, 4, 6))
        expected = np.abs(a - b).sum() / (2 * 4 * 6)
        assert kernel_loss(Tensor(a), Tensor(b)).item() == pytest.approx(expected, rel=1e-12)

    def test_bounded_for_distributions(self, rng):
        a = rng.uniform(size=(1, 9, 3, 3))
        b = rng.uniform(size=(1, 9, 3, 3))
        a /= a.sum(axis=1, keepdims=True)
        b /= b.sum(axis=1, keepdims=True)
        assert 0.0 <= kernel_loss(Tensor(a), Tensor(b)).item() <= 2.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            kernel_loss(Tensor(np.zeros((1, 9, 2, 2))), Tensor(np.zeros((1, 9, 2, 3))))


@pytest.mark.integration
class TestTrainer:
    """Test determinism, resumption and checkpoints."""

    def test_learning_rate_milestones(self, tiny_train_config):
        cfg = tiny_train_config.model_copy(update={"lr": 1.0, "lr_milestones": [2, 3]})
        assert [learning_rate(cfg, s) for s in range(4)] == [1.0, 1.0, 0.5, 0.25]

    def test_zero_learning_rate_keeps_loss_constant(self, tiny_train_config):
        cfg = tiny_train_config.model_copy(update={
            "lr": 0.0, "augment": False, "fixed_sigma1": 1.5, "fixed_sigma2": 1.5,
        })
        source = DatasetSource(seed=2, image_size=16, num_images=1)
        result = train(cfg, source)
        assert len(result.losses) == 4
        assert len(set(result.losses)) == 1

    def test_same_seed_same_losses(self, tiny_train_config, procedural_source, tmp_path):
        first = train(tiny_train_config.model_copy(update={"output_dir": tmp_path / "a"}), procedural_source)
        second = train(tiny_train_config.model_copy(update={"output_dir": tmp_path / "b"}), procedural_source)
        assert first.losses == second.losses

    def test_resume_matches_uninterrupted(self, tiny_train_config, procedural_source, tmp_path):
        full = train(tiny_train_config.model_copy(update={"output_dir": tmp_path / "full"}), procedural_source)

        partial_dir = tmp_path / "partial"
        head = train(tiny_train_config.model_copy(update={"output_dir": partial_dir, "steps": 2}), procedural_source)
        tail = train(tiny_train_config.model_copy(update={"output_dir": partial_dir}), procedural_source)

        assert tail.start_step == 2
        assert head.losses + tail.losses == full.losses
        assert tail.steps_trained == 4

        resumed = load_network(partial_dir / "checkpoint.manc")
        uninterrupted = load_network(tmp_path / "full" / "checkpoint.manc")
        for name, value in uninterrupted.state_dict().items():
            np.testing.assert_array_equal(resumed.state_dict()[name], value)

        lines = (partial_dir / "metrics.tsv").read_text().splitlines()
        assert [line.split("\t")[0] for line in lines] == ["0", "1", "2", "3"]

    def test_no_resume_restarts(self, tiny_train_config, procedural_source):
        train(tiny_train_config, procedural_source)
        rerun = Trainer(tiny_train_config, procedural_source).run(resume=False)
        assert rerun.start_step == 0
        assert len(rerun.losses) == 4

    def test_architecture_mismatch(self, tiny_train_config, procedural_source):
        train(tiny_train_config.model_copy(update={"steps": 2}), procedural_source)
        wider = tiny_train_config.model_copy(update={"channels": [8, 16, 8]})
        with pytest.raises(StateError) as exc_info:
            Trainer(wider, procedural_source).run()
        assert "channels" in exc_info.value.details["checkpoint"]

    def test_load_network_checks_signature(self, tiny_train_config, procedural_source):
        result = train(tiny_train_config.model_copy(update={"steps": 2}), procedural_source)
        with pytest.raises(StateError):
            load_network(result.checkpoint, precision=32)
        net = load_network(result.checkpoint, tiny_train_config.network_config(), 64)
        assert net.steps_trained == 2
        assert net.dtype == np.float64

    def test_checkpoint_without_optimizer(self, tmp_path, small_kernel_config):
        net = MANet(small_kernel_config, np.random.default_rng(0), np.float64)
        path = save_checkpoint(tmp_path / "net.manc", net)
        loaded = load_network(path)
        assert loaded.config == small_kernel_config
        for name, value in net.state_dict().items():
            np.testing.assert_array_equal(loaded.state_dict()[name], value)

    def test_signature_from_state(self, tiny_net):
        assert signature_from_state(tiny_net.state_dict()) == {
            "channels": "8,16,8",
            "in_channels": "1",
            "kernel_size": "21",
            "maconv_per_block": "2",
            "splits": "2",
        }

    def test_tensor_mismatch_reports_both_signatures(self, tmp_path, small_kernel_config):
        net = MANet(small_kernel_config, np.random.default_rng(0), np.float64)
        path = save_checkpoint(tmp_path / "net.manc", net)
        sidecar = sidecar_path(path)
        sidecar.write_text(sidecar.read_text().replace("maconv_per_block=2", "maconv_per_block=3"))
        with pytest.raises(StateError) as exc_info:
            load_network(path)
        details = exc_info.value.details
        assert "maconv_per_block=3" in details["sidecar"]
        assert "maconv_per_block=2" in details["checkpoint"]
        assert "channels=8,16,8" in details["checkpoint"]

    @pytest.mark.slow
    def test_overfits_single_kernel(self, tiny_train_config, procedural_source):
        cfg = tiny_train_config.model_copy(update={
            "steps": 200, "lr": 3e-3, "checkpoint_every": 200, "fixed_sigma1": 2.0, "fixed_sigma2": 0.8,
            "fixed_theta": 0.6,
        })
        result = train(cfg, procedural_source)
        assert np.mean(result.losses[-10:]) < 0.5 * np.mean(result.losses[:10])

    @pytest.mark.slow
    def test_overfit_beats_uniform_kernel(self, tmp_path):
        truth = KernelParams(sigma1=6.0, sigma2=1.0, theta=math.pi / 4)
        cfg = TrainConfig(
            scale=4, crop_size=96, batch_size=1, steps=3000, lr=1e-3, seed=0, checkpoint_every=1000,
            channels=[16, 32, 16], kernel_size=21, precision=32, augment=False,
            fixed_sigma1=truth.sigma1, fixed_sigma2=truth.sigma2, fixed_theta=truth.theta,
            output_dir=tmp_path / "overfit",
        )
        source = DatasetSource(seed=5, image_size=96, num_images=1)
        result = train(cfg, source)
        assert np.mean(result.losses[-50:]) < 0.5 * np.mean(result.losses[:50])

        net = load_network(result.checkpoint)
        hr = Image(ImagePool(source).image(0))
        lr = decimate(blur_invariant(hr, synth_kernel(truth, 21)), 4)
        estimated, _ = lr_fidelity(hr, lr, net.estimate(lr), 4)
        uniform, _ = lr_fidelity(hr, lr, KernelMap.from_kernel(Kernel.uniform(21).taps, 96, 96), 4)
        assert estimated >= uniform + 3.0

        small, large = min_patch_probe(net, structure_sizes=(9, 61))
        assert not small.untrained
        assert large.psnr >= small.psnr - 1.0



@pytest.mark.unit
class TestEvaluation:
    """Test the LR-reconstruction protocol."""

    def test_prepare_image_crops_to_multiple(self):
        image = prepare_image(Image(np.zeros((3, 50, 45))), 4, 1)
        assert image.channels == 1
        assert image.extent == (48, 40)

    def test_invariant_oracle(self, structured_hr):
        table = evaluate(None, [("scene", structured_hr)], "invariant", 4, oracle_gt=True)
        assert len(table.rows) == 9
        assert len({row.degradation for row in table.rows}) == 9
        assert all(row.psnr == 100.0 for row in table.rows)

    def test_variant_reproducible(self, tiny_net, structured_hr):
        first = evaluate(tiny_net, [("scene", structured_hr)], "variant", 4, noise_level=5.0, seed=3)
        second = evaluate(tiny_net, [("scene", structured_hr)], "variant", 4, noise_level=5.0, seed=3)
        assert [row.degradation for row in first.rows] == ["type1", "type2", "type3", "type4", "type5"]
        assert [row.psnr for row in first.rows] == [row.psnr for row in second.rows]
        assert all(row.psnr < 100.0 for row in first.rows)

    def test_rendered_report(self, structured_hr):
        table = evaluate(None, [("scene", structured_hr)], "variant", 4, oracle_gt=True, patch_size=48)
        assert table.render_text().splitlines()[-1].startswith("mean")
        assert "rows=5" in table.render_key_values()

    def test_scale_mismatch(self, tiny_net, structured_hr):
        with pytest.raises(InvalidArgumentError):
            evaluate(tiny_net, [("scene", structured_hr)], "invariant", 2)

    def test_network_required(self, structured_hr):
        with pytest.raises(InvalidArgumentError):
            evaluate(None, [("scene", structured_hr)], "invariant", 4)

    def test_unknown_mode(self, tiny_net, structured_hr):
        with pytest.raises(InvalidArgumentError):
            evaluate(tiny_net, [("scene", structured_hr)], "blind", 4)
