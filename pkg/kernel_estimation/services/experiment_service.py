"""Reproducible experiments behind the command surface."""

import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from kernel_estimation.config import Settings, resolve_dtype
from kernel_estimation.degradation.blur import degrade
from kernel_estimation.degradation.fields import (
    CHECKERBOARD_FIELD,
    CONSTANT_FIELD,
    DEFAULT_PATCH_SIZE,
    FORMULA_FIELD_TYPES,
    KernelField,
    make_checkerboard_field,
    make_kernel_field,
)
from kernel_estimation.degradation.image import KernelMap
from kernel_estimation.degradation.kernels import KernelParams, synth_kernel
from kernel_estimation.models.configs import DatasetSource, DegradationConfig, MANetConfig, TrainConfig
from kernel_estimation.models.reports import EvaluationTable
from kernel_estimation.network.costs import (
    count_flops,
    count_params,
    maconv_closed_form_flops,
    maconv_mac_formula,
    maconv_param_formula,
    plain_conv_params,
)
from kernel_estimation.network.manet import MANet
from kernel_estimation.network.receptive_field import PROBE_EXTENT, receptive_field_analytic, receptive_field_probe
from kernel_estimation.services.visualization import kernel_montage, render_kernel
from kernel_estimation.storage.containers import read_tensor, write_tensor
from kernel_estimation.storage.images import list_images, read_image, write_image
from kernel_estimation.storage.sidecar import write_sidecar
from kernel_estimation.training.evaluation import EvalMode, evaluate
from kernel_estimation.training.trainer import TrainResult, load_network, train
from kernel_estimation.utils.errors import InvalidArgumentError
from kernel_estimation.utils.helpers import derive_rng, measure_time
from kernel_estimation.utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]
Resolved = Dict[str, Any]

DEFAULT_FLOP_EXTENT = 256


class ExperimentService:
    """
    One method per command. Each method writes its artifacts, a ``.cfg``
    sidecar per artifact, and returns the resolved configuration.
    """

    def __init__(self, settings: Settings) -> None:
        """
        Initialize service.

        Args:
            settings: Toolkit settings (precision, default seed, kernel size)
        """
        self.settings = settings

    def _seed(self, seed: Optional[int]) -> int:
        return self.settings.default_seed if seed is None else seed

    @staticmethod
    def _record(resolved: Resolved, *artifacts: Optional[PathLike]) -> Resolved:
        for artifact in artifacts:
            if artifact is not None:
                write_sidecar(artifact, resolved)
        return resolved

    def synth_kernel(
        self,
        sigma1: float,
        sigma2: float,
        theta: float,
        out: PathLike,
        size: Optional[int] = None,
        render: Optional[PathLike] = None,
        seed: Optional[int] = None,
    ) -> Resolved:
        """
        Write one anisotropic Gaussian kernel as a tensor and a rendering.

        The rendering defaults to the tensor path with a ``.pgm`` suffix.
        """
        size = size or self.settings.kernel_size
        params = KernelParams(sigma1=sigma1, sigma2=sigma2, theta=theta)
        kernel = synth_kernel(params, size, resolve_dtype(self.settings.precision))
        target = write_tensor(out, kernel.taps)
        rendering = write_image(Path(render) if render else Path(out).with_suffix(".pgm"), render_kernel(kernel.taps))
        resolved = {
            "command": "synth-kernel",
            "sigma1": params.sigma1,
            "sigma2": params.sigma2,
            "theta": params.theta,
            "size": size,
            "precision": self.settings.precision,
            "seed": self._seed(seed),
            "out": str(target),
            "rendering": str(rendering),
        }
        return self._record(resolved, target, rendering)

    def build_field(
        self,
        field_type: int,
        height: int,
        width: int,
        scale: int,
        patch_size: Optional[int],
        seed: int,
        params: Optional[KernelParams] = None,
    ) -> KernelField:
        """Constant (0), formula (1-5) or checkerboard (6) field over an HR extent."""
        if field_type == CONSTANT_FIELD:
            if params is None:
                raise InvalidArgumentError("field type 0 needs --sigma1 and --sigma2", argument="sigma1")
            return KernelField.constant(params, height, width, scale, patch_size or DEFAULT_PATCH_SIZE)
        if field_type in FORMULA_FIELD_TYPES:
            rng = derive_rng(seed, field_type)
            return make_kernel_field(field_type, height, width, patch_size or DEFAULT_PATCH_SIZE, scale, rng, seed)
        if field_type == CHECKERBOARD_FIELD:
            if patch_size is None:
                return make_checkerboard_field(height, width, scale=scale)
            return make_checkerboard_field(height, width, patch_size, scale)
        raise InvalidArgumentError(
            f"unknown field type {field_type}",
            argument="field_type",
            details={"supported": [CONSTANT_FIELD, *FORMULA_FIELD_TYPES, CHECKERBOARD_FIELD]},
        )

    @measure_time
    def degrade(
        self,
        source: PathLike,
        out: PathLike,
        scale: int,
        field_type: int,
        patch_size: Optional[int] = None,
        noise: float = 0.0,
        gt_kernels: Optional[PathLike] = None,
        params: Optional[KernelParams] = None,
        seed: Optional[int] = None,
    ) -> Resolved:
        """Blur, decimate and add noise to an HR image; optionally save the ground-truth map."""
        seed = self._seed(seed)
        cfg = DegradationConfig(scale=scale, noise_level=noise, seed=seed)
        hr = read_image(source)
        field = self.build_field(field_type, hr.height, hr.width, scale, patch_size, seed, params)
        lr, gt_map = degrade(hr, field, cfg, self.settings.kernel_size)
        target = write_image(out, lr)

        resolved: Resolved = {
            "command": "degrade",
            "input": str(source),
            "out": str(target),
            "scale": scale,
            "noise": noise,
            "seed": seed,
            "kernel_size": self.settings.kernel_size,
            "lr_extent": f"{lr.height} {lr.width}",
        }
        resolved.update({f"field_{key}": value for key, value in field.header().items()})
        if params is not None and field_type == CONSTANT_FIELD:
            resolved.update({"sigma1": params.sigma1, "sigma2": params.sigma2, "theta": params.theta})
        gt_target = None
        if gt_kernels is not None:
            gt_target = write_tensor(gt_kernels, gt_map.astype(resolve_dtype(self.settings.precision)))
            resolved["gt_kernels"] = str(gt_target)
        return self._record(resolved, target, gt_target)

    def train(self, cfg: TrainConfig, source: DatasetSource, resume: bool = True) -> Tuple[Resolved, TrainResult]:
        """Run or resume training; the resolved run config lands next to the checkpoint."""
        result = train(cfg, source, resume=resume)
        resolved: Resolved = {"command": "train", **cfg.to_key_values()}
        resolved.update({f"dataset_{key}": value for key, value in source.model_dump().items() if value is not None})
        resolved.update({
            "checkpoint": str(result.checkpoint),
            "metrics": str(result.metrics),
            "start_step": result.start_step,
            "steps_trained": result.steps_trained,
        })
        if result.losses:
            resolved["final_loss"] = result.losses[-1]
        self._record(resolved, result.metrics)
        return resolved, result

    def _load(self, checkpoint: PathLike) -> MANet:
        net = load_network(checkpoint)
        logger.info("network loaded", checkpoint=str(checkpoint), steps_trained=net.steps_trained)
        return net

    @measure_time
    def estimate(
        self,
        checkpoint: PathLike,
        source: PathLike,
        out_kernels: PathLike,
        out_viz: Optional[PathLike] = None,
        spacing: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> Resolved:
        """Estimate the kernel map of an LR image and render a montage."""
        net = self._load(checkpoint)
        lr = read_image(source, role="lr", luminance=net.config.in_channels == 1).astype(net.dtype)
        kmap = net.estimate(lr)
        target = write_tensor(out_kernels, kmap.values)
        taps, height, width = kmap.values.shape
        resolved: Resolved = {
            "command": "estimate",
            "checkpoint": str(checkpoint),
            "input": str(source),
            "out_kernels": str(target),
            "kernel_map_shape": f"{taps} {height} {width}",
            "scale": net.config.scale,
            "seed": self._seed(seed),
        }
        viz_target = None
        if out_viz is not None:
            montage, sites = kernel_montage(lr, kmap, net.config.scale, spacing)
            viz_target = write_image(out_viz, montage)
            resolved.update({"out_viz": str(viz_target), "sites": len(sites)})
        return self._record(resolved, target, viz_target)

    def evaluate(
        self,
        dataset_dir: PathLike,
        mode: EvalMode,
        scale: int,
        report: Optional[PathLike] = None,
        checkpoint: Optional[PathLike] = None,
        noise: float = 0.0,
        oracle_gt: bool = False,
        patch_size: int = DEFAULT_PATCH_SIZE,
        seed: Optional[int] = None,
    ) -> Tuple[Resolved, EvaluationTable]:
        """Score a checkpoint (or the ground truth) on a directory of HR images."""
        seed = self._seed(seed)
        net = self._load(checkpoint) if checkpoint is not None else None
        if net is None and not oracle_gt:
            raise InvalidArgumentError("eval needs --checkpoint unless --oracle-gt is given", argument="checkpoint")
        luminance = net is None or net.config.in_channels == 1
        images = [(path.name, read_image(path, luminance=luminance)) for path in list_images(dataset_dir)]
        table = evaluate(net, images, mode, scale, noise_level=noise, seed=seed, oracle_gt=oracle_gt,
                         patch_size=patch_size)

        resolved: Resolved = {
            "command": "eval",
            "dataset_dir": str(dataset_dir),
            "mode": mode,
            "scale": scale,
            "noise": noise,
            "oracle_gt": oracle_gt,
            "patch_size": patch_size,
            "seed": seed,
            "images": len(images),
            "rows": len(table.rows),
            "mean_psnr": f"{table.mean_psnr:.4f}",
            "mean_ssim": f"{table.mean_ssim:.6f}",
        }
        if checkpoint is not None:
            resolved["checkpoint"] = str(checkpoint)
        if report is not None:
            target = Path(report)
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(table.render_text() + "\n", encoding="utf-8")
            machine = target.with_name(target.name + ".kv")
            machine.write_text(table.render_key_values() + "\n", encoding="utf-8")
            resolved.update({"report": str(target), "report_kv": str(machine)})
            self._record(resolved, target)
        return resolved, table

    def inspect(
        self,
        config: Optional[MANetConfig] = None,
        checkpoint: Optional[PathLike] = None,
        extent: int = DEFAULT_FLOP_EXTENT,
        probe: bool = True,
        seed: Optional[int] = None,
    ) -> List[Tuple[str, str]]:
        """
        Cost and receptive-field summary of an architecture.

        Returns:
            Ordered (key, value) lines
        """
        seed = self._seed(seed)
        if checkpoint is not None:
            net = self._load(checkpoint)
        else:
            config = config or MANetConfig(kernel_size=self.settings.kernel_size)
            net = MANet(config, derive_rng(seed, 0), resolve_dtype(self.settings.precision))
        config = net.config
        c1, c2, _ = config.channels
        splits = config.splits

        lines: List[Tuple[str, str]] = [
            ("channels", ",".join(str(c) for c in config.channels)),
            ("splits", str(splits)),
            ("maconv_per_block", str(config.maconv_per_block)),
            ("kernel_size", str(config.kernel_size)),
            ("scale", str(config.scale)),
            ("params_bias_free", str(count_params(net).parameters)),
            ("params_total", str(count_params(net, include_bias=True).parameters)),
            (f"maconv({c1},{c1},S={splits})", str(maconv_param_formula(c1, c1, splits))),
            (f"maconv({c2},{c2},S={splits})", str(maconv_param_formula(c2, c2, splits))),
            (f"plain_conv({c1},{c1})", str(plain_conv_params(c1, c1))),
            (f"flops_at_{extent}x{extent}", str(count_flops(net, extent, extent).flops)),
            (f"maconv_macs({c1},{c1},S={splits})_at_{extent}x{extent}",
             str(maconv_mac_formula(c1, c1, splits, extent, extent))),
            (f"maconv_closed_form_flops({c1},{c1},S={splits})_at_{extent}x{extent}",
             str(maconv_closed_form_flops(c1, c1, splits, extent, extent))),
        ]
        analytic = receptive_field_analytic(config)
        lines.append(("receptive_field", f"{analytic[0]} {analytic[1]}"))
        lines.append(("receptive_field_h", str(analytic[0])))
        lines.append(("receptive_field_w", str(analytic[1])))
        if probe:
            probe_extent = max(PROBE_EXTENT, 2 * math.ceil(max(analytic) / 2) + 8)
            measured = receptive_field_probe(net, probe_extent, seed)
            lines.append(("receptive_field_probe", f"{measured.height} {measured.width}"))
            lines.append(("low_coverage", str(measured.low_coverage).lower()))
        lines.append(("seed", str(seed)))
        return lines

    def viz(
        self,
        out: PathLike,
        kernel: Optional[PathLike] = None,
        kernels: Optional[PathLike] = None,
        image: Optional[PathLike] = None,
        scale: Optional[int] = None,
        spacing: Optional[int] = None,
        magnify: int = 1,
        seed: Optional[int] = None,
    ) -> Resolved:
        """Render a single kernel tensor, or a kernel-map montage over an LR image."""
        resolved: Resolved = {"command": "viz", "seed": self._seed(seed)}
        if kernel is not None:
            rendering = render_kernel(read_tensor(kernel), magnify)
            resolved.update({"kernel": str(kernel), "magnify": magnify})
        elif kernels is not None and image is not None and scale is not None:
            kmap = KernelMap(read_tensor(kernels))
            lr = read_image(image, role="lr", luminance=True)
            rendering, sites = kernel_montage(lr, kmap, scale, spacing)
            resolved.update({"kernels": str(kernels), "image": str(image), "scale": scale, "sites": len(sites)})
        else:
            raise InvalidArgumentError("viz needs --kernel, or --kernels with --image and --scale", argument="kernel")
        target = write_image(out, rendering)
        resolved["out"] = str(target)
        return self._record(resolved, target)
