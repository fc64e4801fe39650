"""Command-line interface: synth-kernel, degrade, train, estimate, eval, inspect, viz."""

import argparse
import sys
from typing import Any, Dict, Iterable, List, NoReturn, Optional, Sequence, TextIO, Tuple

from pydantic import ValidationError

from kernel_estimation.config import Settings, get_settings, load_key_value_file
from kernel_estimation.degradation.kernels import KernelParams
from kernel_estimation.models.configs import DatasetSource, MANetConfig, TrainConfig
from kernel_estimation.services.experiment_service import DEFAULT_FLOP_EXTENT, ExperimentService
from kernel_estimation.utils.errors import ConfigurationError, InvalidArgumentError, KernelEstimationError
from kernel_estimation.utils.logger import configure_logging, get_logger, log_error

logger = get_logger(__name__)

DATASET_KEYS = {
    "dataset_dir": "directory",
    "dataset_seed": "seed",
    "image_size": "image_size",
    "num_images": "num_images",
    "structure_density": "structure_density",
}


class ArgumentParser(argparse.ArgumentParser):
    """argparse with failures routed through the toolkit's error line."""

    def error(self, message: str) -> NoReturn:
        raise InvalidArgumentError(message, details={"command": self.prog})


def _add_seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Seed (defaults to KERNEL_EST_DEFAULT_SEED)")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="kernel-estimation", description="Spatially variant blur-kernel estimation")
    parser.add_argument("--log-level", default=None, help="Override the configured log level")
    parser.add_argument("--json-logs", action="store_true", help="Emit JSON log lines on stderr")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    synth = commands.add_parser("synth-kernel", help="Write one anisotropic Gaussian kernel")
    synth.add_argument("--sigma1", type=float, required=True)
    synth.add_argument("--sigma2", type=float, required=True)
    synth.add_argument("--theta", type=float, default=0.0)
    synth.add_argument("--size", type=int, default=None)
    synth.add_argument("--out", required=True, help="MANT tensor path")
    synth.add_argument("--render", default=None, help="PGM rendering (defaults to the tensor path with .pgm)")
    _add_seed(synth)

    deg = commands.add_parser("degrade", help="Blur, decimate and add noise to an HR image")
    deg.add_argument("input")
    deg.add_argument("out")
    deg.add_argument("--scale", type=int, default=4)
    deg.add_argument("--field-type", type=int, default=1, help="0 constant, 1-5 formula fields, 6 checkerboard")
    deg.add_argument("--patch-size", type=int, default=None)
    deg.add_argument("--noise", type=float, default=0.0, help="Noise level in 0-255 units")
    deg.add_argument("--gt-kernels", default=None, help="MANT path for the ground-truth kernel map")
    deg.add_argument("--sigma1", type=float, default=None)
    deg.add_argument("--sigma2", type=float, default=None)
    deg.add_argument("--theta", type=float, default=0.0)
    _add_seed(deg)

    trn = commands.add_parser("train", help="Train or resume an estimator")
    trn.add_argument("--config", default=None, help="key=value run configuration")
    for flag, kind in (
        ("--scale", int), ("--crop-size", int), ("--batch-size", int), ("--steps", int), ("--lr", float),
        ("--lr-milestones", str), ("--noise-max", float), ("--checkpoint-every", int), ("--channels", str),
        ("--splits", int), ("--kernel-size", int), ("--in-channels", int), ("--maconv-per-block", int),
        ("--precision", int), ("--fixed-sigma1", float), ("--fixed-sigma2", float), ("--fixed-theta", float),
        ("--output-dir", str), ("--dataset-dir", str), ("--dataset-seed", int), ("--image-size", int),
        ("--num-images", int), ("--structure-density", float),
    ):
        trn.add_argument(flag, type=kind, default=None)
    trn.add_argument("--no-augment", action="store_true", help="Fixed top-left crops without dihedral transforms")
    trn.add_argument("--no-resume", action="store_true", help="Ignore an existing checkpoint")
    _add_seed(trn)

    est = commands.add_parser("estimate", help="Estimate the kernel map of an LR image")
    est.add_argument("input")
    est.add_argument("--checkpoint", required=True)
    est.add_argument("--out-kernels", required=True)
    est.add_argument("--out-viz", default=None)
    est.add_argument("--spacing", type=int, default=None, help="Montage site spacing in HR pixels")
    _add_seed(est)

    evl = commands.add_parser("eval", help="LR-reconstruction fidelity on a dataset")
    evl.add_argument("--checkpoint", default=None)
    evl.add_argument("--dataset-dir", required=True)
    evl.add_argument("--mode", choices=("invariant", "variant"), default="invariant")
    evl.add_argument("--scale", type=int, default=4)
    evl.add_argument("--report", default=None)
    evl.add_argument("--noise", type=float, default=0.0)
    evl.add_argument("--patch-size", type=int, default=40)
    evl.add_argument("--oracle-gt", action="store_true", help="Score the ground-truth kernel map")
    _add_seed(evl)

    ins = commands.add_parser("inspect", help="Parameters, FLOPs and receptive field")
    source = ins.add_mutually_exclusive_group()
    source.add_argument("--config", default=None)
    source.add_argument("--checkpoint", default=None)
    ins.add_argument("--extent", type=int, default=DEFAULT_FLOP_EXTENT, help="LR extent for FLOPs")
    ins.add_argument("--no-probe", action="store_true", help="Skip the gradient receptive-field probe")
    _add_seed(ins)

    viz = commands.add_parser("viz", help="Render a kernel or a kernel-map montage")
    viz.add_argument("--kernel", default=None, help="MANT kernel")
    viz.add_argument("--kernels", default=None, help="MANT kernel map")
    viz.add_argument("--image", default=None, help="LR image under the montage")
    viz.add_argument("--scale", type=int, default=None)
    viz.add_argument("--spacing", type=int, default=None)
    viz.add_argument("--magnify", type=int, default=1)
    viz.add_argument("--out", required=True)
    _add_seed(viz)
    return parser


def _flag_values(args: argparse.Namespace, names: Iterable[str]) -> Dict[str, Any]:
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}


def resolve_train_config(args: argparse.Namespace, settings: Settings) -> Tuple[TrainConfig, DatasetSource]:
    """Merge a run-config file with flags; flags win."""
    values: Dict[str, Any] = load_key_value_file(args.config) if args.config else {}
    train_fields = set(TrainConfig.model_fields)
    unknown = sorted(set(values) - train_fields - set(DATASET_KEYS))
    if unknown:
        raise ConfigurationError("unknown keys in run configuration", details={"keys": ",".join(unknown)})

    values.update(_flag_values(args, train_fields))
    values.update(_flag_values(args, DATASET_KEYS))
    if args.seed is not None:
        values["seed"] = args.seed
    if args.no_augment:
        values["augment"] = False
    values.setdefault("precision", settings.precision)
    values.setdefault("seed", settings.default_seed)
    values.setdefault("output_dir", settings.output_dir / "train")

    dataset = {field: values.pop(key) for key, field in DATASET_KEYS.items() if key in values}
    dataset["kind"] = "directory" if "directory" in dataset else "procedural"
    dataset.setdefault("seed", values["seed"])
    cfg = TrainConfig(**{key: values[key] for key in values if key in train_fields})
    return cfg, DatasetSource(**dataset)


def _kernel_params(args: argparse.Namespace) -> Optional[KernelParams]:
    if args.sigma1 is None and args.sigma2 is None:
        return None
    if args.sigma1 is None or args.sigma2 is None:
        raise InvalidArgumentError("--sigma1 and --sigma2 go together", argument="sigma1")
    return KernelParams(sigma1=args.sigma1, sigma2=args.sigma2, theta=args.theta)


def run_command(args: argparse.Namespace, service: ExperimentService, out: TextIO) -> List[Tuple[str, Any]]:
    """Dispatch one parsed command; returns the lines echoed on stdout."""
    command = args.command
    if command == "synth-kernel":
        resolved = service.synth_kernel(args.sigma1, args.sigma2, args.theta, args.out, args.size, args.render,
                                        args.seed)
    elif command == "degrade":
        resolved = service.degrade(args.input, args.out, args.scale, args.field_type, args.patch_size, args.noise,
                                   args.gt_kernels, _kernel_params(args), args.seed)
    elif command == "train":
        cfg, source = resolve_train_config(args, service.settings)
        resolved, _ = service.train(cfg, source, resume=not args.no_resume)
    elif command == "estimate":
        resolved = service.estimate(args.checkpoint, args.input, args.out_kernels, args.out_viz, args.spacing,
                                    args.seed)
    elif command == "eval":
        resolved, table = service.evaluate(args.dataset_dir, args.mode, args.scale, args.report, args.checkpoint,
                                           args.noise, args.oracle_gt, args.patch_size, args.seed)
        out.write(table.render_text() + "\n")
    elif command == "inspect":
        config = None
        if args.config:
            values = load_key_value_file(args.config)
            config = MANetConfig(**{k: v for k, v in values.items() if k in MANetConfig.model_fields})
        return service.inspect(config, args.checkpoint, args.extent, not args.no_probe, args.seed)
    else:
        resolved = service.viz(args.out, args.kernel, args.kernels, args.image, args.scale, args.spacing,
                               args.magnify, args.seed)
    return sorted(resolved.items())


def format_error(error: KernelEstimationError) -> str:
    """``error=CODE message="..." key=value ...`` on one line."""
    message = error.message.replace("\n", " ").replace('"', "'")
    parts = [f"error={error.error_code}", f'message="{message}"']
    for key, value in error.details.items():
        text = str(value).replace("\n", " ").replace('"', "'")
        parts.append(f'{key}="{text}"' if " " in text else f"{key}={text}")
    return " ".join(parts)


def main(argv: Optional[Sequence[str]] = None, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    """
    Run the CLI.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])
        out: Report stream
        err: Error-line stream

    Returns:
        Exit status: 0 success, 2 argument or precondition, 3 state or
        format, 4 numeric failure, 1 anything unexpected
    """
    try:
        settings = get_settings()
        args = build_parser().parse_args(argv)
        configure_logging(args.log_level or settings.log_level, json_logs=args.json_logs or settings.json_logs,
                          stream=err)
        lines = run_command(args, ExperimentService(settings), out)
        for key, value in lines:
            out.write(f"{key}={value}\n")
        return 0
    except KernelEstimationError as exc:
        err.write(format_error(exc) + "\n")
        return exc.exit_code
    except ValidationError as exc:
        first = exc.errors()[0] if exc.errors() else {}
        field = ".".join(str(p) for p in first.get("loc", ())) or "input"
        wrapped = InvalidArgumentError(first.get("msg", str(exc)), argument=field)
        err.write(format_error(wrapped) + "\n")
        return wrapped.exit_code
    except Exception as exc:  # noqa: BLE001
        log_error(logger, exc, {"argv": " ".join(argv or sys.argv[1:])})
        err.write(f'error=UNEXPECTED_ERROR message="{type(exc).__name__}: {exc}"\n')
        return 1


if __name__ == "__main__":
    sys.exit(main())
