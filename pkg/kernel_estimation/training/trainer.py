"""Deterministic, resumable training loop."""

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import orjson

from kernel_estimation.config import resolve_dtype
from kernel_estimation.models.configs import DatasetSource, MANetConfig, TrainConfig
from kernel_estimation.network.manet import MANet
from kernel_estimation.storage.containers import read_checkpoint, write_checkpoint
from kernel_estimation.storage.sidecar import read_sidecar, sidecar_path, write_sidecar
from kernel_estimation.tensor.optim import Adam, AdamConfig
from kernel_estimation.tensor.tape import Tape, backward
from kernel_estimation.tensor.tensor import Tensor
from kernel_estimation.training.data import Batch, ImagePool, make_batch
from kernel_estimation.training.loss import kernel_loss
from kernel_estimation.utils.errors import FormatError, NumericError, StateError
from kernel_estimation.utils.helpers import derive_rng
from kernel_estimation.utils.logger import get_logger, log_checkpoint, log_error, log_training_step

logger = get_logger(__name__)

CHECKPOINT_NAME = "checkpoint.manc"
METRICS_NAME = "metrics.tsv"
NETWORK_KEYS = ("channels", "splits", "kernel_size", "scale", "in_channels", "maconv_per_block")

PathLike = Union[str, Path]


@dataclass
class TrainResult:
    """Outcome of a training run."""
    checkpoint: Path
    metrics: Path
    losses: List[float] = field(default_factory=list)
    start_step: int = 0
    steps_trained: int = 0


def network_signature(config: MANetConfig, precision: int) -> Dict[str, str]:
    """Sidecar keys that must match for a checkpoint to load."""
    values = {key: getattr(config, key) for key in NETWORK_KEYS}
    values["channels"] = ",".join(str(c) for c in config.channels)
    values["precision"] = precision
    return {key: str(value) for key, value in values.items()}


def network_config_from_sidecar(values: Dict[str, str]) -> MANetConfig:
    missing = [key for key in NETWORK_KEYS if key not in values]
    if missing:
        raise FormatError("checkpoint sidecar lacks network keys", details={"missing": missing})
    return MANetConfig(**{key: values[key] for key in NETWORK_KEYS})


def save_checkpoint(path: PathLike, net: MANet, optimizer: Optional[Adam] = None,
                    extra: Optional[Dict[str, str]] = None) -> Path:
    """
    Write parameters, Adam moments and counters, plus the network sidecar.

    Args:
        path: Checkpoint file
        net: Network
        optimizer: Optimizer whose moments are stored (optional)
        extra: Additional sidecar keys

    Returns:
        Checkpoint path
    """
    entries: Dict[str, np.ndarray] = {}
    for parameter in net.parameters():
        entries[f"param/{parameter.name}"] = parameter.value.numpy()
    if optimizer is not None:
        for parameter in optimizer.parameters:
            m, v = optimizer.state.moments_for(parameter)
            entries[f"adam.m/{parameter.name}"] = m
            entries[f"adam.v/{parameter.name}"] = v
        entries["meta/step"] = np.asarray(float(optimizer.state.step))
    entries["meta/steps_trained"] = np.asarray(float(net.steps_trained))
    target = write_checkpoint(path, entries)

    precision = 64 if net.dtype == np.float64 else 32
    sidecar = network_signature(net.config, precision)
    sidecar.update(extra or {})
    write_sidecar(target, sidecar, comment="kernel estimator checkpoint")
    return target


def format_signature(values: Dict[str, str]) -> str:
    return ";".join(f"{key}={values[key]}" for key in sorted(values))


def signature_from_state(state: Dict[str, np.ndarray]) -> Dict[str, str]:
    """Architecture keys recoverable from parameter names and shapes alone."""
    found: Dict[str, str] = {}
    head, down, tail = state.get("head.weight"), state.get("down.weight"), state.get("tail.weight")
    if head is not None and down is not None:
        found["channels"] = f"{head.shape[0]},{down.shape[0]},{head.shape[0]}"
    if head is not None:
        found["in_channels"] = str(head.shape[1])
    if tail is not None:
        found["kernel_size"] = str(math.isqrt(tail.shape[0]))
    layers = {name.split(".")[1] for name in state if name.startswith("block1.maconv")}
    splits = {name.split(".")[2] for name in state if name.startswith("block1.maconv0.split")}
    if layers:
        found["maconv_per_block"] = str(len(layers))
    if splits:
        found["splits"] = str(len(splits))
    return found


def _check_signature(path: Path, stored: Dict[str, str], expected: Dict[str, str]) -> None:
    mismatched = {key: (stored.get(key), value) for key, value in expected.items() if stored.get(key) != value}
    if mismatched:
        raise StateError(
            "checkpoint does not match the requested network",
            details={
                "path": str(path),
                "checkpoint": ";".join(f"{k}={stored.get(k)}" for k in sorted(mismatched)),
                "requested": ";".join(f"{k}={v[1]}" for k, v in sorted(mismatched.items())),
            },
        )


def load_network(path: PathLike, config: Optional[MANetConfig] = None, precision: Optional[int] = None) -> MANet:
    """
    Rebuild a network from a checkpoint and its sidecar.

    Args:
        path: Checkpoint file
        config: Expected architecture (taken from the sidecar when omitted)
        precision: Expected precision (taken from the sidecar when omitted)

    Returns:
        MANet with loaded parameters and step counter
    """
    source = Path(path)
    if not sidecar_path(source).is_file():
        raise FormatError("checkpoint sidecar missing", path=str(sidecar_path(source)))
    stored = read_sidecar(source)
    stored_config = network_config_from_sidecar(stored)
    stored_precision = int(stored.get("precision", "32"))
    if config is not None or precision is not None:
        expected = network_signature(config or stored_config, precision or stored_precision)
        _check_signature(source, stored, expected)

    entries = read_checkpoint(source)
    net = MANet(stored_config, np.random.default_rng(0), resolve_dtype(stored_precision))
    params = {name[len("param/"):]: value for name, value in entries.items() if name.startswith("param/")}
    try:
        net.load_state_dict(params)
    except StateError as exc:
        raise StateError(
            "checkpoint tensors do not match the network recorded in its sidecar",
            details={
                "path": str(source),
                "sidecar": format_signature(network_signature(stored_config, stored_precision)),
                "checkpoint": format_signature(signature_from_state(params)),
            },
        ) from exc
    if "meta/steps_trained" in entries:
        net.steps_trained = int(entries["meta/steps_trained"])
    return net


def learning_rate(cfg: TrainConfig, step: int) -> float:
    """Base rate halved once per milestone already reached."""
    passed = sum(1 for milestone in cfg.lr_milestones if step >= milestone)
    return cfg.lr * (0.5 ** passed)


class Trainer:
    """
    Adam on the kernel loss over procedurally degraded crops.

    Batch b is synthesized from (seed, b) alone, so a run resumed from a
    checkpoint continues exactly as the uninterrupted run would.
    """

    def __init__(self, cfg: TrainConfig, source: DatasetSource) -> None:
        self.cfg = cfg
        self.source = source
        self.output_dir = Path(cfg.output_dir)
        self.checkpoint_path = self.output_dir / CHECKPOINT_NAME
        self.metrics_path = self.output_dir / METRICS_NAME
        self.dtype = resolve_dtype(cfg.precision)
        self.pool = ImagePool(source, cfg.in_channels)
        self.net = MANet(cfg.network_config(), derive_rng(cfg.seed, 0), self.dtype)
        self.optimizer = Adam(self.net.parameters(), AdamConfig(lr=cfg.lr))
        self.start_step = 0

    def resume(self) -> bool:
        """Load the run's checkpoint when one exists; returns whether it did."""
        if not self.checkpoint_path.is_file():
            return False
        stored = read_sidecar(self.checkpoint_path)
        _check_signature(self.checkpoint_path, stored, network_signature(self.net.config, self.cfg.precision))

        entries = read_checkpoint(self.checkpoint_path)
        self.net.load_state_dict({n[len("param/"):]: v for n, v in entries.items() if n.startswith("param/")})
        state = self.optimizer.state
        for parameter in self.net.parameters():
            m_key, v_key = f"adam.m/{parameter.name}", f"adam.v/{parameter.name}"
            if m_key not in entries or v_key not in entries:
                raise StateError("checkpoint lacks optimizer moments", details={"parameter": parameter.name})
            state.m[parameter.name] = entries[m_key].astype(self.dtype)
            state.v[parameter.name] = entries[v_key].astype(self.dtype)
        state.step = int(entries["meta/step"])
        self.net.steps_trained = int(entries["meta/steps_trained"])
        self.start_step = self.net.steps_trained
        logger.info("training resumed", step=self.start_step, checkpoint=str(self.checkpoint_path))
        return True

    def _prepare_metrics(self) -> None:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        kept: List[str] = []
        if self.start_step and self.metrics_path.is_file():
            for line in self.metrics_path.read_text(encoding="utf-8").splitlines():
                fields = line.split("\t")
                if fields and fields[0].isdigit() and int(fields[0]) < self.start_step:
                    kept.append(line)
        self.metrics_path.write_text("".join(f"{line}\n" for line in kept), encoding="utf-8")

    def _dump_batch(self, step: int, batch: Batch, error: NumericError) -> Path:
        dump = {
            "step": step,
            "seed": self.cfg.seed,
            "sample_indices": batch.indices,
            "kernels": [p.model_dump() for p in batch.params],
            "noise_levels": batch.noise_levels,
            "error": error.message,
            "details": error.details,
        }
        target = self.output_dir / f"nonfinite_step{step}.json"
        target.write_bytes(orjson.dumps(dump, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY))
        return target

    def train_step(self, step: int) -> float:
        """One optimizer step on batch ``step``; returns the loss."""
        batch = make_batch(self.source, self.cfg, step, self.pool)
        self.optimizer.lr = learning_rate(self.cfg, step)
        self.optimizer.zero_grad()
        try:
            with Tape() as tape:
                prediction = self.net(Tensor(batch.lr))
                loss = kernel_loss(prediction, Tensor(batch.gt))
            backward(loss, tape)
            self.optimizer.step()
        except NumericError as exc:
            dump = self._dump_batch(step, batch, exc)
            log_error(logger, exc, {"step": step, "dump": str(dump)})
            exc.details["dump"] = str(dump)
            raise
        self.net.steps_trained = step + 1
        return loss.item()

    def checkpoint(self) -> Path:
        extra = {key: value for key, value in self.cfg.to_key_values().items() if key not in NETWORK_KEYS}
        path = save_checkpoint(self.checkpoint_path, self.net, self.optimizer, extra)
        log_checkpoint(logger, str(path), self.net.steps_trained)
        return path

    def run(self, resume: bool = True) -> TrainResult:
        """
        Train until ``cfg.steps`` optimizer steps have been taken in total.

        Args:
            resume: Continue from an existing checkpoint in the output directory

        Returns:
            TrainResult with the losses of the steps run in this call
        """
        if resume:
            self.resume()
        self._prepare_metrics()
        result = TrainResult(checkpoint=self.checkpoint_path, metrics=self.metrics_path, start_step=self.start_step)
        started = time.perf_counter()

        with self.metrics_path.open("a", encoding="utf-8") as metrics:
            for step in range(self.start_step, self.cfg.steps):
                loss = self.train_step(step)
                elapsed = time.perf_counter() - started
                metrics.write(f"{step}\t{loss!r}\t{elapsed:.3f}\n")
                metrics.flush()
                result.losses.append(loss)
                log_training_step(logger, step, loss, elapsed, lr=self.optimizer.lr)
                if (step + 1) % self.cfg.checkpoint_every == 0:
                    self.checkpoint()

        if self.net.steps_trained % self.cfg.checkpoint_every or not self.checkpoint_path.is_file():
            self.checkpoint()
        result.steps_trained = self.net.steps_trained
        return result


def train(cfg: TrainConfig, source: DatasetSource, resume: bool = True) -> TrainResult:
    """Build a trainer and run it."""
    return Trainer(cfg, source).run(resume=resume)
