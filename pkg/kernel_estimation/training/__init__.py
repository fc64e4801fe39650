"""Training data, loss, training loop and evaluation harness."""

from kernel_estimation.training.data import Batch, ImagePool, TrainSample, make_batch, make_sample, procedural_image
from kernel_estimation.training.evaluation import evaluate
from kernel_estimation.training.loss import kernel_loss
from kernel_estimation.training.trainer import TrainResult, Trainer, load_network, save_checkpoint, train

__all__ = [
    "Batch",
    "ImagePool",
    "TrainResult",
    "TrainSample",
    "Trainer",
    "evaluate",
    "kernel_loss",
    "load_network",
    "make_batch",
    "make_sample",
    "procedural_image",
    "save_checkpoint",
    "train",
]
