"""Experiment orchestration and visualization."""

from kernel_estimation.services.experiment_service import ExperimentService
from kernel_estimation.services.visualization import kernel_montage, render_kernel, sample_sites

__all__ = ["ExperimentService", "kernel_montage", "render_kernel", "sample_sites"]
