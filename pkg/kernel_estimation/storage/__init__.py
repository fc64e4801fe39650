"""Tensor containers, image files and configuration sidecars."""

from kernel_estimation.storage.containers import read_checkpoint, read_tensor, write_checkpoint, write_tensor
from kernel_estimation.storage.images import list_images, read_image, rgb_to_y, write_image
from kernel_estimation.storage.sidecar import read_sidecar, sidecar_path, write_sidecar

__all__ = [
    "list_images",
    "read_checkpoint",
    "read_image",
    "read_sidecar",
    "read_tensor",
    "rgb_to_y",
    "sidecar_path",
    "write_checkpoint",
    "write_image",
    "write_sidecar",
    "write_tensor",
]
