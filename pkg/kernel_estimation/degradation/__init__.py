"""Ground-truth degradation: kernels, fields, blur and fidelity metrics."""

from kernel_estimation.degradation.blur import (
    add_noise,
    blur_invariant,
    blur_variant,
    blur_with_kernel_map,
    decimate,
    degrade,
)
from kernel_estimation.degradation.fields import (
    KernelField,
    field_formula,
    kernel_map,
    make_checkerboard_field,
    make_kernel_field,
)
from kernel_estimation.degradation.image import Image, KernelMap
from kernel_estimation.degradation.kernels import (
    Kernel,
    KernelParams,
    eval_kernel_grid,
    sample_training_params,
    synth_kernel,
)
from kernel_estimation.degradation.metrics import lr_fidelity, psnr, ssim

__all__ = [
    "Image",
    "Kernel",
    "KernelField",
    "KernelMap",
    "KernelParams",
    "add_noise",
    "blur_invariant",
    "blur_variant",
    "blur_with_kernel_map",
    "decimate",
    "degrade",
    "eval_kernel_grid",
    "field_formula",
    "kernel_map",
    "lr_fidelity",
    "make_checkerboard_field",
    "make_kernel_field",
    "psnr",
    "sample_training_params",
    "ssim",
    "synth_kernel",
]
