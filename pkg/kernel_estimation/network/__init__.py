"""Kernel estimation network, cost accounting and probes."""

from kernel_estimation.network.costs import (
    count_flops,
    count_params,
    maconv_closed_form_flops,
    maconv_mac_formula,
    maconv_param_formula,
)
from kernel_estimation.network.layers import Conv2d, ConvTranspose2d, Module
from kernel_estimation.network.maconv import MAConv
from kernel_estimation.network.manet import MANet, ResidualBlock
from kernel_estimation.network.probes import min_patch_probe
from kernel_estimation.network.receptive_field import receptive_field_analytic, receptive_field_probe

__all__ = [
    "Conv2d",
    "ConvTranspose2d",
    "MAConv",
    "MANet",
    "Module",
    "ResidualBlock",
    "count_flops",
    "count_params",
    "maconv_closed_form_flops",
    "maconv_mac_formula",
    "maconv_param_formula",
    "min_patch_probe",
    "receptive_field_analytic",
    "receptive_field_probe",
]
