"""Parameter and multiply-accumulate accounting."""

from fractions import Fraction
from typing import List, Tuple

from kernel_estimation.models.reports import CostReport, LayerCost
from kernel_estimation.network.layers import Conv2d, ConvTranspose2d, Module
from kernel_estimation.network.manet import MANet


def plain_conv_params(c_in: int, c_out: int, kernel_size: int = 3) -> int:
    """Bias-free weights of a dense convolution."""
    return kernel_size * kernel_size * c_in * c_out


def maconv_param_formula(c_in: int, c_out: int, splits: int) -> int:
    """(9/S)·C_in·C_out + ((S²−1)/(2S))·C_in², bias-free."""
    s = Fraction(splits)
    value = Fraction(9) / s * c_in * c_out + (s * s - 1) / (2 * s) * c_in * c_in
    return int(value)


def maconv_mac_formula(c_in: int, c_out: int, splits: int, height: int, width: int) -> int:
    """Multiply-accumulates of a MAConv layer on an H_f×W_f feature map; equals ``count_flops``."""
    return maconv_param_formula(c_in, c_out, splits) * height * width


def maconv_closed_form_flops(c_in: int, c_out: int, splits: int, height: int, width: int) -> int:
    """
    Published FLOP estimate ((9/S)·C_in·C_out + (2(S−1)/S²)·C_in²)·H_f·W_f.

    Its affine term differs from the enumerated count.
    """
    s = Fraction(splits)
    per_site = Fraction(9) / s * c_in * c_out + 2 * (s - 1) / (s * s) * c_in * c_in
    return int(per_site * height * width)


def _conv_sites(module: Module, height: int, width: int) -> List[Tuple[Module, int, int]]:
    if isinstance(module, (Conv2d, ConvTranspose2d)):
        return [(module, height, width)]
    if isinstance(module, MANet):
        children = module.layer_extents(height, width)
    else:
        children = [(child, height, width) for child in module.children()]
    sites: List[Tuple[Module, int, int]] = []
    for child, h, w in children:
        sites.extend(_conv_sites(child, h, w))
    return sites


def _kind(conv: Module) -> str:
    return "conv_transpose2d" if isinstance(conv, ConvTranspose2d) else "conv2d"


def _layer_parameters(conv: Module, include_bias: bool) -> int:
    count = conv.weight.size
    if include_bias and conv.bias is not None:
        count += conv.bias.size
    return count


def count_params(module: Module, include_bias: bool = False) -> CostReport:
    """
    Enumerate parameters of a layer or network.

    Args:
        module: Any convolution, MAConv, block or MANet
        include_bias: Count bias vectors as well

    Returns:
        CostReport with one entry per convolution
    """
    layers = [
        LayerCost(name=conv.name, kind=_kind(conv), parameters=_layer_parameters(conv, include_bias))
        for conv, _, _ in _conv_sites(module, 1, 1)
    ]
    return CostReport.from_layers(layers, include_bias=include_bias)


def count_flops(module: Module, height: int, width: int, include_bias: bool = False) -> CostReport:
    """
    Count multiply-accumulates of a forward pass, one MAC as one FLOP.

    Elementwise work (activations, affine modulation, softmax, upsampling)
    is not counted.

    Args:
        module: Layer or network
        height: Input feature height H_f (LR height for a MANet)
        width: Input feature width W_f
        include_bias: Also count biases in the parameter column

    Returns:
        CostReport with parameters and FLOPs per convolution
    """
    layers = [
        LayerCost(
            name=conv.name,
            kind=_kind(conv),
            parameters=_layer_parameters(conv, include_bias),
            flops=conv.macs(h, w),
        )
        for conv, h, w in _conv_sites(module, height, width)
    ]
    return CostReport.from_layers(layers, extent=(height, width), include_bias=include_bias)
