"""Finite-difference verification of tape gradients."""

from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from kernel_estimation.tensor.tape import Tape, backward
from kernel_estimation.tensor.tensor import Parameter, Tensor
from kernel_estimation.utils.errors import ContractError
from kernel_estimation.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_EPS = 1e-5
DEFAULT_FLOOR = 1e-8


def relative_error(analytic: float, numeric: float, floor: float = DEFAULT_FLOOR) -> float:
    """|a − n| / max(floor, |a| + |n|)."""
    return abs(analytic - numeric) / max(floor, abs(analytic) + abs(numeric))


def _sample_coordinates(shape: Tuple[int, ...], max_checks: Optional[int], rng: np.random.Generator) -> List[int]:
    size = int(np.prod(shape)) if shape else 1
    if max_checks is None or size <= max_checks:
        return list(range(size))
    return sorted(rng.choice(size, size=max_checks, replace=False).tolist())


def _require_float64(arrays: Sequence[np.ndarray]) -> None:
    for array in arrays:
        if array.dtype != np.float64:
            raise ContractError("grad_check runs at 64-bit precision", details={"dtype": str(array.dtype)})


def grad_check(
    f: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    eps: float = DEFAULT_EPS,
    max_checks: Optional[int] = None,
    seed: int = 0,
    floor: float = DEFAULT_FLOOR,
) -> float:
    """
    Compare tape gradients of ``f`` with central differences.

    Args:
        f: Function of tensors returning a scalar tensor
        inputs: 64-bit arrays, one per argument of ``f``
        eps: Finite-difference step
        max_checks: Coordinates checked per input (all when None)
        seed: Seed for coordinate sampling
        floor: Smallest denominator of the relative error; gradients below it are compared absolutely

    Returns:
        Maximum relative error over the checked coordinates
    """
    arrays = [np.array(a, copy=True) for a in inputs]
    _require_float64(arrays)

    with Tape() as tape:
        leaves = [Tensor(a, requires_grad=True) for a in arrays]
        loss = f(*leaves)
    grads = tape.gradients(loss)
    analytic = [grads.of(leaf) for leaf in leaves]

    def evaluate(values: List[np.ndarray]) -> float:
        return f(*[Tensor(v) for v in values]).item()

    rng = np.random.default_rng(seed)
    worst = 0.0
    for index, base in enumerate(arrays):
        flat_analytic = analytic[index].reshape(-1)
        for coord in _sample_coordinates(base.shape, max_checks, rng):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[index].reshape(-1)[coord] += eps
            minus[index].reshape(-1)[coord] -= eps
            numeric = (evaluate(plus) - evaluate(minus)) / (2.0 * eps)
            worst = max(worst, relative_error(float(flat_analytic[coord]), numeric, floor))

    logger.debug("grad_check", inputs=len(arrays), max_rel_error=worst)
    return worst


def grad_check_parameters(
    loss_fn: Callable[[], Tensor],
    parameters: Sequence[Parameter],
    eps: float = DEFAULT_EPS,
    max_checks: Optional[int] = None,
    seed: int = 0,
    floor: float = DEFAULT_FLOOR,
) -> float:
    """
    Finite-difference check of a loss with respect to network parameters.

    Args:
        loss_fn: Zero-argument function computing the scalar loss from the
            parameters' current values
        parameters: 64-bit parameters to perturb
        eps: Finite-difference step
        max_checks: Coordinates checked per parameter (all when None)
        seed: Seed for coordinate sampling
        floor: Smallest denominator of the relative error; gradients below it are compared absolutely

    Returns:
        Maximum relative error over the checked coordinates
    """
    _require_float64([p.value.data for p in parameters])

    for parameter in parameters:
        parameter.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    backward(loss, tape)
    analytic = {p.name: p.grad.numpy() for p in parameters}

    rng = np.random.default_rng(seed)
    worst = 0.0
    for parameter in parameters:
        original = parameter.value.numpy()
        flat_analytic = analytic[parameter.name].reshape(-1)
        for coord in _sample_coordinates(original.shape, max_checks, rng):
            shifted = original.copy()
            shifted.reshape(-1)[coord] += eps
            parameter.value = shifted
            upper = loss_fn().item()
            shifted.reshape(-1)[coord] -= 2.0 * eps
            parameter.value = shifted
            lower = loss_fn().item()
            numeric = (upper - lower) / (2.0 * eps)
            worst = max(worst, relative_error(float(flat_analytic[coord]), numeric, floor))
        parameter.value = original

    logger.debug("grad_check_parameters", parameters=len(parameters), max_rel_error=worst)
    return worst
