"""Adam optimizer with bias-corrected moments."""

from typing import Dict, Sequence

import numpy as np
from pydantic import BaseModel, Field

from kernel_estimation.tensor.tensor import Parameter, Tensor
from kernel_estimation.utils.errors import DimensionError, InvalidArgumentError


class AdamConfig(BaseModel):
    """Adam hyperparameters."""
    lr: float = Field(default=1e-4, ge=0.0, description="Learning rate")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0, description="First-moment decay")
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0, description="Second-moment decay")
    eps: float = Field(default=1e-8, gt=0.0, description="Denominator floor")


class AdamState:
    """Per-parameter moments and the shared step counter."""

    def __init__(self, config: AdamConfig) -> None:
        self.config = config
        self.step = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def moments_for(self, parameter: Parameter) -> tuple:
        """Return (m, v) for ``parameter``, creating zeros on first use."""
        if parameter.name not in self.m:
            self.m[parameter.name] = np.zeros(parameter.shape, dtype=parameter.dtype)
            self.v[parameter.name] = np.zeros(parameter.shape, dtype=parameter.dtype)
        m, v = self.m[parameter.name], self.v[parameter.name]
        if m.shape != parameter.shape:
            raise DimensionError(
                f"Optimizer moments do not match parameter {parameter.name}",
                details={"moments": list(m.shape), "parameter": list(parameter.shape)},
            )
        return m, v


def adam_step(
    params: Sequence[Parameter],
    grads: Sequence[np.ndarray],
    state: AdamState,
) -> None:
    """
    Apply one bias-corrected Adam update in place.

    Args:
        params: Parameters to update
        grads: Gradients, one per parameter and of identical shape
        state: Moments and step counter (incremented by exactly one)
    """
    if len(params) != len(grads):
        raise InvalidArgumentError("params and grads differ in length", argument="grads")
    if state.step < 0:
        raise InvalidArgumentError("Adam step counter must be non-negative", argument="state")

    cfg = state.config
    step = state.step + 1
    correction1 = 1.0 - cfg.beta1 ** step
    correction2 = 1.0 - cfg.beta2 ** step

    for parameter, grad in zip(params, grads):
        if grad.shape != parameter.shape:
            raise DimensionError(
                f"Gradient shape mismatch for {parameter.name}",
                details={"expected": list(parameter.shape), "got": list(grad.shape)},
            )
        m, v = state.moments_for(parameter)
        dtype = parameter.dtype
        g = grad.astype(dtype, copy=False)
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        state.m[parameter.name] = m.astype(dtype, copy=False)
        state.v[parameter.name] = v.astype(dtype, copy=False)

        m_hat = m / correction1
        v_hat = v / correction2
        update = cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        parameter.value = Tensor((parameter.value.data - update).astype(dtype, copy=False))

    state.step = step


class Adam:
    """Adam over a fixed, ordered set of parameters."""

    def __init__(self, parameters: Sequence[Parameter], config: AdamConfig) -> None:
        """
        Initialize optimizer.

        Args:
            parameters: Parameters to optimize (names must be unique)
            config: Hyperparameters
        """
        names = [p.name for p in parameters]
        if len(set(names)) != len(names):
            raise InvalidArgumentError("Parameter names must be unique", argument="parameters")
        self.parameters = list(parameters)
        self.state = AdamState(config)

    @property
    def lr(self) -> float:
        return self.state.config.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.config = self.state.config.model_copy(update={"lr": float(value)})

    def zero_grad(self) -> None:
        for parameter in self.parameters:
            parameter.zero_grad()

    def step(self) -> None:
        """Update every parameter from its accumulated gradient."""
        adam_step(self.parameters, [p.grad.data for p in self.parameters], self.state)
