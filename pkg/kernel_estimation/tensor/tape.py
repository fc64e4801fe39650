"""Reverse-mode differentiation tape."""

from contextvars import ContextVar
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from kernel_estimation.tensor.tensor import Parameter, Tensor
from kernel_estimation.utils.errors import ContractError, StateError
from kernel_estimation.utils.logger import get_logger

logger = get_logger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_active_tape: ContextVar[Optional["Tape"]] = ContextVar("active_tape", default=None)


class TapeRecord:
    """One executed operation: its inputs, its output and the adjoint rule."""

    __slots__ = ("op", "inputs", "output", "backward")

    def __init__(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor, backward: BackwardFn) -> None:
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Gradients:
    """Adjoints computed by one backward pass, keyed by tensor identity."""

    def __init__(self, grads: Dict[int, np.ndarray], tensors: Dict[int, Tensor]) -> None:
        self._grads = grads
        self._tensors = tensors

    def of(self, tensor: Tensor) -> np.ndarray:
        """
        Gradient of the loss with respect to ``tensor``.

        Tensors the loss does not depend on get zeros.
        """
        grad = self._grads.get(id(tensor))
        if grad is None or self._tensors.get(id(tensor)) is not tensor:
            return np.zeros(tensor.shape, dtype=tensor.dtype)
        return grad

    def __contains__(self, tensor: Tensor) -> bool:
        return self._tensors.get(id(tensor)) is tensor and id(tensor) in self._grads


class Tape:
    """
    Ordered record of operations executed while the tape is active.

    Use as a context manager; operations on tensors that require gradients
    are recorded only while a tape is active. A tape is single-use: after
    ``backward`` it refuses further recording.
    """

    def __init__(self) -> None:
        self.records: List[TapeRecord] = []
        self.visited = 0
        self._token = None
        self._consumed = False

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        if self._token is not None:
            _active_tape.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.records)

    def record(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor, backward: BackwardFn) -> None:
        """Append one operation."""
        if self._consumed:
            raise StateError("Tape already replayed; start a new tape", details={"op": op})
        self.records.append(TapeRecord(op, inputs, output, backward))

    def gradients(self, loss: Tensor) -> Gradients:
        """
        Replay adjoints in reverse record order.

        Args:
            loss: Scalar produced on this tape

        Returns:
            Gradients of ``loss`` for every recorded tensor it depends on
        """
        if loss.size != 1:
            raise ContractError("backward needs a scalar loss", details={"shape": list(loss.shape)})

        grads: Dict[int, np.ndarray] = {id(loss): np.ones(loss.shape, dtype=loss.dtype)}
        tensors: Dict[int, Tensor] = {id(loss): loss}
        self.visited = 0

        for record in reversed(self.records):
            self.visited += 1
            grad_out = grads.get(id(record.output))
            if grad_out is None:
                continue
            input_grads = record.backward(grad_out)
            for tensor, grad in zip(record.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + grad
                else:
                    grads[key] = grad
                    tensors[key] = tensor

        self._consumed = True
        logger.debug("tape_replayed", records=len(self.records), reached=len(grads))
        return Gradients(grads, tensors)

    def leaves(self) -> Iterable[Tensor]:
        """Recorded inputs that no recorded operation produced."""
        produced = {id(r.output) for r in self.records}
        seen = set()
        for record in self.records:
            for tensor in record.inputs:
                if id(tensor) not in produced and id(tensor) not in seen:
                    seen.add(id(tensor))
                    yield tensor


def current_tape() -> Optional[Tape]:
    """The tape recording in this context, if any."""
    return _active_tape.get()


def backward(loss: Tensor, tape: Optional[Tape] = None) -> Gradients:
    """
    Differentiate ``loss`` and accumulate into every reachable Parameter.

    Args:
        loss: Scalar tensor produced on the tape
        tape: Tape to replay (defaults to the active tape)

    Returns:
        Gradients for all tensors on the tape
    """
    tape = tape or current_tape()
    if tape is None:
        raise ContractError("backward called without an active tape")

    grads = tape.gradients(loss)
    for tensor in tape.leaves():
        parameter: Optional[Parameter] = tensor.parameter
        if parameter is not None and parameter.value is tensor and tensor in grads:
            parameter.accumulate(grads.of(tensor))
    return grads
