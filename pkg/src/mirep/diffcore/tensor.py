"""Dense tensors with reverse-mode automatic differentiation on an explicit tape.

A forward pass runs inside a ``with Tape():`` block.  Every primitive that
touches a tensor requiring gradients appends one record to the tape; calling
:func:`backward` on a scalar loss replays the records in reverse.  Replay
order is the recording order reversed, so gradient accumulation is
deterministic and repeated runs are bit-identical.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import ContractError

_TAPE_STACK: list["Tape"] = []


def active_tape() -> "Tape | None":
    """The innermost open tape, or None outside any ``with Tape():`` block."""
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class DiffTensor:
    """A dense float array plus an optional gradient buffer.

    ``data`` is treated as immutable once the tensor is produced; optimizers
    build new arrays rather than writing through views held by tape records.
    """

    __slots__ = ("data", "grad", "requires_grad", "tape")

    def __init__(self, data: np.ndarray, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad = self.grad + g

    def __repr__(self) -> str:
        flag = ", requires_grad" if self.requires_grad else ""
        return f"DiffTensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"


def as_tensor(value, dtype=None) -> DiffTensor:
    """Wrap an array-like as a constant DiffTensor (no-op on tensors)."""
    if isinstance(value, DiffTensor):
        return value
    arr = np.asarray(value, dtype=dtype)
    return DiffTensor(arr)


class Parameter:
    """A named trainable tensor with its own weight-decay coefficient.

    ``l2_coefficient`` is nonzero for convolution and dense weights and zero
    for biases and normalization scale/shift, so the penalty in the training
    objective touches exactly the weight matrices.
    """

    __slots__ = ("name", "tensor", "l2_coefficient")

    def __init__(self, name: str, value: np.ndarray, l2_coefficient: float = 0.0):
        self.name = name
        self.tensor = DiffTensor(np.asarray(value), requires_grad=True)
        self.l2_coefficient = float(l2_coefficient)

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @data.setter
    def data(self, value: np.ndarray) -> None:
        self.tensor.data = np.asarray(value, dtype=self.tensor.data.dtype)

    @property
    def grad(self) -> np.ndarray | None:
        return self.tensor.grad

    def zero_grad(self) -> None:
        self.tensor.grad = None

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.tensor.data.shape})"


class Tape:
    """Ordered record of primitive operations for one forward pass."""

    def __init__(self):
        self.records: list[tuple[DiffTensor, tuple, Callable]] = []

    def record(self, output: DiffTensor, inputs: tuple, backward_fn: Callable) -> None:
        """Append one record.

        ``inputs`` holds the DiffTensors whose gradients the op contributes
        to (entries may be None for inputs that need no gradient).
        ``backward_fn`` maps the output gradient to a tuple of input
        gradients aligned with ``inputs``.
        """
        output.tape = self
        self.records.append((output, inputs, backward_fn))

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> bool:
        _TAPE_STACK.pop()
        return False

    def __len__(self) -> int:
        return len(self.records)


def backward(loss: DiffTensor) -> dict[int, np.ndarray]:
    """Run reverse accumulation from a scalar loss.

    Populates ``.grad`` on every tensor along the path and returns a map
    from ``id(tensor)`` to its gradient for the tensors that received one.
    """
    if loss.data.size != 1:
        raise ContractError(
            f"backward expects a scalar loss, got shape {loss.data.shape}"
        )
    loss.grad = np.ones_like(loss.data)
    tape = loss.tape
    touched: dict[int, np.ndarray] = {id(loss): loss.grad}
    if tape is None:
        return touched
    for output, inputs, backward_fn in reversed(tape.records):
        if output.grad is None:
            continue
        grads = backward_fn(output.grad)
        for tensor, g in zip(inputs, grads):
            if tensor is None or g is None:
                continue
            tensor.accumulate_grad(g)
            touched[id(tensor)] = tensor.grad
    return touched
