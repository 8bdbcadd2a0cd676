"""Exception types shared across the package."""

from __future__ import annotations


class QgramError(Exception):
    """Base class for every error raised by qgram."""


class ArgumentError(QgramError, ValueError):
    """An argument violates an operation's preconditions."""


class StateError(QgramError, RuntimeError):
    """The state vector is not in a form the operation can act on."""


class DegenerateStateError(StateError):
    """The state has zero norm, so it cannot be measured."""


class ResourceError(QgramError, MemoryError):
    """A register would exceed the configured qubit budget."""

    def __init__(self, qubits: int, budget: int, required_bytes: int):
        self.qubits = qubits
        self.budget = budget
        self.required_bytes = required_bytes
        super().__init__(
            f"{qubits} qubits exceed the budget of {budget}; "
            f"the state vector would need {required_bytes} bytes"
        )


class FormatError(QgramError, ValueError):
    """A serialized table is malformed."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")
