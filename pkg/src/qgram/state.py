"""Dense state-vector simulator with the operations a Grover key/value search needs.

Qubit 0 is the least significant bit of a basis label. Every kernel works in
place on the amplitude array, one bounded block at a time, so that the largest
temporary never exceeds ``block_elements`` amplitudes regardless of register
size. Permutation kernels only move amplitudes, so their results are
bit-identical for any block size.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import ArgumentError, DegenerateStateError, ResourceError, StateError
from .table import memory_estimate

DEFAULT_QUBIT_BUDGET = 28
BUDGET_ENV = "QGRAM_QUBIT_BUDGET"
BLOCK_ELEMENTS = 1 << 16

PRECISIONS = {
    "single": np.complex64,
    "double": np.complex128,
}
NORM_TOLERANCE = {"single": 1e-6, "double": 1e-12}


def qubit_budget() -> int:
    """Qubit cap from ``QGRAM_QUBIT_BUDGET``, or the default of 28."""
    raw = os.environ.get(BUDGET_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_QUBIT_BUDGET
    try:
        budget = int(raw)
    except ValueError:
        raise ArgumentError(f"{BUDGET_ENV} must be an integer, got {raw!r}") from None
    if budget < 1:
        raise ArgumentError(f"{BUDGET_ENV} must be positive, got {budget}")
    return budget


@dataclass(frozen=True)
class QubitRange:
    """A run of ``length`` qubits starting at qubit ``start``."""

    start: int
    length: int

    def __post_init__(self):
        if self.start < 0 or self.length < 1:
            raise ArgumentError(f"invalid qubit range {self.start}+{self.length}")

    @property
    def stop(self) -> int:
        return self.start + self.length

    @property
    def size(self) -> int:
        return 1 << self.length

    def overlaps(self, other: "QubitRange") -> bool:
        return self.start < other.stop and other.start < self.stop


RangeLike = Union[QubitRange, Sequence[int]]


def as_range(r: RangeLike) -> QubitRange:
    if isinstance(r, QubitRange):
        return r
    start, length = r
    return QubitRange(int(start), int(length))


def _blocks(shape: tuple[int, int, int], limit: int) -> Iterator[tuple[slice, slice, slice]]:
    """Cover a (hi, field, lo) array with blocks of at most ``limit`` elements."""
    hi, field, lo = shape
    everything = slice(None)
    if field * lo <= limit:
        step = max(1, limit // (field * lo))
        for h in range(0, hi, step):
            yield slice(h, h + step), everything, everything
    else:
        step = max(1, limit // field)
        for h in range(hi):
            for l in range(0, lo, step):
                yield slice(h, h + 1), everything, slice(l, l + step)


def _walsh_hadamard(block: np.ndarray, length: int) -> None:
    """Unnormalized Walsh-Hadamard transform along axis 1, in place."""
    hb, field, lb = block.shape
    for q in range(length):
        pairs = block.reshape(hb, field >> (q + 1), 2, 1 << q, lb)
        low = pairs[:, :, 0]
        high = pairs[:, :, 1]
        total = low + high
        np.subtract(low, high, out=high)
        low[...] = total


def _sum_squares(a: np.ndarray, axis=None) -> np.ndarray:
    return np.sum(a.real.astype(np.float64) ** 2 + a.imag.astype(np.float64) ** 2, axis=axis)


class StateVector:
    """Amplitudes of an ``qubit_count``-qubit register.

    Operations mutate the vector in place and return ``self`` so that calls
    can be chained.
    """

    def __init__(self, amplitudes: np.ndarray, precision: str = "double"):
        if precision not in PRECISIONS:
            raise ArgumentError(f"precision must be 'single' or 'double', got {precision!r}")
        amplitudes = np.ascontiguousarray(amplitudes, dtype=PRECISIONS[precision])
        if amplitudes.ndim != 1:
            raise ArgumentError("amplitudes must be one-dimensional")
        n = amplitudes.size.bit_length() - 1
        if amplitudes.size != 1 << n or n < 1:
            raise ArgumentError(f"amplitude count {amplitudes.size} is not a power of two >= 2")
        self.amplitudes = amplitudes
        self.qubit_count = n
        self.precision = precision
        self.block_elements = BLOCK_ELEMENTS

    def __repr__(self):
        return f"StateVector(qubits={self.qubit_count}, precision={self.precision!r})"

    def copy(self) -> "StateVector":
        twin = StateVector(self.amplitudes.copy(), self.precision)
        twin.block_elements = self.block_elements
        return twin

    # -- helpers ---------------------------------------------------------

    def _check(self, r: RangeLike) -> QubitRange:
        r = as_range(r)
        if r.stop > self.qubit_count:
            raise ArgumentError(
                f"qubit range {r.start}+{r.length} exceeds a {self.qubit_count}-qubit register"
            )
        return r

    def _check_qubit(self, qubit: int) -> int:
        if not 0 <= qubit < self.qubit_count:
            raise ArgumentError(f"qubit {qubit} outside a {self.qubit_count}-qubit register")
        return int(qubit)

    def _field(self, r: QubitRange) -> np.ndarray:
        """View with the range's field as the middle axis: (hi, 2**length, lo)."""
        return self.amplitudes.reshape(-1, r.size, 1 << r.start)

    def _fields(self, *ranges: QubitRange) -> np.ndarray:
        """View with one trailing axis per range, in the order given.

        The ranges must be disjoint. Leading axes hold the remaining qubits.
        """
        order = sorted(range(len(ranges)), key=lambda j: ranges[j].start, reverse=True)
        shape = []
        axis_of = [0] * len(ranges)
        top = self.qubit_count
        for j in order:
            r = ranges[j]
            if r.stop < top:
                shape.append(1 << (top - r.stop))
            axis_of[j] = len(shape)
            shape.append(r.size)
            top = r.start
        if top > 0:
            shape.append(1 << top)
        tensor = self.amplitudes.reshape(shape)
        m = len(ranges)
        return np.moveaxis(tensor, axis_of, list(range(-m, 0)))

    def _roll_field(self, r: QubitRange, shift: int) -> None:
        shift %= r.size
        if shift == 0:
            return
        view = self._field(r)
        for blk in _blocks(view.shape, self.block_elements):
            view[blk] = np.roll(view[blk], shift, axis=1)

    # -- gates -----------------------------------------------------------

    def apply_hadamard(self, r: RangeLike) -> "StateVector":
        """Hadamard on every qubit of the range."""
        r = self._check(r)
        view = self._field(r)
        scale = math.sqrt(0.5) ** r.length
        for blk in _blocks(view.shape, self.block_elements):
            block = np.array(view[blk])
            if not block.any():
                continue
            _walsh_hadamard(block, r.length)
            block *= scale
            view[blk] = block
        return self

    def apply_x(self, r: RangeLike) -> "StateVector":
        # Complementing every bit of a field reverses it: r -> 2**len - 1 - r.
        r = self._check(r)
        view = self._field(r)
        for blk in _blocks(view.shape, self.block_elements):
            view[blk] = view[blk][:, ::-1, :].copy()
        return self

    def apply_z(self, qubit: int) -> "StateVector":
        q = self._check_qubit(qubit)
        ones = self._field(QubitRange(q, 1))[:, 1, :]
        np.negative(ones, out=ones)
        return self

    def zero_phase_flip(self, r: RangeLike) -> "StateVector":
        """Negate every amplitude whose ``r`` field is zero."""
        r = self._check(r)
        zeros = self._field(r)[:, 0, :]
        np.negative(zeros, out=zeros)
        return self

    def global_phase_flip(self) -> "StateVector":
        np.negative(self.amplitudes, out=self.amplitudes)
        return self

    def add_constant(self, amount: int, r: RangeLike) -> "StateVector":
        """INC: replace the field value f with (f + amount) mod 2**len."""
        r = self._check(r)
        if not 0 <= amount < r.size:
            raise ArgumentError(f"amount {amount} outside [0, {r.size})")
        self._roll_field(r, amount)
        return self

    def sub_constant(self, amount: int, r: RangeLike) -> "StateVector":
        """DEC: replace the field value f with (f - amount) mod 2**len."""
        r = self._check(r)
        if not 0 <= amount < r.size:
            raise ArgumentError(f"amount {amount} outside [0, {r.size})")
        self._roll_field(r, -amount)
        return self

    # -- indexed memory access --------------------------------------------

    def _memory(self, memory, index: QubitRange, limit: int) -> np.ndarray:
        mem = np.asarray(memory)
        if mem.ndim != 1 or mem.size != index.size:
            raise ArgumentError(
                f"memory must hold exactly {index.size} entries for a "
                f"{index.length}-qubit index, got {mem.size}"
            )
        if mem.size and (not np.issubdtype(mem.dtype, np.integer) or mem.min() < 0 or mem.max() >= limit):
            raise ArgumentError(f"memory entries must be integers in [0, {limit})")
        return mem.astype(np.int64)

    def _disjoint(self, *ranges: QubitRange) -> None:
        for a in range(len(ranges)):
            for b in range(a + 1, len(ranges)):
                if ranges[a].overlaps(ranges[b]):
                    raise ArgumentError("index, value and carry qubits must not overlap")

    def indexed_lda(self, index: RangeLike, value: RangeLike, memory) -> "StateVector":
        """Load ``memory[i]`` into the value register of every component with index ``i``.

        The value register must be |0> wherever the amplitude is nonzero.
        """
        index, value = self._check(index), self._check(value)
        self._disjoint(index, value)
        mem = self._memory(memory, index, value.size)
        view = self._fields(index, value)
        if np.any(view[..., 1:] != 0):
            raise StateError("indexed_lda needs the value register to be |0> in every component")
        for i, m in enumerate(mem):
            if m:
                row = view[..., i, :]
                row[..., m] = row[..., 0]
                row[..., 0] = 0
        return self

    def _indexed_shift(self, index, value, carry, memory, sign: int) -> "StateVector":
        index, value = self._check(index), self._check(value)
        carry_range = QubitRange(self._check_qubit(carry), 1)
        self._disjoint(index, value, carry_range)
        mem = self._memory(memory, index, 1 << value.length)
        # (carry, value) axes adjacent with carry major: flattening them gives
        # the extended field w = value + 2**v * carry.
        view = self._fields(index, carry_range, value)
        width = 2 * value.size
        for i, m in enumerate(mem):
            shift = (sign * int(m)) % width
            if shift == 0:
                continue
            sub = view[..., i, :, :]
            flat = sub.reshape(sub.shape[:-2] + (width,))
            sub[...] = np.roll(flat, shift, axis=-1).reshape(sub.shape)
        return self

    def indexed_adc(self, index: RangeLike, value: RangeLike, carry: int, memory) -> "StateVector":
        """Add ``memory[i]`` into the (carry, value) extended register, mod 2**(v+1)."""
        return self._indexed_shift(index, value, carry, memory, +1)

    def indexed_sbc(self, index: RangeLike, value: RangeLike, carry: int, memory) -> "StateVector":
        """Subtract ``memory[i]`` from the (carry, value) extended register, mod 2**(v+1)."""
        return self._indexed_shift(index, value, carry, memory, -1)

    # -- queries and measurement --------------------------------------------

    def norm(self) -> float:
        """Sum of squared amplitude magnitudes."""
        flat = self.amplitudes
        step = self.block_elements
        return float(sum(_sum_squares(flat[i:i + step]) for i in range(0, flat.size, step)))

    def probability_of(self, r: RangeLike, target: int) -> float:
        """Probability that the ``r`` field reads ``target``."""
        r = self._check(r)
        if not 0 <= target < r.size:
            raise ArgumentError(f"target {target} outside [0, {r.size})")
        sel = self._field(r)[:, target, :]
        step = max(1, self.block_elements // sel.shape[1])
        total = sum(_sum_squares(sel[h:h + step]) for h in range(0, sel.shape[0], step))
        return min(1.0, float(total))

    def distribution(self, r: RangeLike) -> np.ndarray:
        """Marginal probabilities of every value of the ``r`` field."""
        r = self._check(r)
        view = self._field(r)
        probs = np.zeros(r.size)
        for blk in _blocks(view.shape, self.block_elements):
            block = view[blk]
            probs += _sum_squares(block, axis=(0, 2))
        return probs

    def measure(self, r: RangeLike, rng: Union[np.random.Generator, int, None] = None) -> int:
        """Sample the ``r`` field and collapse the state onto the outcome."""
        r = self._check(r)
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        probs = self.distribution(r)
        total = probs.sum()
        if not total > 0 or not np.isfinite(total):
            raise DegenerateStateError("cannot measure a state with zero norm")
        cdf = np.cumsum(probs / total)
        outcome = int(np.searchsorted(cdf, rng.random(), side="right"))
        outcome = min(outcome, r.size - 1)
        while probs[outcome] == 0:
            outcome -= 1
        view = self._field(r)
        view[:, :outcome, :] = 0
        view[:, outcome + 1:, :] = 0
        view[:, outcome, :] *= 1.0 / math.sqrt(probs[outcome])
        return outcome


def create_state(
    qubit_count: int,
    permutation: int = 0,
    precision: str = "double",
    max_qubits: int | None = None,
) -> StateVector:
    """Allocate a register in the computational basis state ``permutation``."""
    budget = qubit_budget() if max_qubits is None else max_qubits
    if precision not in PRECISIONS:
        raise ArgumentError(f"precision must be 'single' or 'double', got {precision!r}")
    if qubit_count < 1:
        raise ArgumentError(f"qubit_count must be at least 1, got {qubit_count}")
    if qubit_count > budget:
        component = np.dtype(PRECISIONS[precision]).itemsize // 2
        raise ResourceError(qubit_count, budget, memory_estimate(qubit_count, component))
    if not 0 <= permutation < 1 << qubit_count:
        raise ArgumentError(f"permutation {permutation} outside [0, 2**{qubit_count})")
    amps = np.zeros(1 << qubit_count, dtype=PRECISIONS[precision])
    amps[permutation] = 1
    return StateVector(amps, precision)
