"""Grover search over a classical lookup table, by value.

The register is laid out as [value | index | carry], value at qubit 0, so
the carry sits at qubit ``index_bits + value_bits``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import ArgumentError
from .state import QubitRange, RangeLike, StateVector, create_state, qubit_budget
from .table import LookupTable

MAX_INDEX_BITS = 30


def rotation_angle(index_bits: int, matches: int = 1) -> float:
    """Grover angle arcsin(sqrt(matches / 2**index_bits))."""
    return math.asin(math.sqrt(matches / 2.0 ** index_bits))


def iteration_count(index_bits: int) -> int:
    """Optimal iteration count floor(pi / (4 theta)) for a single match."""
    if not 1 <= index_bits <= MAX_INDEX_BITS:
        raise ArgumentError(f"index_bits must be in [1, {MAX_INDEX_BITS}], got {index_bits}")
    # the guard keeps exact integers (k=1 gives 0.999...) from flooring down
    return math.floor(math.pi / (4 * rotation_angle(index_bits)) + 1e-9)


def lookup_estimate(num_entries: int) -> int:
    """ceil(sqrt(num_entries)), the usual back-of-envelope lookup count."""
    if num_entries < 1:
        raise ArgumentError(f"num_entries must be positive, got {num_entries}")
    root = math.isqrt(num_entries)
    return root if root * root == num_entries else root + 1


def analytic_probability(index_bits: int, completed_iterations: int, matches: int = 1) -> float:
    """sin^2((2m + 1) theta): success probability after m Grover iterations."""
    if completed_iterations < 0:
        raise ArgumentError("completed_iterations must be non-negative")
    theta = rotation_angle(index_bits, matches)
    return math.sin((2 * completed_iterations + 1) * theta) ** 2


@dataclass(frozen=True)
class GroverPlan:
    index_bits: int
    value_bits: int
    carry_index: int
    total_qubits: int
    iterations: int
    theta: float

    @classmethod
    def for_table(cls, index_bits: int, value_bits: int) -> "GroverPlan":
        if not 1 <= index_bits <= MAX_INDEX_BITS:
            raise ArgumentError(f"index_bits must be in [1, {MAX_INDEX_BITS}], got {index_bits}")
        if value_bits < 1:
            raise ArgumentError(f"value_bits must be positive, got {value_bits}")
        return cls(
            index_bits=index_bits,
            value_bits=value_bits,
            carry_index=index_bits + value_bits,
            total_qubits=index_bits + value_bits + 1,
            iterations=iteration_count(index_bits),
            theta=rotation_angle(index_bits),
        )

    @property
    def value_range(self) -> QubitRange:
        return QubitRange(0, self.value_bits)

    @property
    def index_range(self) -> QubitRange:
        return QubitRange(self.value_bits, self.index_bits)


@dataclass
class SearchTrace:
    plan: GroverPlan
    target: int
    per_iteration_probability: list[float]
    measured_hash: int
    measured_ngram: bytes
    matched: bool
    multiplicity: int
    final_probability: float = 1.0
    precision: str = "double"
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        width = len(self.measured_ngram)
        return {
            "plan": asdict(self.plan),
            "target": format(self.target, f"0{2 * width}x"),
            "per_iteration_probability": list(self.per_iteration_probability),
            "measured_hash": format(self.measured_hash, "x"),
            "measured_ngram": self.measured_ngram.hex(),
            "matched": self.matched,
            "multiplicity": self.multiplicity,
            "final_probability": self.final_probability,
            "precision": self.precision,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchTrace":
        return cls(
            plan=GroverPlan(**doc["plan"]),
            target=int(doc["target"], 16),
            per_iteration_probability=[float(p) for p in doc["per_iteration_probability"]],
            measured_hash=int(doc["measured_hash"], 16),
            measured_ngram=bytes.fromhex(doc["measured_ngram"]),
            matched=bool(doc["matched"]),
            multiplicity=int(doc["multiplicity"]),
            final_probability=float(doc["final_probability"]),
            precision=doc["precision"],
            seed=doc["seed"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SearchTrace":
        return cls.from_dict(json.loads(text))


def tag_value(sv: StateVector, value: RangeLike, target: int) -> StateVector:
    """Phase oracle: negate every component whose value field equals ``target``."""
    value = sv._check(value)
    if not 0 <= target < value.size:
        raise ArgumentError(f"target {target} does not fit in {value.length} bits")
    sv.sub_constant(target, value)
    sv.zero_phase_flip(value)
    sv.add_constant(target, value)
    return sv


def diffuse(sv: StateVector, index: RangeLike) -> StateVector:
    """Reflect the index register about its uniform superposition (2|s><s| - I)."""
    sv.apply_hadamard(index)
    sv.zero_phase_flip(index)
    sv.apply_hadamard(index)
    sv.global_phase_flip()
    return sv


def _target_value(target: Union[bytes, int], value_bits: int) -> int:
    if isinstance(target, (bytes, bytearray)):
        width = (value_bits + 7) // 8
        if len(target) != width:
            raise ArgumentError(
                f"target is {len(target)} bytes but table values are {value_bits} bits ({width} bytes)"
            )
        target = int.from_bytes(target, "big")
    if not 0 <= target < 1 << value_bits:
        raise ArgumentError(f"target {target:#x} does not fit in {value_bits} bits")
    return int(target)


def grover_search(
    table: LookupTable,
    target: Union[bytes, int],
    *,
    precision: str = "double",
    seed: Optional[int] = None,
    iterations: Optional[int] = None,
    max_qubits: Optional[int] = None,
    on_iteration: Optional[Callable[[int, float], None]] = None,
) -> SearchTrace:
    """Find the bucket holding ``target`` by amplitude amplification.

    Each iteration tags the target value, uncomputes the value register with
    an indexed subtract, diffuses the index register and reloads the values
    with an indexed add. The match probability after every iteration is
    recorded; ``on_iteration(m, p)`` is called as each one completes.
    Measurement reads the value register first, then the index register.
    """
    value = _target_value(target, table.value_bits)
    plan = GroverPlan.for_table(table.index_bits, table.value_bits)
    budget = qubit_budget() if max_qubits is None else max_qubits
    rounds = plan.iterations if iterations is None else iterations

    sv = create_state(plan.total_qubits, 0, precision=precision, max_qubits=budget)
    idx, val, carry = plan.index_range, plan.value_range, plan.carry_index
    memory = table.entries.astype(np.int64)

    sv.apply_hadamard(idx)
    sv.indexed_lda(idx, val, memory)
    history = []
    for m in range(rounds):
        tag_value(sv, val, value)
        sv.indexed_sbc(idx, val, carry, memory)
        diffuse(sv, idx)
        sv.indexed_adc(idx, val, carry, memory)
        p = sv.probability_of(val, value)
        history.append(p)
        if on_iteration is not None:
            on_iteration(m, p)

    rng = np.random.default_rng(seed)
    measured_value = sv.measure(val, rng)
    measured_hash = sv.measure(idx, rng)
    width = table.value_bytes
    return SearchTrace(
        plan=plan,
        target=value,
        per_iteration_probability=history,
        measured_hash=measured_hash,
        measured_ngram=measured_value.to_bytes(width, "big"),
        matched=table[measured_hash] == value,
        multiplicity=table.count(value),
        final_probability=sv.probability_of(val, value),
        precision=precision,
        seed=seed,
    )
