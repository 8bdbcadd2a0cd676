"""Hash-bucket to n-gram lookup table: binary format, classical search, memory model.

File layout, all integers little-endian::

    offset  size  field
    0       4     magic b"QGT1"
    4       1     format version (1)
    5       1     index_bits k
    6       1     value_bits v
    7       8     hash base
    15      8     hash modulus
    23      4     metadata length L
    27      L     metadata, UTF-8 JSON
    27+L    ...   2**k entries, ceil(v/8) bytes each
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ArgumentError, FormatError

MAGIC = b"QGT1"
VERSION = 1
MAX_INDEX_BITS = 32
MAX_VALUE_BITS = 64
_HEADER = struct.Struct("<4sBBBQQI")


def memory_estimate(qubits: int, bytes_per_component: int = 8) -> int:
    """Bytes needed for a dense ``qubits``-qubit state vector.

    Each amplitude stores a real and an imaginary component of
    ``bytes_per_component`` bytes.
    """
    if qubits < 1:
        raise ArgumentError(f"qubits must be at least 1, got {qubits}")
    if bytes_per_component not in (4, 8):
        raise ArgumentError(f"bytes_per_component must be 4 or 8, got {bytes_per_component}")
    return (1 << qubits) * 2 * bytes_per_component


def entry_width(value_bits: int) -> int:
    return (value_bits + 7) // 8


@dataclass(frozen=True, eq=False)
class LookupTable:
    index_bits: int
    value_bits: int
    entries: np.ndarray
    hash_base: int = 257
    hash_modulus: int = (1 << 61) - 1
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        k, v = self.index_bits, self.value_bits
        if not 1 <= k <= MAX_INDEX_BITS:
            raise ArgumentError(f"index_bits must be in [1, {MAX_INDEX_BITS}], got {k}")
        if not 1 <= v <= MAX_VALUE_BITS:
            raise ArgumentError(f"value_bits must be in [1, {MAX_VALUE_BITS}], got {v}")
        entries = np.array(self.entries, dtype=np.uint64)
        if entries.shape != (1 << k,):
            raise ArgumentError(f"expected {1 << k} entries, got {entries.size}")
        if v < 64 and entries.size and int(entries.max()) >> v:
            raise ArgumentError(f"an entry does not fit in {v} bits")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    def __eq__(self, other):
        if not isinstance(other, LookupTable):
            return NotImplemented
        return (
            self.index_bits == other.index_bits
            and self.value_bits == other.value_bits
            and self.hash_base == other.hash_base
            and self.hash_modulus == other.hash_modulus
            and self.metadata == other.metadata
            and np.array_equal(self.entries, other.entries)
        )

    def __len__(self):
        return self.entries.size

    def __getitem__(self, bucket: int) -> int:
        return int(self.entries[bucket])

    @property
    def value_bytes(self) -> int:
        return entry_width(self.value_bits)

    def count(self, value: int) -> int:
        return int(np.count_nonzero(self.entries == np.uint64(value)))


def classical_find_value(table: LookupTable, value: int) -> list[int]:
    """All buckets holding ``value``, ascending. A plain linear scan."""
    if not 0 <= value < 1 << table.value_bits:
        raise ArgumentError(f"value {value} does not fit in {table.value_bits} bits")
    return [i for i, entry in enumerate(table.entries.tolist()) if entry == value]


def serialize(table: LookupTable) -> bytes:
    meta = json.dumps(table.metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    header = _HEADER.pack(
        MAGIC, VERSION, table.index_bits, table.value_bits,
        table.hash_base, table.hash_modulus, len(meta),
    )
    width = table.value_bytes
    raw = table.entries.astype("<u8").view(np.uint8).reshape(-1, 8)[:, :width]
    return header + meta + raw.tobytes()


def deserialize(data: bytes) -> LookupTable:
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("bad magic, expected b'QGT1'", 0)
    if len(data) < _HEADER.size:
        raise FormatError("truncated header", len(data))
    _, version, k, v, base, modulus, meta_len = _HEADER.unpack_from(data)
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}", 4)
    if not 1 <= k <= MAX_INDEX_BITS:
        raise FormatError(f"index_bits {k} out of range", 5)
    if not 1 <= v <= MAX_VALUE_BITS:
        raise FormatError(f"value_bits {v} out of range", 6)
    pos = _HEADER.size
    if len(data) < pos + meta_len:
        raise FormatError("truncated metadata", len(data))
    try:
        metadata = json.loads(data[pos:pos + meta_len].decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"metadata is not UTF-8 JSON: {exc}", pos) from None
    if not isinstance(metadata, dict):
        raise FormatError("metadata must be a JSON object", pos)
    pos += meta_len
    width = entry_width(v)
    expected = pos + (1 << k) * width
    if len(data) < expected:
        raise FormatError(f"truncated entries, expected {expected} bytes", len(data))
    if len(data) > expected:
        raise FormatError("trailing bytes after entries", expected)
    raw = np.frombuffer(data, dtype=np.uint8, count=(1 << k) * width, offset=pos)
    padded = np.zeros((1 << k, 8), dtype=np.uint8)
    padded[:, :width] = raw.reshape(-1, width)
    entries = padded.view("<u8").reshape(-1)
    if v < 64 and int(entries.max()) >> v:
        bad = int(np.argmax(entries >> np.uint64(v)))
        raise FormatError(f"entry {bad} does not fit in {v} bits", pos + bad * width)
    return LookupTable(k, v, entries, base, modulus, metadata)


def write_table(table: LookupTable, path) -> None:
    Path(path).write_bytes(serialize(table))


def read_table(path) -> LookupTable:
    return deserialize(Path(path).read_bytes())
