"""Byte n-gram extraction, Rabin-Karp bucketing and top-k selection.

Counting is exact: every window is tallied under its exact n-gram, and a
bucket's count is the sum over the n-grams hashing into it. The most frequent
n-gram of a bucket (ties to the lexicographically smallest) represents it in
the lookup table.
"""

from __future__ import annotations

import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Union

import numpy as np

from .errors import ArgumentError
from .table import LookupTable

log = logging.getLogger(__name__)

MERSENNE_61 = (1 << 61) - 1
POLICIES = ("exclude", "subtract")
LABELS = ("malicious", "benign")

ByteSource = Union[bytes, bytearray, str, os.PathLike]


@dataclass(frozen=True)
class NgramConfig:
    n: int
    index_bits: int
    hash_base: int = 257
    hash_modulus: int = MERSENNE_61
    benign_policy: str = "exclude"
    benign_threshold: int = 1

    def __post_init__(self):
        from sympy import isprime

        if self.n < 1:
            raise ArgumentError(f"n must be at least 1, got {self.n}")
        if not 1 <= self.index_bits <= 32:
            raise ArgumentError(f"index_bits must be in [1, 32], got {self.index_bits}")
        if not 1 < self.hash_base < self.hash_modulus:
            raise ArgumentError("hash_base must satisfy 1 < base < modulus")
        if self.hash_modulus >= 1 << 64 or not isprime(self.hash_modulus):
            raise ArgumentError(f"hash_modulus {self.hash_modulus} must be a prime below 2**64")
        if self.benign_policy not in POLICIES:
            raise ArgumentError(f"benign_policy must be one of {POLICIES}, got {self.benign_policy!r}")

    @property
    def value_bits(self) -> int:
        return 8 * self.n

    @property
    def buckets(self) -> int:
        return 1 << self.index_bits

    @cached_property
    def lead_power(self) -> int:
        """base**(n-1) mod modulus, the weight of a window's first byte."""
        return pow(self.hash_base, self.n - 1, self.hash_modulus)


def polynomial_hash(data: bytes, config: NgramConfig) -> int:
    """Rabin-Karp state of ``data``: sum data[i] * base**(n-1-i) mod modulus."""
    h = 0
    base, mod = config.hash_base, config.hash_modulus
    for byte in data:
        h = (h * base + byte) % mod
    return h


def hash_ngram(data: bytes, config: NgramConfig) -> int:
    """Bucket of one n-gram."""
    if len(data) != config.n:
        raise ArgumentError(f"expected a {config.n}-byte n-gram, got {len(data)} bytes")
    return polynomial_hash(data, config) & (config.buckets - 1)


def roll_hash(prev: int, outgoing: int, incoming: int, config: NgramConfig) -> int:
    """Slide the window one byte: drop ``outgoing`` at the front, append ``incoming``."""
    mod = config.hash_modulus
    h = (prev - outgoing * config.lead_power) % mod
    return (h * config.hash_base + incoming) % mod


def scan_stream(data: bytes, config: NgramConfig) -> Iterator[tuple[bytes, int]]:
    """Every length-n window at stride 1, with its bucket."""
    n = config.n
    if len(data) < n:
        return
    data = bytes(data)
    mask = config.buckets - 1
    base, mod, lead = config.hash_base, config.hash_modulus, config.lead_power
    h = polynomial_hash(data[:n], config)
    yield data[:n], h & mask
    for i in range(n, len(data)):
        h = ((h - data[i - n] * lead) * base + data[i]) % mod
        yield data[i - n + 1:i + 1], h & mask


def window_count(length: int, n: int) -> int:
    return max(0, length - n + 1)


def _window_counts(data: bytes, n: int) -> Counter:
    """Occurrences of each distinct n-gram in ``data``."""
    if n > 8:
        return Counter(data[i:i + n] for i in range(window_count(len(data), n)))
    if len(data) < n:
        return Counter()
    arr = np.frombuffer(data, dtype=np.uint8).astype(np.uint64)
    m = len(arr) - n + 1
    packed = np.zeros(m, dtype=np.uint64)
    for i in range(n):
        packed = (packed << np.uint64(8)) | arr[i:i + m]
    values, counts = np.unique(packed, return_counts=True)
    return Counter({int(v).to_bytes(n, "big"): int(c) for v, c in zip(values, counts)})


@dataclass
class BucketCounter:
    config: NgramConfig
    label: str = "malicious"
    ngram_counts: Counter = field(default_factory=Counter)
    bucket_counts: Counter = field(default_factory=Counter)
    total_windows: int = 0
    files_processed: int = 0
    skipped: list[str] = field(default_factory=list)

    def add_bytes(self, data: bytes) -> None:
        for gram, count in _window_counts(data, self.config.n).items():
            self.ngram_counts[gram] += count
            self.bucket_counts[hash_ngram(gram, self.config)] += count
        self.total_windows += window_count(len(data), self.config.n)
        self.files_processed += 1

    def merge(self, other: "BucketCounter") -> "BucketCounter":
        if other.config != self.config:
            raise ArgumentError("cannot merge counters built with different configs")
        self.ngram_counts.update(other.ngram_counts)
        self.bucket_counts.update(other.bucket_counts)
        self.total_windows += other.total_windows
        self.files_processed += other.files_processed
        self.skipped.extend(other.skipped)
        return self

    def count(self, bucket: int) -> int:
        return self.bucket_counts.get(bucket, 0)

    def representatives(self) -> dict[int, bytes]:
        """Most frequent exact n-gram per bucket; ties go to the smallest bytes."""
        best: dict[int, tuple[int, bytes]] = {}
        for gram, count in self.ngram_counts.items():
            bucket = hash_ngram(gram, self.config)
            cur = best.get(bucket)
            if cur is None or count > cur[0] or (count == cur[0] and gram < cur[1]):
                best[bucket] = (count, gram)
        return {b: gram for b, (_, gram) in best.items()}

    def __eq__(self, other):
        if not isinstance(other, BucketCounter):
            return NotImplemented
        return (
            self.config == other.config
            and self.ngram_counts == other.ngram_counts
            and self.bucket_counts == other.bucket_counts
            and self.total_windows == other.total_windows
            and self.files_processed == other.files_processed
        )


def iter_corpus(directory) -> list[Path]:
    """Regular files under ``directory``, recursively, in sorted order."""
    root = Path(directory)
    if not root.is_dir():
        raise ArgumentError(f"corpus directory {root} does not exist")
    return sorted(p for p in root.rglob("*") if p.is_file())


def _read(source: ByteSource) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    with open(source, "rb") as fh:
        return fh.read()


def _count_one(args) -> BucketCounter:
    source, config, label = args
    counter = BucketCounter(config, label)
    try:
        data = _read(source)
    except OSError as exc:
        log.warning("skipping unreadable file %s: %s", source, exc)
        counter.skipped.append(str(source))
        return counter
    counter.add_bytes(data)
    return counter


def count_corpus(
    files: Iterable[ByteSource],
    config: NgramConfig,
    label: str = "malicious",
    workers: int = 1,
) -> BucketCounter:
    """Tally n-grams over every file. Unreadable files are skipped and listed."""
    if label not in LABELS:
        raise ArgumentError(f"label must be one of {LABELS}, got {label!r}")
    files = list(files)
    if not files:
        raise ArgumentError(f"the {label} corpus is empty")
    jobs = [(f, config, label) for f in files]
    total = BucketCounter(config, label)
    if workers > 1 and len(files) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_count_one, jobs))
    else:
        parts = map(_count_one, jobs)
    for part in parts:
        total.merge(part)
    return total


@dataclass(frozen=True)
class NgramRecord:
    ngram: bytes
    bucket: int
    malicious_count: int
    benign_count: int = 0


class Selection(NamedTuple):
    records: list[NgramRecord]
    shortfall: int


def select_top_k(
    malicious: BucketCounter,
    benign: BucketCounter | None,
    k_keep: int,
    config: NgramConfig,
) -> Selection:
    """The ``k_keep`` best buckets after applying the benign policy.

    ``exclude`` drops buckets with at least ``benign_threshold`` benign hits
    and ranks by malicious count; ``subtract`` ranks by malicious minus benign
    count. Ties go to the smaller bucket, then the smaller n-gram.
    """
    if not 0 <= k_keep <= config.buckets:
        raise ArgumentError(f"k_keep must be in [0, {config.buckets}], got {k_keep}")
    benign_counts = benign.bucket_counts if benign is not None else Counter()
    records = []
    for bucket, gram in malicious.representatives().items():
        rec = NgramRecord(gram, bucket, malicious.count(bucket), benign_counts.get(bucket, 0))
        if config.benign_policy == "exclude" and rec.benign_count >= config.benign_threshold:
            continue
        records.append(rec)

    if config.benign_policy == "subtract":
        def score(r):
            return r.malicious_count - r.benign_count
    else:
        def score(r):
            return r.malicious_count

    records.sort(key=lambda r: (-score(r), r.bucket, r.ngram))
    kept = records[:k_keep]
    return Selection(kept, k_keep - len(kept))


class TableBuild(NamedTuple):
    table: LookupTable
    collisions: int


def build_table(
    records: Iterable[NgramRecord],
    index_bits: int,
    value_bits: int,
    config: NgramConfig | None = None,
    metadata: dict | None = None,
) -> TableBuild:
    """Place each record's n-gram, as a big-endian integer, at its bucket.

    Empty buckets hold 0. When two records share a bucket the higher
    malicious count wins, then the smaller n-gram.
    """
    size = 1 << index_bits
    chosen: dict[int, NgramRecord] = {}
    collisions = 0
    for rec in records:
        if not 0 <= rec.bucket < size:
            raise ArgumentError(f"bucket {rec.bucket} outside a {index_bits}-bit table")
        if int.from_bytes(rec.ngram, "big") >> value_bits:
            raise ArgumentError(f"n-gram {rec.ngram.hex()} does not fit in {value_bits} bits")
        cur = chosen.get(rec.bucket)
        if cur is None:
            chosen[rec.bucket] = rec
            continue
        collisions += 1
        if rec.malicious_count > cur.malicious_count or (
            rec.malicious_count == cur.malicious_count and rec.ngram < cur.ngram
        ):
            chosen[rec.bucket] = rec
    entries = [0] * size
    for bucket, rec in chosen.items():
        entries[bucket] = int.from_bytes(rec.ngram, "big")
    kwargs = {}
    if config is not None:
        kwargs = {"hash_base": config.hash_base, "hash_modulus": config.hash_modulus}
    table = LookupTable(index_bits, value_bits, entries, metadata=dict(metadata or {}), **kwargs)
    return TableBuild(table, collisions)

