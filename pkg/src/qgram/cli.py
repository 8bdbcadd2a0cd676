"""Command line entry point: ``qgram ingest|search|verify|estimate|iterations``.

Exit status is 0 on success (for ``search`` and ``verify``, only when the
n-gram was found), 1 on a miss, 2 on a usage error and 3 when a table is
malformed or a register would exceed the qubit budget. Results go to stdout;
command echo, timings and warnings go to stderr.
"""

from __future__ import annotations

import argparse
import datetime as dt
import shlex
import sys
import time
from contextlib import contextmanager

from .errors import ArgumentError, FormatError, ResourceError
from .grover import grover_search, iteration_count, lookup_estimate
from .ngrams import NgramConfig, build_table, count_corpus, iter_corpus, select_top_k
from .table import classical_find_value, memory_estimate, read_table, serialize

EXIT_OK, EXIT_MISS, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3

_UNITS = ("bytes", "KB", "MB", "GB", "TB", "PB", "EB")


class UsageError(Exception):
    pass


def human_bytes(n: int) -> str:
    value, unit = float(n), 0
    while value >= 1024 and unit < len(_UNITS) - 1:
        value /= 1024
        unit += 1
    if unit == 0:
        return f"{n} bytes"
    return f"~{value:.3g} {_UNITS[unit]}"


class Timer:
    def __init__(self):
        self.phases: list[tuple[str, float]] = []

    @contextmanager
    def phase(self, name):
        start = time.perf_counter()
        yield
        self.phases.append((name, time.perf_counter() - start))

    def report(self):
        text = ", ".join(f"{name} {secs:.3f}s" for name, secs in self.phases)
        print(f"timing: {text}", file=sys.stderr)


def _err(msg):
    print(msg, file=sys.stderr)


def _parse_ngram(text: str, value_bits: int) -> bytes:
    text = text.lower()
    if text.startswith("0x"):
        text = text[2:]
    try:
        data = bytes.fromhex(text)
    except ValueError:
        raise UsageError(f"--ngram {text!r} is not hexadecimal") from None
    width = (value_bits + 7) // 8
    if len(data) != width:
        raise UsageError(f"--ngram must be {width} bytes for a {value_bits}-bit table, got {len(data)}")
    if int.from_bytes(data, "big") >> value_bits:
        raise UsageError(f"--ngram {text} does not fit in {value_bits} bits")
    return data


def _newest_mtime(paths) -> str:
    newest = max((p.stat().st_mtime for p in paths), default=0.0)
    return dt.datetime.fromtimestamp(newest, dt.timezone.utc).isoformat()


def cmd_ingest(args, timer: Timer) -> int:
    config = NgramConfig(
        n=args.n,
        index_bits=args.index_bits,
        benign_policy=args.policy,
        benign_threshold=args.threshold,
    )
    keep = config.buckets if args.keep is None else args.keep
    with timer.phase("scan"):
        mal_files = iter_corpus(args.malicious)
        if not mal_files:
            raise UsageError(f"malicious corpus {args.malicious} holds no files")
        malicious = count_corpus(mal_files, config, "malicious", workers=args.workers)
        benign = None
        ben_files = []
        if args.benign is not None:
            ben_files = iter_corpus(args.benign)
            if not ben_files:
                raise UsageError(f"benign corpus {args.benign} holds no files")
            benign = count_corpus(ben_files, config, "benign", workers=args.workers)
    with timer.phase("select"):
        selection = select_top_k(malicious, benign, keep, config)
        metadata = {
            "n": config.n,
            "malicious": str(args.malicious),
            "benign": None if args.benign is None else str(args.benign),
            "policy": config.benign_policy,
            "threshold": config.benign_threshold,
            "kept": len(selection.records),
            "built": _newest_mtime(mal_files + ben_files),
        }
        build = build_table(selection.records, config.index_bits, config.value_bits, config, metadata)
    with timer.phase("write"):
        with open(args.output, "wb") as fh:
            fh.write(serialize(build.table))

    print(f"malicious files processed: {malicious.files_processed}")
    print(f"malicious windows counted: {malicious.total_windows}")
    if benign is not None:
        print(f"benign files processed: {benign.files_processed}")
        print(f"benign windows counted: {benign.total_windows}")
    for path in malicious.skipped + (benign.skipped if benign else []):
        _err(f"warning: skipped unreadable file {path}")
    print(f"kept n-grams: {len(selection.records)}")
    print(f"collisions: {build.collisions}")
    print(f"shortfall: {selection.shortfall}")
    print(f"table: {args.output}")
    return EXIT_OK


def format_trace(trace, with_iterations: bool = True) -> str:
    """Render a search in the iteration-by-iteration text layout."""
    lines = []
    if with_iterations:
        width = len(str(max(len(trace.per_iteration_probability) - 1, 0)))
        for m, p in enumerate(trace.per_iteration_probability):
            lines.append(f"{m:>{width}}> chance of match:{p:g}")
    lines.append("After measurement (of value, key, or both):")
    lines.append(f"Chance of match:{trace.final_probability:g}")
    lines.append(f"Ngram: {trace.measured_ngram.hex()}")
    lines.append(f"Hash: {trace.measured_hash:x}")
    lines.append(f"Total Iterations: {trace.plan.iterations}")
    return "\n".join(lines) + "\n"


def cmd_search(args, timer: Timer) -> int:
    with timer.phase("load"):
        table = read_table(args.table)
    target = _parse_ngram(args.ngram, table.value_bits)
    if int.from_bytes(target, "big") == 0:
        _err("warning: target equals the empty-bucket sentinel 0; every unpopulated bucket matches")
    with timer.phase("search"):
        trace = grover_search(table, target, precision=args.precision, seed=args.seed)
    if args.json:
        sys.stdout.write(trace.to_json() + "\n")
    else:
        sys.stdout.write(format_trace(trace, args.trace))
    if not trace.matched:
        _err(f"no match: bucket {trace.measured_hash:x} does not hold {target.hex()}")
        return EXIT_OK if args.allow_miss else EXIT_MISS
    return EXIT_OK


def cmd_verify(args, timer: Timer) -> int:
    with timer.phase("load"):
        table = read_table(args.table)
    target = _parse_ngram(args.ngram, table.value_bits)
    with timer.phase("scan"):
        hits = classical_find_value(table, int.from_bytes(target, "big"))
    print(" ".join(format(h, "x") for h in hits))
    return EXIT_OK if hits else EXIT_MISS


def cmd_estimate(args, timer: Timer) -> int:
    if args.qubits < 1:
        raise UsageError("--qubits must be at least 1")
    if args.bytes_per_component not in (4, 8):
        raise UsageError("--bytes-per-component must be 4 or 8")
    total = memory_estimate(args.qubits, args.bytes_per_component)
    print(f"{total} bytes ({human_bytes(total)})")
    return EXIT_OK


def cmd_iterations(args, timer: Timer) -> int:
    if args.index_bits is None and args.entries is None:
        raise UsageError("give --index-bits, --entries, or both")
    if args.index_bits is not None:
        if not 1 <= args.index_bits <= 30:
            raise UsageError("--index-bits must be in [1, 30]")
        print(f"iterations: {iteration_count(args.index_bits)}")
    if args.entries is not None:
        if args.entries < 1:
            raise UsageError("--entries must be positive")
        print(f"estimated lookups: {lookup_estimate(args.entries)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgram", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a lookup table from binary corpora")
    p.add_argument("--malicious", required=True, help="directory of malicious samples")
    p.add_argument("--benign", help="directory of benign samples")
    p.add_argument("-n", type=int, default=2, help="n-gram length in bytes")
    p.add_argument("--index-bits", type=int, default=10, help="table holds 2**K buckets")
    p.add_argument("--keep", type=int, help="n-grams to keep (default: every bucket)")
    p.add_argument("--policy", choices=("exclude", "subtract"), default="exclude")
    p.add_argument("--threshold", type=int, default=1, help="benign count that excludes a bucket")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("search", help="Grover search for the bucket holding an n-gram")
    p.add_argument("--table", required=True)
    p.add_argument("--ngram", required=True, help="n-gram as lowercase hex, e.g. f3d7")
    p.add_argument("--precision", choices=("single", "double"), default="double")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", action="store_true", help="print the per-iteration match chance")
    p.add_argument("--json", action="store_true", help="emit the search trace as JSON")
    p.add_argument("--allow-miss", action="store_true", help="exit 0 even when nothing matched")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("verify", help="classical linear scan for an n-gram")
    p.add_argument("--table", required=True)
    p.add_argument("--ngram", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("estimate", help="state-vector memory for a register size")
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--bytes-per-component", type=int, default=8)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("iterations", help="Grover iteration and lookup counts")
    p.add_argument("--index-bits", type=int)
    p.add_argument("--entries", type=int)
    p.set_defaults(func=cmd_iterations)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    argv = sys.argv[1:] if argv is None else argv
    _err("command: qgram " + " ".join(shlex.quote(a) for a in argv))
    timer = Timer()
    try:
        status = args.func(args, timer)
    except (UsageError, ArgumentError) as exc:
        _err(f"qgram {args.command}: error: {exc}")
        return EXIT_USAGE
    except (ResourceError, FormatError, OSError) as exc:
        _err(f"qgram {args.command}: error: {exc}")
        return EXIT_ERROR
    timer.report()
    return status


if __name__ == "__main__":
    sys.exit(main())
