import os

import numpy as np
import pytest

from qgram import LookupTable

REFERENCE_BUCKET = 0x3A9
REFERENCE_NGRAM = 0xF3D7

_criteria = []


def pytest_addoption(parser):
    parser.addoption("--run-heavy", action="store_true", help="run the 27-qubit tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-heavy") or os.environ.get("QGRAM_HEAVY") == "1":
        return
    skip = pytest.mark.skip(reason="heavy: pass --run-heavy or set QGRAM_HEAVY=1")
    for item in items:
        if "heavy" in item.keywords:
            item.add_marker(skip)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        number, title = marker.args
        _criteria.append((number, item.name, status, title))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, status, title in sorted(_criteria):
        terminalreporter.write_line(f"{status}  AC{number:<2} {title}  [{name}]")


def random_state(n, rng, dtype=np.complex128):
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return (psi / np.linalg.norm(psi)).astype(dtype)


def single_match_table(k, v, rng, target=None, bucket=None):
    """2**k distinct values below 2**v, so any stored value matches exactly once."""
    values = rng.permutation(1 << v)[: 1 << k].astype(np.int64)
    if target is not None:
        values[values == target] = -1
        free = np.setdiff1d(np.arange(1 << v), values)
        free = free[free != target]
        values[values == -1] = free[0]
        pos = bucket if bucket is not None else int(rng.integers(1 << k))
        values[pos] = target
    return LookupTable(k, v, values)


def reference_table(seed=2020):
    """k=10, v=16 table with 0xF3D7 at bucket 0x3A9; every other entry distinct,
    nonzero and different from the target."""
    rng = np.random.default_rng(seed)
    pool = np.arange(1, 1 << 16)
    pool = pool[pool != REFERENCE_NGRAM]
    values = rng.choice(pool, size=1 << 10, replace=False)
    values[REFERENCE_BUCKET] = REFERENCE_NGRAM
    return LookupTable(10, 16, values, metadata={"fixture": "table-v", "n": 2})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
