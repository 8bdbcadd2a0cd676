import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import dense
from conftest import random_state, single_match_table
from qgram import (
    ArgumentError,
    GroverPlan,
    LookupTable,
    ResourceError,
    SearchTrace,
    StateVector,
    analytic_probability,
    classical_find_value,
    create_state,
    diffuse,
    grover_search,
    iteration_count,
    lookup_estimate,
    tag_value,
)


# Frozen from floor(pi / (4 asin(2**(-k/2)))), evaluated independently.
@pytest.mark.parametrize("k, expected", [(1, 1), (2, 1), (6, 6), (10, 25)])
def test_iteration_count(k, expected):
    assert iteration_count(k) == expected


def test_iteration_count_range():
    for bad in (0, 31):
        with pytest.raises(ArgumentError):
            iteration_count(bad)


def test_iterations_scale_like_sqrt():
    ratios = [iteration_count(k) / math.sqrt(2**k) for k in range(4, 15)]
    for k, r in zip(range(4, 15), ratios):
        closed = math.floor(math.pi / (4 * math.asin(2 ** (-k / 2)))) / math.sqrt(2**k)
        assert r == closed
    assert abs(ratios[-1] - math.pi / 4) < abs(ratios[0] - math.pi / 4)
    assert abs(ratios[-1] - math.pi / 4) < 0.01


@pytest.mark.parametrize("n, expected", [(64, 8), (2048, 46), (1024, 32), (256, 16)])
def test_lookup_estimate(n, expected):
    assert lookup_estimate(n) == expected


def test_analytic_probability():
    # sin^2(3 asin(1/32)) evaluated with mpmath-free closed form
    assert analytic_probability(10, 1) == pytest.approx(0.008766189217567444, abs=1e-15)
    assert analytic_probability(10, 0) == pytest.approx(1 / 1024, abs=1e-15)
    assert analytic_probability(2, 1) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ArgumentError):
        analytic_probability(4, -1)


def test_plan_layout():
    plan = GroverPlan.for_table(10, 16)
    assert (plan.carry_index, plan.total_qubits, plan.iterations) == (26, 27, 25)
    assert plan.theta == pytest.approx(math.asin(1 / 32))
    assert 0 < GroverPlan.for_table(1, 1).theta <= math.pi / 2


# -- oracle ----------------------------------------------------------------------

def loaded_state():
    sv = create_state(6, 0).apply_hadamard((3, 2))
    return sv.indexed_lda((3, 2), (0, 3), [7, 3, 5, 1])


def test_tag_value_negates_only_target():
    sv = loaded_state()
    before = sv.amplitudes.copy()
    tag_value(sv, (0, 3), 5)
    target_label = (2 << 3) | 5
    for i in range(64):
        want = -before[i] if i == target_label else before[i]
        assert sv.amplitudes[i] == want


def test_tag_value_absent_target_is_identity():
    sv = loaded_state()
    before = sv.amplitudes.copy()
    tag_value(sv, (0, 3), 6)
    assert np.array_equal(sv.amplitudes, before)


def test_tag_value_range_check():
    with pytest.raises(ArgumentError):
        tag_value(loaded_state(), (0, 3), 8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 10), data=st.data())
def test_tag_value_matches_dense(seed, n, data):
    rng = np.random.default_rng(seed)
    start = data.draw(st.integers(0, n - 1))
    length = data.draw(st.integers(1, n - start))
    target = data.draw(st.integers(0, (1 << length) - 1))
    psi = random_state(n, rng)
    got = tag_value(StateVector(psi.copy()), (start, length), target).amplitudes
    want = dense.diag(n, lambda i: dense.field(i, start, length) == target) * psi
    assert np.max(np.abs(got - want)) <= 1e-15
    assert np.allclose(np.abs(got) ** 2, np.abs(psi) ** 2, rtol=1e-15, atol=0)


# -- diffusion -----------------------------------------------------------------------

def test_diffuse_exact_n4():
    sv = create_state(2, 0).apply_hadamard((0, 2))
    sv.amplitudes[2] *= -1
    diffuse(sv, (0, 2))
    assert sv.probability_of((0, 2), 2) == pytest.approx(1.0, abs=1e-15)


def test_diffuse_fixes_uniform_state():
    sv = create_state(4, 0).apply_hadamard((0, 4))
    before = sv.amplitudes.copy()
    diffuse(sv, (0, 4))
    assert np.max(np.abs(sv.amplitudes - before)) <= 1e-15


@pytest.mark.parametrize("start, length", [(0, 6), (1, 3), (2, 4), (5, 1)])
def test_diffuse_matches_dense(start, length, rng):
    psi = random_state(6, rng)
    got = diffuse(StateVector(psi.copy()), (start, length)).amplitudes
    want = dense.diffusion_matrix(6, start, length) @ psi
    assert np.max(np.abs(got - want)) <= 1e-12


# -- search driver ------------------------------------------------------------------

def test_exact_four_entry_search():
    trace = grover_search(LookupTable(2, 3, [7, 3, 5, 1]), 5)
    assert trace.plan.iterations == 1
    assert trace.per_iteration_probability[0] == pytest.approx(1.0, abs=1e-12)
    assert trace.measured_hash == 2 and trace.matched and trace.multiplicity == 1
    assert trace.measured_ngram == b"\x05"


def test_target_bytes_width_checked():
    table = LookupTable(2, 16, [1, 2, 3, 4])
    with pytest.raises(ArgumentError):
        grover_search(table, b"\x01")
    assert grover_search(table, b"\x00\x03").measured_hash == 2


def test_budget_exceeded():
    table = LookupTable(4, 8, list(range(1, 17)))
    with pytest.raises(ResourceError) as exc:
        grover_search(table, 3, max_qubits=12)
    assert exc.value.required_bytes == 2**13 * 16


@pytest.mark.parametrize("k", range(2, 9))
def test_trace_follows_analytic_curve(k):
    rng = np.random.default_rng(100 + k)
    table = single_match_table(k, 8, rng)
    target = table[int(rng.integers(1 << k))]
    trace = grover_search(table, target, seed=k)
    assert len(trace.per_iteration_probability) == iteration_count(k)
    for m, p in enumerate(trace.per_iteration_probability):
        assert abs(p - analytic_probability(k, m + 1)) <= 1e-9
    theta = math.asin(2 ** (-k / 2))
    probs = trace.per_iteration_probability
    for m in range(len(probs) - 1):
        if (2 * m + 5) * theta <= math.pi / 2:
            assert probs[m + 1] > probs[m]


def test_uncompute_leaves_value_register_empty(rng):
    from qgram.grover import GroverPlan

    table = single_match_table(5, 6, rng)
    plan = GroverPlan.for_table(5, 6)
    sv = create_state(plan.total_qubits, 0)
    idx, val, carry = plan.index_range, plan.value_range, plan.carry_index
    mem = table.entries.astype(np.int64)
    sv.apply_hadamard(idx).indexed_lda(idx, val, mem)
    for _ in range(3):
        before = np.abs(sv.amplitudes) ** 2
        tag_value(sv, val, table[7])
        assert np.array_equal(np.abs(sv.amplitudes) ** 2, before)
        sv.indexed_sbc(idx, val, carry, mem)
        assert abs(sv.probability_of(val, 0) - 1) <= 1e-9
        assert abs(sv.probability_of((carry, 1), 0) - 1) <= 1e-9
        diffuse(sv, idx)
        sv.indexed_adc(idx, val, carry, mem)


@pytest.mark.parametrize("matches", [1, 2, 4, 8])
def test_multi_match_probability(matches):
    rng = np.random.default_rng(matches)
    k, v, target = 6, 8, 0x5A
    values = rng.choice(np.setdiff1d(np.arange(256), [target]), size=64, replace=False)
    values[rng.choice(64, size=matches, replace=False)] = target
    table = LookupTable(k, v, values)
    assert classical_find_value(table, target).__len__() == matches
    trace = grover_search(table, target, iterations=5)
    for m, p in enumerate(trace.per_iteration_probability):
        assert abs(p - analytic_probability(k, m + 1, matches)) <= 1e-9
    assert trace.multiplicity == matches


def test_absent_target_is_signalled():
    table = LookupTable(3, 8, [1, 2, 3, 4, 5, 6, 7, 8])
    trace = grover_search(table, 200, seed=1)
    assert not trace.matched and trace.multiplicity == 0
    assert all(p == 0 for p in trace.per_iteration_probability)


def test_classical_agreement_k6():
    hits = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        table = single_match_table(6, 8, rng)
        target = table[int(rng.integers(64))]
        trace = grover_search(table, target, seed=seed)
        hits += [trace.measured_hash] == classical_find_value(table, target)
    assert hits >= 49


def test_single_precision_trace(rng):
    table = single_match_table(6, 8, rng)
    target = table[11]
    trace = grover_search(table, target, precision="single", seed=3)
    for m, p in enumerate(trace.per_iteration_probability):
        assert abs(p - analytic_probability(6, m + 1)) <= 2e-3


def test_progress_callback(rng):
    table = single_match_table(4, 8, rng)
    seen = []
    trace = grover_search(table, table[0], on_iteration=lambda m, p: seen.append((m, p)))
    assert seen == list(enumerate(trace.per_iteration_probability))


def test_trace_json_round_trip(rng):
    table = single_match_table(5, 16, rng)
    trace = grover_search(table, table[9], seed=4)
    text = trace.to_json()
    again = SearchTrace.from_json(text)
    assert again == trace
    assert again.to_json() == text


def test_seeded_search_is_deterministic(rng):
    table = single_match_table(6, 8, rng)
    a = grover_search(table, table[1], seed=77)
    b = grover_search(table, table[1], seed=77)
    assert a == b
