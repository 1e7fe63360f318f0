"""The juggle subroutine and its failure bound."""

import numpy as np
import pytest

from hidden_history.juggle import (
    attempt_slices,
    build_juggle_program,
    default_attempts,
    extract_checkpoint_values,
    failure_bound,
    pair_permutation,
    pair_prep_slices,
    register_value,
)
from hidden_history.oracle import sample_batch
from hidden_history.qsim import SlicedProgram, apply_gate, run_program, slice_unitary, zero_state
from hidden_history.theories import FLOW, SINKHORN


def test_attempt_unitary_is_identity():
    for l in (2, 3, 4):
        for i in range(l):
            u1, u2, u3 = attempt_slices(tuple(range(l)), i)
            U = slice_unitary(u3, l) @ slice_unitary(u2, l) @ slice_unitary(u1, l)
            assert np.allclose(U, np.eye(1 << l), atol=1e-10)


def test_checkpoints_restore_prepared_state():
    l = 3
    plan = build_juggle_program(pair_prep_slices(l, a=1, b=6), l, attempts=5, seed=2)
    state = zero_state(l)
    prep_state = None
    for t, gates in enumerate(plan.program.slices, start=1):
        for g in gates:
            state = apply_gate(state, g, l, count=False)
        if t == plan.prep_checkpoint:
            prep_state = state.copy()
        if t in plan.attempt_checkpoints:
            assert np.allclose(state, prep_state, atol=1e-9)


def test_single_attempt_flip_rate_is_half():
    # fix an attempt qubit i where a and b differ; starting at a, the
    # variable must land on b with probability exactly 1/2
    l, a, b = 3, 1, 6  # differ on all three bits
    lanes = 10000
    for theory in (FLOW, SINKHORN):
        plan = build_juggle_program(pair_prep_slices(l, a, b), l, attempts=1, seed=4)
        i = plan.qubit_choices[0]
        assert (a >> i) & 1 != (b >> i) & 1
        batch = sample_batch(plan.program, theory, seed=11, lanes=lanes)
        start = batch.values[:, plan.prep_checkpoint]
        end = batch.values[:, plan.attempt_checkpoints[0]]
        assert set(np.unique(start)) <= {a, b}
        assert set(np.unique(end)) <= {a, b}
        flipped = (start != end).mean()
        assert abs(flipped - 0.5) < 0.02


def test_minus_superposition_also_juggles():
    l, a, b = 2, 1, 2
    plan = build_juggle_program(pair_prep_slices(l, a, b, minus=True), l, attempts=8, seed=3)
    batch = sample_batch(plan.program, FLOW, seed=7, lanes=400)
    cps = batch.values[:, sorted(plan.program.checkpoints)]
    assert set(np.unique(cps)) == {a, b}
    # nearly every lane should witness both values across 8 attempts
    both = np.array([len(set(row)) == 2 for row in cps])
    assert both.mean() > 0.95


def test_failure_bound_values():
    assert failure_bound(2) == pytest.approx((1 - 1 / 4) ** 8)
    assert failure_bound(2, attempts=3) == pytest.approx((3 / 4) ** 3)
    for l in range(2, 11):
        assert failure_bound(l) < np.exp(-l)
        assert default_attempts(l) == 2 * l * l


def test_register_value_gathers_bits():
    # register (2, 0): bit0 of the result is qubit 2, bit1 is qubit 0
    vals = np.array([0b101, 0b100, 0b011])
    out = register_value(vals, (2, 0))
    assert out.tolist() == [0b11, 0b01, 0b10]
    assert register_value(0b101, (2, 0)) == 0b11


def test_extract_checkpoint_values_grouping():
    l = 2
    plan = build_juggle_program(pair_prep_slices(l, 1, 2), l, attempts=6, seed=5)
    batch = sample_batch(plan.program, FLOW, seed=6, lanes=3)
    h = batch.history(0)
    groups = extract_checkpoint_values(h)
    assert set(groups) == {0}
    assert groups[0] <= {1, 2}
    # declaring a tag register splits by its (here constant zero) value;
    # prep must be built at the full program width
    plan2 = build_juggle_program(
        pair_prep_slices(3, 1, 2), 2, attempts=4, seed=5, register=(0, 1), total_l=3
    )
    h2 = sample_batch(plan2.program, FLOW, seed=6, lanes=1).history(0)
    groups2 = extract_checkpoint_values(h2, register=(0, 1), tags=(2,))
    assert set(groups2) == {0}


def test_extract_requires_checkpoints():
    from hidden_history.oracle import History
    from hidden_history.qsim import QueryLedger

    h = History(2, np.zeros(3, dtype=np.int64), (), QueryLedger(np.zeros(2, dtype=np.int64)))
    with pytest.raises(ValueError):
        extract_checkpoint_values(h)


def test_build_validation_and_shape():
    with pytest.raises(ValueError):
        build_juggle_program([], 1)
    with pytest.raises(ValueError):
        build_juggle_program([], 3, register=(0, 1))
    plan = build_juggle_program(pair_prep_slices(2, 1, 2), 2, seed=0)
    assert plan.attempts == default_attempts(2)
    assert len(plan.program.checkpoints) == plan.attempts + 1
    assert len(plan.qubit_choices) == plan.attempts
    assert plan.program.num_slices == 2 + 3 * plan.attempts
    assert all(q in plan.register for q in plan.qubit_choices)


def test_pair_permutation_is_bijective():
    table = pair_permutation(3, 5, 2)
    assert sorted(table.tolist()) == list(range(8))
    assert table[0] == 5 and table[1] == 2
    with pytest.raises(ValueError):
        pair_permutation(2, 3, 3)


def test_prep_slices_prepare_the_pair():
    for minus, sign in ((False, 1.0), (True, -1.0)):
        prog = SlicedProgram(3, tuple(pair_prep_slices(3, 1, 6, minus=minus)), frozenset())
        state, _ = run_program(prog)
        expected = np.zeros(8, dtype=complex)
        expected[1] = 1 / np.sqrt(2)
        expected[6] = sign / np.sqrt(2)
        assert np.allclose(state, expected, atol=1e-12)


def test_qubit_choices_reproducible():
    p1 = build_juggle_program(pair_prep_slices(2, 1, 2), 2, attempts=10, seed=42)
    p2 = build_juggle_program(pair_prep_slices(2, 1, 2), 2, attempts=10, seed=42)
    assert p1.qubit_choices == p2.qubit_choices
    p3 = build_juggle_program(pair_prep_slices(2, 1, 2), 2, attempts=10, seed=43)
    assert p1.qubit_choices != p3.qubit_choices
