"""The juggle subroutine: forcing an indifferent hidden variable to forget
which branch of a two-term superposition it occupies.

One attempt on a width-l register is three slices:

- U1: Hadamards on the l-1 register qubits other than a freshly drawn i,
- U2: Hadamard on qubit i,
- U3: Hadamards on all l register qubits.

U3 U2 U1 is the identity, so the simulated state at every attempt boundary
equals the prepared state; those boundaries are the program's checkpoints.
On a state (|a> + |b>)/sqrt(2) with a_i != b_i, any theory satisfying
marginalization and indifference moves the variable to a or b with equal
probability at the checkpoint, independent of where it started; with the
default 2*l*l attempts the probability that the checkpoints miss one of
{a, b} is at most (1 - 1/(2l))^(2 l^2) < e^-l.

Registers are given as tuples of program qubit indices, so a juggled
register can sit inside a wider program (tag registers above it stay
untouched and, under indifferent theories, pinned).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .oracle import History, substream
from .qsim import BasisPermutation, Gate, Hadamard, SlicedProgram

#: stream tag for attempt qubit draws
_JUGGLE_STREAM = 0x106


def default_attempts(l: int) -> int:
    return 2 * l * l


def failure_bound(l: int, attempts: int | None = None) -> float:
    """(1 - 1/(2l))^attempts — the miss-probability bound for the plan."""
    if attempts is None:
        attempts = default_attempts(l)
    return float((1.0 - 1.0 / (2 * l)) ** attempts)


@dataclass
class JugglePlan:
    """A built juggle program plus the bookkeeping decision rules need."""

    l: int
    register: tuple[int, ...]
    attempts: int
    qubit_choices: tuple[int, ...]
    program: SlicedProgram
    prep_checkpoint: int
    attempt_checkpoints: tuple[int, ...]


def attempt_slices(register: Sequence[int], i: int) -> list[tuple[Gate, ...]]:
    """The (U1, U2, U3) slices for one attempt with chosen qubit i."""
    u1 = tuple(Hadamard(q) for q in register if q != i)
    u2 = (Hadamard(i),)
    u3 = tuple(Hadamard(q) for q in register)
    return [u1, u2, u3]


def build_juggle_program(
    prep: Sequence[Sequence[Gate]],
    l: int,
    attempts: int | None = None,
    seed: int = 0,
    register: Sequence[int] | None = None,
    total_l: int | None = None,
) -> JugglePlan:
    """Prep slices followed by `attempts` juggle attempts on the register.

    ``l`` is the juggled register's width; ``register`` defaults to qubits
    0..l-1 and ``total_l`` (program width) to the register width.  A fresh i
    is drawn per attempt; checkpoints land after prep and after each U3.
    """
    if l < 2:
        raise ValueError("juggled register needs at least 2 qubits")
    if attempts is None:
        attempts = default_attempts(l)
    if register is None:
        register = tuple(range(l))
    else:
        register = tuple(register)
    if len(register) != l:
        raise ValueError("register width does not match l")
    if total_l is None:
        total_l = max(register) + 1
    rng = substream(seed, _JUGGLE_STREAM)
    slices: list[tuple[Gate, ...]] = [tuple(s) for s in prep]
    prep_cp = len(slices)
    checkpoints = [prep_cp]
    choices: list[int] = []
    attempt_cps: list[int] = []
    for _ in range(attempts):
        i = register[int(rng.integers(0, l))]
        choices.append(i)
        slices.extend(attempt_slices(register, i))
        attempt_cps.append(len(slices))
        checkpoints.append(len(slices))
    program = SlicedProgram(total_l, tuple(slices), frozenset(checkpoints))
    return JugglePlan(
        l, register, attempts, tuple(choices), program, prep_cp, tuple(attempt_cps)
    )


def register_value(values: np.ndarray | int, register: Sequence[int]) -> np.ndarray | int:
    """Read the given qubits out of full basis indices (qubit j of the
    register becomes bit j of the result)."""
    values = np.asarray(values)
    out = np.zeros_like(values)
    for j, q in enumerate(register):
        out |= ((values >> q) & 1) << j
    if out.ndim == 0:
        return int(out)
    return out


def extract_checkpoint_values(
    history: History,
    register: Sequence[int] | None = None,
    tags: Sequence[int] = (),
) -> dict[int, set[int]]:
    """Distinct juggled-register values at checkpoints, grouped by the value
    of the declared tag registers (group key 0 when no tags are declared).

    Under indifferent theories the tag value is pinned within a batch, so
    grouping by it separates batches' contributions; under the product
    theory tags wander, which is exactly what the negative control observes.
    """
    if not history.checkpoints:
        raise ValueError("history has no checkpoint annotations")
    cps = history.checkpoint_values
    if register is None:
        register = tuple(range(history.l))
    reg_vals = register_value(cps, register)
    if tags:
        tag_vals = register_value(cps, tags)
    else:
        tag_vals = np.zeros_like(cps)
    groups: dict[int, set[int]] = {}
    for tag, val in zip(tag_vals, reg_vals):
        groups.setdefault(int(tag), set()).add(int(val))
    return groups


# ---------------------------------------------------------------------------
# two-term superposition preparation (used by tests and the flip-rate probe)


def pair_permutation(l: int, a: int, b: int) -> np.ndarray:
    """A basis permutation sending 0 -> a and 1 -> b (rest order-preserving)."""
    if a == b:
        raise ValueError("pair states must differ")
    dim = 1 << l
    rest_targets = [v for v in range(dim) if v not in (a, b)]
    table = np.empty(dim, dtype=np.int64)
    table[0] = a
    table[1] = b
    for src, tgt in zip(range(2, dim), rest_targets):
        table[src] = tgt
    return table


def pair_prep_slices(l: int, a: int, b: int, minus: bool = False) -> list[tuple[Gate, ...]]:
    """Slices preparing (|a> + |b>)/sqrt(2) from |0...0> (minus flips the
    relative sign, giving (|a> - |b>)/sqrt(2))."""
    from .qsim import PhaseFlip

    slices: list[tuple[Gate, ...]] = [(Hadamard(0),), (BasisPermutation(pair_permutation(l, a, b)),)]
    if minus:
        slices.append((PhaseFlip(mask=(1 << l) - 1, value=b),))
    return slices
