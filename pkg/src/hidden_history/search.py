"""Sub-Grover search by reading a hidden-variable history.

For a database of N = 2^n items with one marked item x*, run ~N^{1/3}
Grover iterations (queries), split the register as x = (y, w) with |y| =
n/3, |w| = 2n/3, and apply H to the y part.  The resulting state is
supported on

    Y = {|y, w*>: y != 0}   and   Z = {|0, w>}        (w* = high bits of x*)

with equal magnitudes on Y and Z by construction.  A third register is
then repeatedly written with a tag that gives |0, w> the tag w and
|y != 0, w> the tag (s, y) for a fresh classical draw s each batch: when s
matches the low bits of a Z state's w, that state shares a block with one
Y state, and juggling the (y, w) registers walks the hidden variable
between them.  Checkpoints after each juggle attempt then reveal w* — any
checkpoint with y != 0 sits in Y exactly, and the |0, w*> overlap state
(which at these register sizes holds a large share of the mass) exposes
w* directly.  Each distinct observed w costs at most 2^{n/3} classical
verification queries; the variable can only ever occupy its starting w or
w*, so the total stays O(N^{1/3}) while the juggling itself costs zero
queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .juggle import attempt_slices
from .oracle import HistoryQuery, sample_history, substream
from .qsim import (
    Gate,
    Hadamard,
    OracleFunction,
    OracleXor,
    QueryLedger,
    SlicedProgram,
    apply_slice,
    grover_slices,
    zero_state,
)
from .theories import FLOW, TheoryKind

SEARCH_C_DEFAULT = 4

_SEARCH_GEN_STREAM = 0x5EA0
_SEARCH_S_STREAM = 0x5EA1
_SEARCH_I_STREAM = 0x5EA2


def target_amplitudes(n: int) -> tuple[float, float]:
    """(alpha, beta) with the post-iteration state alpha|x*> + beta sum_y |y>.

    alpha = sqrt(1 / (2^{n/3} + 2^{-n/3+1} + 1)) and beta = 2^{-n/3} alpha,
    which normalizes exactly and makes the two branches of the split state
    equal in magnitude: 2^{-n/6} alpha = 2^{n/6} beta.
    """
    r = 2.0 ** (n / 3.0)
    alpha = float(np.sqrt(1.0 / (r + 2.0 / r + 1.0)))
    return alpha, alpha / r


def grover_iterations(n: int) -> tuple[int, float]:
    """Iteration count hitting the target marked amplitude, and the result.

    Q minimizes |sin((2Q+1) theta) - (alpha+beta)| over integers, theta =
    asin(2^{-n/2}); one-step resolution leaves an O(2^{-n/2}) residual.
    """
    alpha, beta = target_amplitudes(n)
    target = alpha + beta
    theta = float(np.arcsin(2.0 ** (-n / 2.0)))
    q_real = (np.arcsin(target) / theta - 1.0) / 2.0
    best_q = max(0, int(np.floor(q_real)))
    candidates = [best_q, best_q + 1]
    achieved = [float(np.sin((2 * q + 1) * theta)) for q in candidates]
    pick = int(np.argmin([abs(a - target) for a in achieved]))
    return candidates[pick], achieved[pick]


@dataclass
class SearchInstance:
    n: int
    marked: int
    f: OracleFunction


def make_search_instance(n: int, seed: int) -> SearchInstance:
    rng = substream(seed, _SEARCH_GEN_STREAM)
    marked = int(rng.integers(0, 1 << n))
    table = np.zeros(1 << n, dtype=np.int64)
    table[marked] = 1
    f = OracleFunction(table, n, 1, name=f"search-n{n}-s{seed}")
    return SearchInstance(n, marked, f)


def prepare_search_state(
    f: OracleFunction, n: int, ledger: QueryLedger | None = None
) -> tuple[tuple[tuple[Gate, ...], ...], tuple[float, float]]:
    """Uniform superposition plus Q Grover iterations against f.

    Returns the gate slices (reusable inside a larger register) and the
    achieved (marked, unmarked) amplitudes.  Running the slices here charges
    one query per iteration to the ledger.
    """
    if n % 3:
        raise ValueError("register size must be divisible by 3")
    q_iters, _ = grover_iterations(n)
    slices: list[tuple[Gate, ...]] = [tuple(Hadamard(q) for q in range(n))]
    for _ in range(q_iters):
        slices.extend(grover_slices(f, tuple(range(n)), n))
    if ledger is None:
        ledger = QueryLedger(np.zeros(len(slices), dtype=np.int64))
    state = zero_state(n)
    for t, gates in enumerate(slices):
        state = apply_slice(state, gates, n, ledger, t)
    marked = int(np.flatnonzero(f.table)[0]) if np.any(f.table) else 0
    a_marked = float(np.abs(state[marked]))
    other = (marked + 1) % (1 << n)
    a_other = float(np.abs(state[other]))
    return tuple(slices), (a_marked, a_other)


def tag_function(n: int, s: int) -> OracleFunction:
    """g(y, w) = w when y = 0 else (s, y), packed little-endian (s low).

    Built classically from the drawn s — no database content, so it is
    never query-counted.
    """
    n3 = n // 3
    r = np.arange(1 << n, dtype=np.int64)
    y = r & ((1 << n3) - 1)
    w = r >> n3
    table = np.where(y == 0, w, s | (y << n3))
    return OracleFunction(table, n, 2 * n3, counts_queries=False, name=f"tag-s{s}")


@dataclass
class SearchResult:
    n: int
    seed: int
    found: int | None
    queries: int
    grover_queries: int
    classical_queries: int
    juggle_queries: int
    batches: int
    iterations: int
    achieved_amplitude: float
    candidates_tested: int

    @property
    def success(self) -> bool:
        return self.found is not None

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "found": self.found,
            "queries": self.queries,
            "grover_queries": self.grover_queries,
            "classical_queries": self.classical_queries,
            "juggle_queries": self.juggle_queries,
            "batches": self.batches,
            "iterations": self.iterations,
            "achieved_amplitude": self.achieved_amplitude,
            "candidates_tested": self.candidates_tested,
        }


def dqp_search(
    f: OracleFunction,
    n: int,
    seed: int,
    C: int = SEARCH_C_DEFAULT,
    theory: TheoryKind = FLOW,
) -> SearchResult:
    """Find the marked item with O(2^{n/3}) total queries.

    Builds the prepared state, applies H to the first n/3 qubits, runs
    C * 2^{n/3} * n tag/juggle/untag batches (fresh s per batch, checkpoints
    after each), collects candidate w values from checkpoints — y != 0
    checkpoints first, which sit in Y exactly, then y = 0 ones — and
    classically tests the 2^{n/3} completions of each candidate until one
    verifies.  Returns found = None when nothing verifies.
    """
    if n % 3:
        raise ValueError("register size must be divisible by 3")
    n3 = n // 3
    prep_slices, amps = prepare_search_state(f, n)
    q_iters, _ = grover_iterations(n)
    total_l = n + 2 * n3
    register = tuple(range(n))
    batches = C * (1 << n3) * n

    rng_s = substream(seed, _SEARCH_S_STREAM)
    rng_i = substream(seed, _SEARCH_I_STREAM)
    slices: list[tuple[Gate, ...]] = list(prep_slices)
    slices.append(tuple(Hadamard(q) for q in range(n3)))
    checkpoints = [len(slices)]
    for _ in range(batches):
        s = int(rng_s.integers(0, 1 << n3))
        tag = OracleXor(register, tuple(range(n, total_l)), tag_function(n, s))
        i = register[int(rng_i.integers(0, n))]
        slices.append((tag,))
        slices.extend(attempt_slices(register, i))
        checkpoints.append(len(slices))
        slices.append((tag,))
    program = SlicedProgram(total_l, tuple(slices), frozenset(checkpoints))
    history = sample_history(HistoryQuery(program, theory, seed))

    prep_len = len(prep_slices)
    juggle_queries = int(history.ledger.per_slice[prep_len:].sum())
    grover_queries = int(history.ledger.per_slice[:prep_len].sum())

    y_mask = (1 << n3) - 1
    w_mask = (1 << (2 * n3)) - 1
    sure: list[int] = []
    guesses: list[int] = []
    for v in history.checkpoint_values:
        y = int(v) & y_mask
        w = (int(v) >> n3) & w_mask
        if y != 0:
            if w not in sure:
                sure.append(w)
        elif w not in guesses:
            guesses.append(w)
    candidates = sure + [w for w in guesses if w not in sure]

    before = f.queries
    found = None
    tested = 0
    for w in candidates:
        tested += 1
        for u in range(1 << n3):
            x = u | (w << n3)
            if f.query(x) & 1:
                found = x
                break
        if found is not None:
            break
    classical = f.queries - before
    return SearchResult(
        n=n,
        seed=seed,
        found=found,
        queries=grover_queries + classical,
        grover_queries=grover_queries,
        classical_queries=classical,
        juggle_queries=juggle_queries,
        batches=batches,
        iterations=q_iters,
        achieved_amplitude=amps[0],
        candidates_tested=tested,
    )
