"""Sampling hidden-variable histories through sliced programs.

A history is the sequence (v_0, ..., v_T) of basis-index values the hidden
variable takes after each slice, with v_0 = 0 (programs start in |0...0>).
The engine forward-simulates the state vector once and advances any number
of trajectory lanes in parallel against it:

- Hadamard gate: each lane flips its target bit with the theory's pairwise
  closed-form probability (see ``theories.hadamard_flip_probs``);
- oracle-xor / permutation gates: deterministic relabeling (1x1 blocks);
- phase gates: diagonal, so lanes stay put;
- product theory: every gate resamples lanes from the post-gate Born
  distribution outright.

One uniform variate is consumed per (gate, lane) regardless of gate kind and
theory, drawn gate-by-gate from a counter-based generator (Philox seeded via
SeedSequence), so streams align across theories and prefix-sharing programs
consume identical draws for the shared prefix.  Lanes within one run share
the stream by vector draws; independent experiment trials should use
distinct seeds (see ``substream``).

Memory is O(2**l + lanes * T): states are discarded slice by slice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qsim import (
    Hadamard,
    PhaseFlip,
    QueryLedger,
    SlicedProgram,
    apply_gate,
    assert_unit_norm,
    born_distribution,
    counted_gates,
    fresh_ledger,
    gate_permutation,
    zero_state,
)
from .theories import PRODUCT, TheoryKind, hadamard_flip_probs

#: norm drift beyond this aborts a run (gates are exactly unitary; drift
#: signals a corrupted state, not accumulation)
NORM_DRIFT = 1e-6


def substream(seed: int, *tags: int) -> np.random.Generator:
    """Counter-based generator for (seed, tags...): the package's single
    stream-splitting rule.  Distinct tag tuples give independent streams."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, tags)])))


@dataclass
class HistoryQuery:
    """One request to the history oracle: a program, a theory, a seed."""

    program: SlicedProgram
    theory: TheoryKind
    seed: int
    l: int = -1

    def __post_init__(self) -> None:
        if self.l < 0:
            self.l = self.program.l
        elif self.l != self.program.l:
            raise ValueError(f"l={self.l} does not match program width {self.program.l}")


@dataclass
class History:
    """One sampled trajectory: values[t] is the variable's index after slice t."""

    l: int
    values: np.ndarray
    checkpoints: tuple[int, ...]
    ledger: QueryLedger

    @property
    def checkpoint_values(self) -> np.ndarray:
        return self.values[list(self.checkpoints)]

    def to_csv(self, path) -> None:
        cps = set(self.checkpoints)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,value,is_checkpoint\n")
            for t, v in enumerate(self.values):
                fh.write(f"{t},{int(v):0{self.l}b},{int(t in cps)}\n")


@dataclass
class HistoryBatch:
    """Trajectories of many lanes run against one state simulation.

    ``values`` has shape (lanes, T+1); the ledger is shared (query counts
    are a property of the program, not of lanes).
    """

    l: int
    values: np.ndarray
    checkpoints: tuple[int, ...]
    ledger: QueryLedger
    born: list[np.ndarray] | None = None

    @property
    def lanes(self) -> int:
        return self.values.shape[0]

    @property
    def checkpoint_values(self) -> np.ndarray:
        return self.values[:, list(self.checkpoints)]

    def history(self, lane: int) -> History:
        return History(self.l, self.values[lane].copy(), self.checkpoints, self.ledger)


def _step_lanes(
    v: np.ndarray,
    gate,
    l: int,
    pre: np.ndarray,
    post: np.ndarray,
    theory: TheoryKind,
    u: np.ndarray,
) -> np.ndarray:
    """Advance lane positions v across one gate."""
    dim = 1 << l
    if theory == PRODUCT:
        cum = np.cumsum(born_distribution(post))
        idx = np.searchsorted(cum, u, side="right")
        return np.minimum(idx, dim - 1).astype(np.int64)
    if isinstance(gate, Hadamard):
        uv, inv = np.unique(v, return_inverse=True)
        flips = hadamard_flip_probs(pre, post, gate.qubit, theory, at=uv)
        return np.where(u < flips[inv], v ^ (1 << gate.qubit), v)
    if isinstance(gate, PhaseFlip):
        return v
    perm = gate_permutation(gate, l)
    return perm[v]


def sample_batch(
    program: SlicedProgram,
    theory: TheoryKind,
    seed: int,
    lanes: int,
    want_born: bool = False,
) -> HistoryBatch:
    """Run the program once, advancing ``lanes`` hidden-variable trajectories.

    ``want_born`` additionally records the Born distribution after every
    slice (memory: (T+1) * 2**l doubles — small programs only).
    """
    l = program.l
    rng = substream(seed)
    state = zero_state(l)
    v = np.zeros(lanes, dtype=np.int64)
    n_slices = program.num_slices
    values = np.empty((lanes, n_slices + 1), dtype=np.int64)
    values[:, 0] = 0
    ledger = fresh_ledger(program)
    born = [born_distribution(state)] if want_born else None
    for t, gates in enumerate(program.slices, start=1):
        for gate in gates:
            post = apply_gate(state, gate, l)
            u = rng.random(lanes)
            v = _step_lanes(v, gate, l, state, post, theory, u)
            state = post
        ledger.per_slice[t - 1] += counted_gates(gates)
        assert_unit_norm(state, atol=NORM_DRIFT)
        values[:, t] = v
        if want_born:
            born.append(born_distribution(state))
    return HistoryBatch(l, values, tuple(sorted(program.checkpoints)), ledger, born)


def sample_history(query: HistoryQuery) -> History:
    """Sample one history for the query (lane 0 of a single-lane batch)."""
    return sample_batch(query.program, query.theory, query.seed, 1).history(0)


# ---------------------------------------------------------------------------
# marginal fidelity


@dataclass
class MarginalReport:
    """Per-slice total-variation distance of empirical lane marginals from
    the simulated Born distribution."""

    per_step_tv: np.ndarray
    trials: int

    @property
    def max_tv(self) -> float:
        return float(self.per_step_tv.max()) if self.per_step_tv.size else 0.0

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "per_step_tv": [float(x) for x in self.per_step_tv],
            "max_tv": self.max_tv,
        }


def empirical_marginals(query: HistoryQuery, trials: int) -> MarginalReport:
    """TV distance between lane marginals and Born distributions, per step."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    batch = sample_batch(query.program, query.theory, query.seed, trials, want_born=True)
    dim = 1 << batch.l
    steps = batch.values.shape[1]
    tv = np.zeros(steps)
    for t in range(steps):
        emp = np.bincount(batch.values[:, t], minlength=dim) / trials
        tv[t] = 0.5 * float(np.abs(emp - batch.born[t]).sum())
    return MarginalReport(tv, trials)
