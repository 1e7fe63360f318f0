"""Dense state-vector simulation of sliced circuit programs.

Conventions used across the package:

- Basis states are integers ``v`` in ``[0, 2**l)``; qubit 0 is the least
  significant bit of ``v`` (little-endian).
- States are complex128 numpy vectors of length ``2**l``, unit norm.
- A *slice* is an ordered tuple of gates applied left to right; a program is
  an ordered tuple of slices plus a set of checkpoint indices (``t`` means
  "after slice t", with 0 naming the initial state).
- The gate set is restricted on purpose: Hadamard, conditional phase flip,
  reversible xor-oracle, and explicit basis permutations.  Every gate is
  therefore either 2x2-block-local (Hadamard) or a signed basis permutation,
  which downstream transition-kernel code relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

_INV_SQRT2 = 1.0 / np.sqrt(2.0)

#: largest register width for which dense unitaries may be materialized
DENSE_CAP = 12

NORM_ATOL = 1e-10


class DimensionCapError(ValueError):
    """Raised when a dense-matrix operation would exceed the register cap."""


def zero_state(l: int) -> np.ndarray:
    """|0...0> on ``l`` qubits."""
    state = np.zeros(1 << l, dtype=np.complex128)
    state[0] = 1.0
    return state


def basis_state(l: int, v: int) -> np.ndarray:
    state = np.zeros(1 << l, dtype=np.complex128)
    state[v] = 1.0
    return state


def born_distribution(state: np.ndarray) -> np.ndarray:
    """|amplitude|^2 for every basis index."""
    return np.abs(state) ** 2


def assert_unit_norm(state: np.ndarray, atol: float = NORM_ATOL) -> None:
    norm = np.linalg.norm(state)
    if not np.isfinite(norm):
        raise FloatingPointError("non-finite amplitude encountered")
    if abs(norm - 1.0) > atol:
        raise ValueError(f"state norm {norm} deviates from 1 by more than {atol}")


# ---------------------------------------------------------------------------
# oracle functions


class OracleFunction:
    """A total function on bitstrings, backed by a lookup table.

    ``counts_queries`` marks functions whose gate applications (and explicit
    ``query`` calls) are charged to the query ledger; plumbing functions such
    as tag writers and hash evaluations are built with ``counts_queries=False``.
    The counter increments once per gate application regardless of
    superposition width, and once per classical ``query`` call.
    """

    def __init__(
        self,
        table: Sequence[int] | np.ndarray,
        arity: int,
        out_width: int,
        counts_queries: bool = True,
        name: str = "",
    ) -> None:
        table = np.asarray(table, dtype=np.int64)
        if table.shape != (1 << arity,):
            raise ValueError(f"table must have 2**{arity} entries, got {table.shape}")
        if table.size and (table.min() < 0 or table.max() >= (1 << out_width)):
            raise ValueError("table values exceed the declared output width")
        self.table = table
        self.arity = arity
        self.out_width = out_width
        self.counts_queries = counts_queries
        self.name = name
        self.queries = 0

    @classmethod
    def from_callable(
        cls,
        fn: Callable[[int], int],
        arity: int,
        out_width: int,
        counts_queries: bool = True,
        name: str = "",
    ) -> "OracleFunction":
        table = [fn(x) for x in range(1 << arity)]
        return cls(table, arity, out_width, counts_queries, name)

    def query(self, x: int) -> int:
        """Evaluate classically, charging one query."""
        self.queries += 1
        return int(self.table[x])

    def value(self, x: int) -> int:
        """Evaluate without charging (internal bookkeeping only)."""
        return int(self.table[x])

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        tag = self.name or "fn"
        return f"OracleFunction({tag}: {self.arity}->{self.out_width})"


# ---------------------------------------------------------------------------
# gates


@dataclass
class Hadamard:
    qubit: int


@dataclass
class PhaseFlip:
    """Flips the sign of basis states selected by a predicate.

    Two predicate forms: with ``fn`` set, flip where ``fn(x) & 1 == 1`` for
    ``x`` read from ``inputs``; otherwise flip where ``(v & mask) == value``,
    inverted when ``negate`` is set.
    """

    mask: int = 0
    value: int = 0
    negate: bool = False
    inputs: tuple[int, ...] = ()
    fn: OracleFunction | None = None


@dataclass
class OracleXor:
    """|x>|w> -> |x>|w xor fn(x)>; an involutive basis permutation."""

    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    fn: OracleFunction


@dataclass
class BasisPermutation:
    """Explicit relabeling of basis states: |v> -> |table[v]>."""

    table: np.ndarray

    def __post_init__(self) -> None:
        self.table = np.asarray(self.table, dtype=np.int64)
        if np.unique(self.table).shape != self.table.shape:
            raise ValueError("permutation table has repeated targets")


Gate = Hadamard | PhaseFlip | OracleXor | BasisPermutation

# cache of bit-gather index arrays keyed by (qubit tuple, register width)
_GATHER_CACHE: dict[tuple[tuple[int, ...], int], np.ndarray] = {}


def _gather_bits(qubits: tuple[int, ...], l: int) -> np.ndarray:
    """For every basis index of an l-qubit register, the integer formed by
    reading the given qubits (first qubit -> bit 0 of the result)."""
    key = (qubits, l)
    cached = _GATHER_CACHE.get(key)
    if cached is not None:
        return cached
    v = np.arange(1 << l, dtype=np.int64)
    x = np.zeros(1 << l, dtype=np.int64)
    for j, q in enumerate(qubits):
        x |= ((v >> q) & 1) << j
    _GATHER_CACHE[key] = x
    return x


def _scatter_table(values: np.ndarray, outputs: tuple[int, ...]) -> np.ndarray:
    """Spread each value's bit j onto qubit outputs[j] of a full index."""
    out = np.zeros_like(values)
    for j, q in enumerate(outputs):
        out |= ((values >> j) & 1) << q
    return out


def _check_qubits(qubits: Iterable[int], l: int, tag: str) -> None:
    seen = set()
    for q in qubits:
        if not 0 <= q < l:
            raise ValueError(f"{tag} qubit {q} out of range for l={l}")
        if q in seen:
            raise ValueError(f"{tag} qubit {q} repeated")
        seen.add(q)


def gate_permutation(gate: Gate, l: int) -> np.ndarray | None:
    """The basis permutation a non-Hadamard gate induces (None for Hadamard).

    PhaseFlip gates are diagonal and map to the identity permutation.
    """
    if isinstance(gate, Hadamard):
        return None
    if isinstance(gate, PhaseFlip):
        return np.arange(1 << l, dtype=np.int64)
    if isinstance(gate, BasisPermutation):
        return gate.table
    if isinstance(gate, OracleXor):
        x = _gather_bits(gate.inputs, l)
        spread = _scatter_table(gate.fn.table, gate.outputs)
        return np.arange(1 << l, dtype=np.int64) ^ spread[x]
    raise TypeError(f"unknown gate {gate!r}")


def phase_signs(gate: PhaseFlip, l: int) -> np.ndarray:
    if gate.fn is not None:
        x = _gather_bits(gate.inputs, l)
        hits = (gate.fn.table[x] & 1).astype(bool)
    else:
        v = np.arange(1 << l, dtype=np.int64)
        hits = (v & gate.mask) == gate.value
    if gate.negate:
        hits = ~hits
    return np.where(hits, -1.0, 1.0)


def _validate_gate(gate: Gate, l: int) -> None:
    if isinstance(gate, Hadamard):
        _check_qubits([gate.qubit], l, "target")
    elif isinstance(gate, PhaseFlip):
        if gate.fn is not None:
            _check_qubits(gate.inputs, l, "input")
            if len(gate.inputs) != gate.fn.arity:
                raise ValueError("input register width does not match oracle arity")
    elif isinstance(gate, OracleXor):
        _check_qubits(list(gate.inputs) + list(gate.outputs), l, "oracle")
        if len(gate.inputs) != gate.fn.arity:
            raise ValueError("input register width does not match oracle arity")
        if len(gate.outputs) != gate.fn.out_width:
            raise ValueError("output register width does not match oracle width")
    elif isinstance(gate, BasisPermutation):
        if gate.table.shape != (1 << l,):
            raise ValueError("permutation table size does not match register")
    else:
        raise TypeError(f"unknown gate {gate!r}")


def apply_gate(state: np.ndarray, gate: Gate, l: int, count: bool = True) -> np.ndarray:
    """Apply one gate, returning a new state vector.

    Charges the gate's oracle counter (once per application) when the gate
    carries a counted oracle function; pass ``count=False`` for analysis
    passes that replay gates without simulating them "for real".
    """
    _validate_gate(gate, l)
    if isinstance(gate, Hadamard):
        q = gate.qubit
        s = state.reshape(-1, 2, 1 << q)
        out = np.empty_like(s)
        a = s[:, 0, :]
        b = s[:, 1, :]
        np.multiply(a + b, _INV_SQRT2, out=out[:, 0, :])
        np.multiply(a - b, _INV_SQRT2, out=out[:, 1, :])
        return out.reshape(state.shape)
    if isinstance(gate, PhaseFlip):
        if count and gate.fn is not None and gate.fn.counts_queries:
            gate.fn.queries += 1
        return state * phase_signs(gate, l)
    if isinstance(gate, OracleXor):
        if count and gate.fn.counts_queries:
            gate.fn.queries += 1
        perm = gate_permutation(gate, l)
        out = np.empty_like(state)
        out[perm] = state
        return out
    if isinstance(gate, BasisPermutation):
        out = np.empty_like(state)
        out[gate.table] = state
        return out
    raise TypeError(f"unknown gate {gate!r}")


def counted_gates(slice_gates: Sequence[Gate]) -> int:
    """Number of query-charged oracle gates in a slice."""
    n = 0
    for gate in slice_gates:
        if isinstance(gate, OracleXor) and gate.fn.counts_queries:
            n += 1
        elif isinstance(gate, PhaseFlip) and gate.fn is not None and gate.fn.counts_queries:
            n += 1
    return n


@dataclass
class QueryLedger:
    """Per-slice counts of charged oracle-gate applications."""

    per_slice: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.per_slice.sum())

    def to_json(self) -> dict:
        return {"q": [int(x) for x in self.per_slice], "Q": self.total}


def apply_slice(
    state: np.ndarray,
    slice_gates: Sequence[Gate],
    l: int,
    ledger: QueryLedger | None = None,
    t: int | None = None,
) -> np.ndarray:
    """Apply a slice's gates in order; record its query count in the ledger."""
    for gate in slice_gates:
        state = apply_gate(state, gate, l)
    if ledger is not None and t is not None:
        ledger.per_slice[t] += counted_gates(slice_gates)
    return state


@dataclass
class SlicedProgram:
    """An ordered sequence of slices plus designated checkpoint indices."""

    l: int
    slices: tuple[tuple[Gate, ...], ...]
    checkpoints: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        self.slices = tuple(tuple(s) for s in self.slices)
        self.checkpoints = frozenset(self.checkpoints)
        for s in self.slices:
            for gate in s:
                _validate_gate(gate, self.l)
        for t in self.checkpoints:
            if not 0 <= t <= len(self.slices):
                raise ValueError(f"checkpoint {t} outside program of {len(self.slices)} slices")

    @property
    def num_slices(self) -> int:
        return len(self.slices)

    def static_query_count(self) -> int:
        return sum(counted_gates(s) for s in self.slices)


def fresh_ledger(program: SlicedProgram) -> QueryLedger:
    return QueryLedger(np.zeros(program.num_slices, dtype=np.int64))


def run_program(program: SlicedProgram, state: np.ndarray | None = None) -> tuple[np.ndarray, QueryLedger]:
    """Run all slices from |0...0> (or a given state); return final state and ledger."""
    if state is None:
        state = zero_state(program.l)
    ledger = fresh_ledger(program)
    for t, s in enumerate(program.slices):
        state = apply_slice(state, s, program.l, ledger, t)
    return state, ledger


# ---------------------------------------------------------------------------
# dense unitaries


def slice_unitary(slice_gates: Sequence[Gate], l: int, cap: int = DENSE_CAP) -> np.ndarray:
    """Materialize the slice's unitary as a dense matrix (columns = images).

    Entry [y, x] is the amplitude for moving basis state x to y.
    """
    if l > cap:
        raise DimensionCapError(f"l={l} exceeds dense-matrix cap {cap}")
    dim = 1 << l
    m = np.eye(dim, dtype=np.complex128)
    for gate in slice_gates:
        _validate_gate(gate, l)
        if isinstance(gate, Hadamard):
            q = gate.qubit
            s = m.reshape(-1, 2, (1 << q) * dim)
            out = np.empty_like(s)
            a = s[:, 0, :]
            b = s[:, 1, :]
            np.multiply(a + b, _INV_SQRT2, out=out[:, 0, :])
            np.multiply(a - b, _INV_SQRT2, out=out[:, 1, :])
            m = out.reshape(dim, dim)
        elif isinstance(gate, PhaseFlip):
            m = m * phase_signs(gate, l)[:, None]
        else:
            perm = gate_permutation(gate, l)
            out = np.empty_like(m)
            out[perm, :] = m
            m = out
    return m


# ---------------------------------------------------------------------------
# Grover iteration


def grover_slices(fn: OracleFunction, qubits: tuple[int, ...], l: int) -> list[tuple[Gate, ...]]:
    """One amplitude-amplification round as single-gate slices.

    Phase oracle (charged), then inversion about the mean implemented as
    H^(x)n, a reflection that negates everything except the all-zeros value of
    the register (sign convention chosen so the marked amplitude grows), and
    H^(x)n again.
    """
    mask = 0
    for q in qubits:
        mask |= 1 << q
    out: list[tuple[Gate, ...]] = []
    out.append((PhaseFlip(inputs=qubits, fn=fn),))
    out.extend((Hadamard(q),) for q in qubits)
    out.append((PhaseFlip(mask=mask, value=0, negate=True),))
    out.extend((Hadamard(q),) for q in qubits)
    return out


def grover_iterate(
    state: np.ndarray,
    fn: OracleFunction,
    qubits: tuple[int, ...],
    l: int,
) -> np.ndarray:
    """Apply one Grover round to a state (the gate-list form of grover_slices)."""
    for s in grover_slices(fn, qubits, l):
        state = apply_slice(state, s, l)
    return state


# ---------------------------------------------------------------------------
# program serialization (harness format)


def gate_to_dict(gate: Gate) -> dict:
    if isinstance(gate, Hadamard):
        return {"kind": "h", "qubit": gate.qubit}
    if isinstance(gate, PhaseFlip):
        d: dict = {"kind": "phase", "mask": gate.mask, "value": gate.value, "negate": gate.negate}
        if gate.fn is not None:
            d["inputs"] = list(gate.inputs)
            d["table"] = [int(x) for x in gate.fn.table]
            d["counts"] = gate.fn.counts_queries
        return d
    if isinstance(gate, OracleXor):
        return {
            "kind": "xor",
            "inputs": list(gate.inputs),
            "outputs": list(gate.outputs),
            "table": [int(x) for x in gate.fn.table],
            "counts": gate.fn.counts_queries,
        }
    if isinstance(gate, BasisPermutation):
        return {"kind": "perm", "table": [int(x) for x in gate.table]}
    raise TypeError(f"unknown gate {gate!r}")


def gate_from_dict(d: dict) -> Gate:
    kind = d["kind"]
    if kind == "h":
        return Hadamard(d["qubit"])
    if kind == "phase":
        if "table" in d:
            inputs = tuple(d["inputs"])
            fn = OracleFunction(d["table"], len(inputs), 1, d.get("counts", True))
            return PhaseFlip(inputs=inputs, fn=fn, negate=d.get("negate", False))
        return PhaseFlip(mask=d["mask"], value=d["value"], negate=d.get("negate", False))
    if kind == "xor":
        inputs = tuple(d["inputs"])
        outputs = tuple(d["outputs"])
        fn = OracleFunction(d["table"], len(inputs), len(outputs), d.get("counts", True))
        return OracleXor(inputs, outputs, fn)
    if kind == "perm":
        return BasisPermutation(np.asarray(d["table"], dtype=np.int64))
    raise ValueError(f"unknown gate kind {kind!r}")


def program_to_dict(program: SlicedProgram) -> dict:
    return {
        "l": program.l,
        "slices": [[gate_to_dict(g) for g in s] for s in program.slices],
        "checkpoints": sorted(program.checkpoints),
    }


def program_from_dict(d: dict) -> SlicedProgram:
    slices = tuple(tuple(gate_from_dict(g) for g in s) for s in d["slices"])
    return SlicedProgram(d["l"], slices, frozenset(d["checkpoints"]))
