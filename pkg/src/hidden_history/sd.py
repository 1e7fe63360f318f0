"""Statistical-difference decisions from hidden-variable histories.

Given two samplable functions P0, P1 on n-bit inputs, decide whether the
induced output distributions are statistically close ("near") or nearly
disjoint ("far") — inputs are promised polarized to one side.  The solver
prepares

    sum over b, x of |b> |x> |P_b(x)>   (plus a hash register, general case)

and juggles the (b, x) register.  Under an indifferent theory the function
registers are pinned, so the hidden variable stays inside one function-value
block; in the near case blocks contain both b branches and the juggle
reveals two b values at checkpoints, in the far case every block is
single-b and only one value can ever appear.

Batches re-randomize by uncomputing the whole state (back to |0...0>) and
recomputing it; the general solver draws a fresh pairwise-independent affine
hash per batch to isolate unique preimages (the Valiant-Vazirani step).
The "both b values" count is per batch: different batches may legitimately
sit on different branches.

Register layout (little-endian, qubit 0 = LSB):
    qubit 0: b | qubits 1..n: x | n+1..n+w: P value | then k_max hash bits.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .juggle import attempt_slices
from .oracle import HistoryQuery, sample_history, substream
from .qsim import Gate, Hadamard, OracleFunction, OracleXor, SlicedProgram
from .theories import FLOW, TheoryKind

NEAR = "near"
FAR = "far"

#: stream tags
_SD_I_STREAM = 0x5D1
_SD_HASH_STREAM = 0x5D2
_VV_STREAM = 0x77
_GEN_STREAM = 0x9E


@dataclass
class SDInstance:
    """A pair of samplable functions plus testing-only ground truth.

    ``promise`` and ``tv`` are generator metadata; solvers receive only
    (P0, P1, n).
    """

    n: int
    P0: OracleFunction
    P1: OracleFunction
    promise: str
    tv: float
    kind: str
    instance_id: str


@dataclass
class SolverResult:
    instance_id: str
    verdict: str
    batches_used: int
    queries: int
    seed: int

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "verdict": self.verdict,
            "batches_used": self.batches_used,
            "queries": self.queries,
            "seed": self.seed,
        }


def tv_exact(T0: np.ndarray, T1: np.ndarray, out_width: int) -> float:
    """Total-variation distance between output distributions of two tables."""
    dim = 1 << out_width
    c0 = np.bincount(T0, minlength=dim)
    c1 = np.bincount(T1, minlength=dim)
    return 0.5 * float(np.abs(c0 - c1).sum()) / len(T0)


# ---------------------------------------------------------------------------
# instance generators (all promises verified by direct enumeration)


def _perm(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.permutation(1 << n).astype(np.int64)


def _instance(n: int, T0: np.ndarray, T1: np.ndarray, kind: str, ident: str) -> SDInstance:
    tv = tv_exact(T0, T1, n)
    promise = NEAR if tv <= 1.0 / 3.0 else FAR
    P0 = OracleFunction(T0, n, n, name=f"{ident}/P0")
    P1 = OracleFunction(T1, n, n, name=f"{ident}/P1")
    return SDInstance(n, P0, P1, promise, tv, kind, ident)


def near_one_to_one(n: int, seed: int) -> SDInstance:
    """Two independent random permutations: both outputs uniform, TV = 0."""
    rng = substream(seed, _GEN_STREAM, 0)
    return _instance(n, _perm(rng, n), _perm(rng, n), "one-to-one", f"near-1to1-n{n}-s{seed}")


def far_one_to_one(n: int, seed: int) -> SDInstance:
    """Prefix-tagged ranges: P_b lands in the half starting with bit b, so
    the output distributions are disjoint (TV = 1).  Each P_b is 2-to-1 —
    bijections cannot be far, both being uniform."""
    rng = substream(seed, _GEN_STREAM, 1)
    half = 1 << (n - 1)
    T0 = (_perm(rng, n) >> 1).astype(np.int64)
    T1 = ((_perm(rng, n) >> 1) | half).astype(np.int64)
    return _instance(n, T0, T1, "one-to-one", f"far-1to1-n{n}-s{seed}")


def near_many_to_one(n: int, seed: int) -> SDInstance:
    """Both sides fold a random permutation the same number of times: both
    outputs uniform on the same support, TV = 0."""
    rng = substream(seed, _GEN_STREAM, 2)
    fold = int(rng.integers(1, 3))  # drop 1 or 2 bits
    T0 = (_perm(rng, n) >> fold).astype(np.int64)
    T1 = (_perm(rng, n) >> fold).astype(np.int64)
    return _instance(n, T0, T1, "many-to-one", f"near-m2o-n{n}-s{seed}")


def far_many_to_one(n: int, seed: int) -> SDInstance:
    """Prefix-tagged 4-to-1 folds: disjoint supports, TV = 1."""
    if n < 3:
        raise ValueError("far many-to-one instances need n >= 3")
    rng = substream(seed, _GEN_STREAM, 3)
    half = 1 << (n - 1)
    T0 = (_perm(rng, n) >> 2).astype(np.int64)
    T1 = ((_perm(rng, n) >> 2) | half).astype(np.int64)
    return _instance(n, T0, T1, "many-to-one", f"far-m2o-n{n}-s{seed}")


# ---------------------------------------------------------------------------
# affine hashing (the Valiant-Vazirani isolation step)


@dataclass
class AffineHash:
    """h(x) = Ax xor c over F2, rows of A stored as bitmasks."""

    n: int
    k: int
    rows: np.ndarray
    offset: int

    def value(self, x: int) -> int:
        bits = np.bitwise_count(np.int64(x) & self.rows) & 1
        out = 0
        for j in range(self.k):
            out |= int(bits[j]) << j
        return out ^ self.offset

    def table(self) -> np.ndarray:
        """h over all 2**n inputs, vectorized."""
        x = np.arange(1 << self.n, dtype=np.int64)
        out = np.zeros(1 << self.n, dtype=np.int64)
        for j in range(self.k):
            out |= ((np.bitwise_count(x & self.rows[j]) & 1).astype(np.int64)) << j
        return out ^ self.offset


def _draw_hash(rng: np.random.Generator, n: int, k: int) -> AffineHash:
    rows = rng.integers(0, 1 << n, size=k, dtype=np.int64)
    offset = int(rng.integers(0, 1 << k))
    return AffineHash(n, k, rows, offset)


def draw_vv_hash(n: int, seed: int) -> tuple[int, AffineHash, AffineHash]:
    """Uniform k in {2, ..., n+1} plus two independent uniform affine hashes."""
    rng = substream(seed, _VV_STREAM)
    return _draw_vv_from(rng, n)


def _draw_vv_from(rng: np.random.Generator, n: int) -> tuple[int, AffineHash, AffineHash]:
    k = int(rng.integers(2, n + 2))
    return k, _draw_hash(rng, n, k), _draw_hash(rng, n, k)


# ---------------------------------------------------------------------------
# program assembly shared by the solvers


def _conditional_table(T0: np.ndarray, T1: np.ndarray) -> np.ndarray:
    """F(b | x<<1) = T_b[x] for the b-conditional oracle gate."""
    args = np.arange(2 * len(T0), dtype=np.int64)
    b = args & 1
    x = args >> 1
    return np.where(b == 0, T0[x], T1[x]).astype(np.int64)


def _scan_batches(values: np.ndarray, batch_cps: list[list[int]], bit_of) -> tuple[bool, int]:
    """Whether any batch's checkpoints show both b values; first such batch."""
    for idx, cps in enumerate(batch_cps):
        bs = {int(bit_of(values[t])) for t in cps}
        if len(bs) > 1:
            return True, idx
    return False, -1


def solve_sd_one_to_one(
    P0: OracleFunction,
    P1: OracleFunction,
    n: int,
    seed: int,
    R: int | None = None,
    attempts: int = 1,
    theory: TheoryKind = FLOW,
    instance_id: str = "",
) -> SolverResult:
    """Decide near/far for function pairs promised (close to) injective.

    R batches (default 16 * (n+1)^2), each: uncompute the state, recompute
    it, run `attempts` juggle attempts on the (b, x) register, checkpoint
    after the recompute and after each attempt.  Verdict near iff some
    batch's checkpoints carry both b values.
    """
    w = P0.out_width
    if P1.out_width != w or P0.arity != n or P1.arity != n:
        raise ValueError("function shapes disagree with n")
    lj = n + 1
    if R is None:
        R = 16 * lj * lj
    register = tuple(range(lj))
    total_l = 1 + n + w
    fn = OracleFunction(_conditional_table(P0.table, P1.table), lj, w, name="P")
    p_gate = OracleXor(register, tuple(range(lj, lj + w)), fn)
    h_layer = tuple(Hadamard(q) for q in register)
    rng_i = substream(seed, _SD_I_STREAM)

    slices: list[tuple[Gate, ...]] = [h_layer, (p_gate,)]
    checkpoints = [2]
    batch_cps: list[list[int]] = []
    for k in range(R):
        if k > 0:
            slices.extend([(p_gate,), h_layer, h_layer, (p_gate,)])
            checkpoints.append(len(slices))
        cps = [checkpoints[-1]]
        for _ in range(attempts):
            i = register[int(rng_i.integers(0, lj))]
            slices.extend(attempt_slices(register, i))
            checkpoints.append(len(slices))
            cps.append(len(slices))
        batch_cps.append(cps)
    program = SlicedProgram(total_l, tuple(slices), frozenset(checkpoints))
    history = sample_history(HistoryQuery(program, theory, seed))
    both, _ = _scan_batches(history.values, batch_cps, lambda v: v & 1)
    return SolverResult(
        instance_id or f"1to1-n{n}-s{seed}",
        NEAR if both else FAR,
        R,
        history.ledger.total,
        seed,
    )


def solve_sd_general(
    P0: OracleFunction,
    P1: OracleFunction,
    n: int,
    seed: int,
    R: int | None = None,
    attempts: int = 2,
    theory: TheoryKind = FLOW,
    instance_id: str = "",
) -> SolverResult:
    """Near/far for arbitrary (polarized) function pairs.

    Adds a hash register: each batch draws fresh (k, h0, h1) and prepares
    |b>|x>|P_b(x)>|h_b(x)>, so with constant probability the hash isolates a
    single preimage on each side of a shared function value, reducing to the
    injective case for that batch.
    """
    w = P0.out_width
    if P1.out_width != w or P0.arity != n or P1.arity != n:
        raise ValueError("function shapes disagree with n")
    lj = n + 1
    if R is None:
        R = 64 * n
    k_max = n + 1
    register = tuple(range(lj))
    p_out = tuple(range(lj, lj + w))
    h_out = tuple(range(lj + w, lj + w + k_max))
    total_l = 1 + n + w + k_max
    p_fn = OracleFunction(_conditional_table(P0.table, P1.table), lj, w, name="P")
    p_gate = OracleXor(register, p_out, p_fn)
    h_layer = tuple(Hadamard(q) for q in register)
    rng_i = substream(seed, _SD_I_STREAM)
    rng_h = substream(seed, _SD_HASH_STREAM)

    def hash_gate() -> OracleXor:
        _, h0, h1 = _draw_vv_from(rng_h, n)
        fn = OracleFunction(
            _conditional_table(h0.table(), h1.table()), lj, k_max, counts_queries=False, name="h"
        )
        return OracleXor(register, h_out, fn)

    hg = hash_gate()
    slices: list[tuple[Gate, ...]] = [h_layer, (p_gate,), (hg,)]
    checkpoints = [3]
    batch_cps: list[list[int]] = []
    for k in range(R):
        if k > 0:
            new_hg = hash_gate()
            slices.extend([(hg,), (p_gate,), h_layer, h_layer, (p_gate,), (new_hg,)])
            hg = new_hg
            checkpoints.append(len(slices))
        cps = [checkpoints[-1]]
        for _ in range(attempts):
            i = register[int(rng_i.integers(0, lj))]
            slices.extend(attempt_slices(register, i))
            checkpoints.append(len(slices))
            cps.append(len(slices))
        batch_cps.append(cps)
    program = SlicedProgram(total_l, tuple(slices), frozenset(checkpoints))
    history = sample_history(HistoryQuery(program, theory, seed))
    both, _ = _scan_batches(history.values, batch_cps, lambda v: v & 1)
    return SolverResult(
        instance_id or f"general-n{n}-s{seed}",
        NEAR if both else FAR,
        R,
        history.ledger.total,
        seed,
    )


# ---------------------------------------------------------------------------
# collision distinguishing (direct reduction)


ONE_TO_ONE = "one-to-one"
TWO_TO_ONE = "two-to-one"


def collision_one_to_one(n: int, seed: int) -> OracleFunction:
    rng = substream(seed, _GEN_STREAM, 4)
    return OracleFunction(_perm(rng, n), n, n, name=f"coll-1to1-n{n}-s{seed}")


def collision_two_to_one(n: int, seed: int) -> OracleFunction:
    """Random pairing: g constant on {sigma(2i), sigma(2i+1)}, values distinct."""
    rng = substream(seed, _GEN_STREAM, 5)
    sigma = _perm(rng, n)
    rho = _perm(rng, n)
    table = np.empty(1 << n, dtype=np.int64)
    for i in range(1 << (n - 1)):
        table[sigma[2 * i]] = rho[i]
        table[sigma[2 * i + 1]] = rho[i]
    return OracleFunction(table, n, n, name=f"coll-2to1-n{n}-s{seed}")


def distinguish_collision(
    g: OracleFunction,
    seed: int,
    attempts: int | None = None,
    theory: TheoryKind = FLOW,
    instance_id: str = "",
) -> SolverResult:
    """Prepare sum |x>|g(x)>, juggle x; two-to-one iff two distinct x appear.

    Under an indifferent theory the g-register pins the variable inside one
    g-value block for the whole run, so a single batch of 2 n^2 attempts
    suffices — no uncompute/recompute needed.
    """
    n = g.arity
    w = g.out_width
    if attempts is None:
        attempts = 2 * n * n
    register = tuple(range(n))
    total_l = n + w
    g_gate = OracleXor(register, tuple(range(n, n + w)), g)
    h_layer = tuple(Hadamard(q) for q in register)
    rng_i = substream(seed, _SD_I_STREAM)
    slices: list[tuple[Gate, ...]] = [h_layer, (g_gate,)]
    checkpoints = [2]
    for _ in range(attempts):
        i = register[int(rng_i.integers(0, n))]
        slices.extend(attempt_slices(register, i))
        checkpoints.append(len(slices))
    program = SlicedProgram(total_l, tuple(slices), frozenset(checkpoints))
    history = sample_history(HistoryQuery(program, theory, seed))
    mask = (1 << n) - 1
    seen = {int(v) & mask for v in history.checkpoint_values}
    return SolverResult(
        instance_id or f"coll-n{n}-s{seed}",
        TWO_TO_ONE if len(seen) > 1 else ONE_TO_ONE,
        1,
        history.ledger.total,
        seed,
    )


# ---------------------------------------------------------------------------
# graph isomorphism front-end


def _adjacency_bits(G: np.ndarray, perm: tuple[int, ...]) -> int:
    m = G.shape[0]
    out = 0
    p = 0
    for i in range(m):
        for j in range(i + 1, m):
            if G[perm[i], perm[j]]:
                out |= 1 << p
            p += 1
    return out


def are_isomorphic(G0: np.ndarray, G1: np.ndarray) -> bool:
    m = G0.shape[0]
    target = _adjacency_bits(G1, tuple(range(m)))
    return any(_adjacency_bits(G0, p) == target for p in itertools.permutations(range(m)))


def gi_to_sd(G0: np.ndarray, G1: np.ndarray, lam: int = 3) -> SDInstance:
    """P_b(x) = adjacency bits of the (x mod m!)-th relabeling of G_b.

    n = ceil(log2 m!) + lam input bits, so indexing bias contributes at most
    about m!/2^n < 2^-lam to the output TV.  Desk scale: m <= 6.
    """
    m = G0.shape[0]
    if m > 6:
        raise ValueError("graphs larger than 6 vertices are out of scope")
    if G1.shape[0] != m:
        raise ValueError("graphs must have the same vertex count")
    perms = list(itertools.permutations(range(m)))
    fact = len(perms)
    n = int(np.ceil(np.log2(fact))) + lam
    w = m * (m - 1) // 2
    vals0 = np.array([_adjacency_bits(G0, p) for p in perms], dtype=np.int64)
    vals1 = np.array([_adjacency_bits(G1, p) for p in perms], dtype=np.int64)
    x = np.arange(1 << n, dtype=np.int64)
    T0 = vals0[x % fact]
    T1 = vals1[x % fact]
    tv = tv_exact(T0, T1, w)
    promise = NEAR if are_isomorphic(G0, G1) else FAR
    P0 = OracleFunction(T0, n, w, name="gi/P0")
    P1 = OracleFunction(T1, n, w, name="gi/P1")
    return SDInstance(n, P0, P1, promise, tv, "gi", f"gi-m{m}")


def random_graph(m: int, rng: np.random.Generator) -> np.ndarray:
    G = (rng.random((m, m)) < 0.5).astype(np.int64)
    G = np.triu(G, 1)
    return G + G.T


def relabel(G: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    m = G.shape[0]
    p = rng.permutation(m)
    return G[np.ix_(p, p)]


def gi_demo_pairs(seed: int, count: int = 10, m: int = 4) -> list[tuple[np.ndarray, np.ndarray, bool]]:
    """Seeded demo pairs alternating isomorphic / non-isomorphic."""
    rng = substream(seed, _GEN_STREAM, 6)
    pairs = []
    for j in range(count):
        G0 = random_graph(m, rng)
        if j % 2 == 0:
            G1 = relabel(G0, rng)
        else:
            while True:
                G1 = random_graph(m, rng)
                if not are_isomorphic(G0, G1):
                    break
        pairs.append((G0, G1, are_isomorphic(G0, G1)))
    return pairs
