"""Hidden-variable transition kernels and the axioms they are checked against.

A *theory* maps a pre-state alpha and a unitary U (with post-state
beta = U @ alpha) to a row-stochastic matrix K, where ``K[x, y]`` is the
probability that the hidden variable moves from basis state x to y.
``U[y, x]`` is the amplitude taking x to y; an edge (x, y) is *admitted*
when ``|U[y, x]| > eta``.

Three theories are implemented:

- ``product``: every row equals the post-state's Born distribution.  It
  marginalizes correctly but ignores the unitary's structure entirely, so it
  serves as the negative control for the indifference check.
- ``flow``: transports the pre Born distribution to the post one along
  admitted edges via a deterministic max-flow (greedy lexicographic fill of
  the length-3 source->x->y->sink paths, then shortest-augmenting-path
  cleanup with lowest-index tie-breaking).  Total flow is always 1: for any
  set B of targets reachable only from sources A, unitarity gives
  ``||P_B beta|| <= ||P_A alpha||``, so every cut has capacity at least 1.
- ``sinkhorn``: iterative proportional fitting of the nonnegative seed
  ``|alpha_x| * |U[y, x]| * |beta_y|`` to row marginals p and column
  marginals q.  Seed entries start zero exactly where edges are missing and
  stay zero, so the result respects the block structure by construction.

Axioms:

- *marginalization*: ``p @ K == q`` (checked as a max-abs residual);
- *indifference*: K places no mass across distinct connected components of
  the bipartite source/target graph of admitted edges;
- *robustness*: probed empirically by perturbing the state and unitary and
  measuring the deviation of the joint mass ``K[x, y] * p[x]``.

Rows for sources carrying (numerically) zero Born mass are a self-loop by
convention: the axioms do not constrain them and trajectories never occupy
them, so the choice only keeps matrices stochastic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .qsim import (
    BasisPermutation,
    Gate,
    Hadamard,
    OracleXor,
    PhaseFlip,
    apply_gate,
    born_distribution,
    gate_permutation,
)

EDGE_ETA = 1e-12

#: below this Born mass a source row is considered unoccupied; its kernel row
#: is the self-loop convention and is never sampled from
ZERO_MASS = 1e-30

MAX_FLOW_SLACK = 1e-7

SINKHORN_TOL = 1e-12
SINKHORN_MAX_ITER = 20000

INDIFFERENCE_TOL = 1e-9

TheoryKind = Literal["product", "flow", "sinkhorn"]
PRODUCT: TheoryKind = "product"
FLOW: TheoryKind = "flow"
SINKHORN: TheoryKind = "sinkhorn"
THEORIES: tuple[TheoryKind, ...] = (PRODUCT, FLOW, SINKHORN)


@dataclass
class TransitionKernel:
    """A row-stochastic transition matrix produced by one theory."""

    matrix: np.ndarray
    theory: str
    eta: float = EDGE_ETA

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def row(self, x: int) -> np.ndarray:
        return self.matrix[x]

    def propagate(self, p: np.ndarray) -> np.ndarray:
        """Distribution over targets when sources are occupied per ``p``."""
        return p @ self.matrix

    def row_sum_residual(self) -> float:
        return float(np.max(np.abs(self.matrix.sum(axis=1) - 1.0)))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# dimension={self.dim} theory={self.theory}\n")
            fh.write("source,target,probability\n")
            for x in range(self.dim):
                for y in range(self.dim):
                    fh.write(f"{x},{y},{self.matrix[x, y]:.17g}\n")


# ---------------------------------------------------------------------------
# block structure of a unitary


def _union_find_blocks(adj: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Connected components of the bipartite graph with edge (x, y) iff
    ``adj[y, x]``; sources and targets are distinct node sets.

    Returns (source_labels, target_labels): equal labels mean same block.
    """
    dim = adj.shape[0]
    parent = np.arange(2 * dim)

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for y, x in np.argwhere(adj):
        a, b = find(int(x)), find(dim + int(y))
        if a != b:
            parent[b] = a
    roots = np.array([find(i) for i in range(2 * dim)])
    _, labels = np.unique(roots, return_inverse=True)
    return labels[:dim], labels[dim:]


def block_structure(U: np.ndarray, eta: float = EDGE_ETA) -> tuple[np.ndarray, np.ndarray]:
    """Label every source and target index with its block id."""
    return _union_find_blocks(np.abs(U) > eta)


def check_indifference(
    K: np.ndarray, U: np.ndarray, eta: float = EDGE_ETA, tol: float = INDIFFERENCE_TOL
) -> list[tuple[int, int]]:
    """All (x, y) pairs carrying mass > tol across distinct blocks of U.

    An empty list is a pass.
    """
    src, tgt = block_structure(U, eta)
    cross = src[:, None] != tgt[None, :]
    bad = cross & (K > tol)
    return [(int(x), int(y)) for x, y in np.argwhere(bad)]


def max_offblock_mass(K: np.ndarray, U: np.ndarray, eta: float = EDGE_ETA) -> float:
    """Largest kernel entry lying across distinct blocks of U."""
    src, tgt = block_structure(U, eta)
    cross = src[:, None] != tgt[None, :]
    if not cross.any():
        return 0.0
    return float(np.max(np.where(cross, K, 0.0)))


def check_marginalization(K: np.ndarray, pre: np.ndarray, post: np.ndarray) -> float:
    """Max-abs residual of p @ K against the post Born distribution."""
    p = born_distribution(pre)
    q = born_distribution(post)
    return float(np.max(np.abs(p @ K - q)))


# ---------------------------------------------------------------------------
# product theory


def product_kernel(pre: np.ndarray, U: np.ndarray, eta: float = EDGE_ETA) -> TransitionKernel:
    """Every row is the post-state Born distribution (structure-blind)."""
    post = U @ pre
    q = born_distribution(post)
    dim = q.shape[0]
    return TransitionKernel(np.tile(q, (dim, 1)), PRODUCT, eta)


# ---------------------------------------------------------------------------
# flow theory


def _neighbor_rows(mask_yx: np.ndarray) -> list[np.ndarray]:
    """mask_yx[y, x] -> for each source x the sorted admitted targets."""
    by_source = mask_yx.T
    return [np.flatnonzero(row) for row in by_source]


def _nw_prefill(p: np.ndarray, q: np.ndarray, nbrs: list[np.ndarray]) -> np.ndarray:
    """Greedy fill of direct source->x->y->sink paths, sources ascending and
    targets ascending: the lexicographically first shortest paths."""
    dim = p.shape[0]
    flow = np.zeros((dim, dim))
    res_q = q.astype(float).copy()
    for x in range(dim):
        res_p = float(p[x])
        if res_p <= 0.0:
            continue
        for y in nbrs[x]:
            if res_p <= 0.0:
                break
            push = min(res_p, float(res_q[y]))
            if push <= 0.0:
                continue
            flow[x, y] = push
            res_p -= push
            res_q[y] -= push
    return flow


def _augment(p: np.ndarray, q: np.ndarray, mask_xy: np.ndarray, flow: np.ndarray) -> None:
    """Shortest-augmenting-path cleanup on the residual graph, in place.

    BFS explores nodes in ascending index, so among equal-length paths the
    lexicographically smallest is taken and the routing is deterministic.
    """
    dim = p.shape[0]
    big = 2.0
    floor = 1e-15
    while True:
        res_sx = p - flow.sum(axis=1)
        res_yt = q - flow.sum(axis=0)
        parent_kind = {}
        frontier = [("s", -1)]
        seen_x = np.zeros(dim, dtype=bool)
        seen_y = np.zeros(dim, dtype=bool)
        reached_t = False
        while frontier and not reached_t:
            nxt = []
            for kind, i in frontier:
                if kind == "s":
                    for x in np.flatnonzero(res_sx > floor):
                        if not seen_x[x]:
                            seen_x[x] = True
                            parent_kind[("x", int(x))] = ("s", -1)
                            nxt.append(("x", int(x)))
                elif kind == "x":
                    fwd = mask_xy[i] & ~seen_y & (flow[i] < big - floor)
                    for y in np.flatnonzero(fwd):
                        seen_y[y] = True
                        parent_kind[("y", int(y))] = ("x", i)
                        nxt.append(("y", int(y)))
                elif kind == "y":
                    if res_yt[i] > floor and not reached_t:
                        parent_kind[("t", -1)] = ("y", i)
                        reached_t = True
                        break
                    back = (flow[:, i] > floor) & ~seen_x
                    for x in np.flatnonzero(back):
                        seen_x[x] = True
                        parent_kind[("x", int(x))] = ("y", i)
                        nxt.append(("x", int(x)))
            frontier = nxt
        if not reached_t:
            return
        path = []
        node = ("t", -1)
        while node != ("s", -1):
            prev = parent_kind[node]
            path.append((prev, node))
            node = prev
        path.reverse()
        bottleneck = np.inf
        for (pk, pi), (nk, ni) in path:
            if pk == "s":
                bottleneck = min(bottleneck, res_sx[ni])
            elif pk == "x" and nk == "y":
                bottleneck = min(bottleneck, big - flow[pi, ni])
            elif pk == "y" and nk == "x":
                bottleneck = min(bottleneck, flow[ni, pi])
            elif pk == "y" and nk == "t":
                bottleneck = min(bottleneck, res_yt[pi])
        if not np.isfinite(bottleneck) or bottleneck <= floor:
            return
        for (pk, pi), (nk, ni) in path:
            if pk == "x" and nk == "y":
                flow[pi, ni] += bottleneck
            elif pk == "y" and nk == "x":
                flow[ni, pi] -= bottleneck


def _rows_to_kernel(flow: np.ndarray, p: np.ndarray, theory: str, eta: float) -> TransitionKernel:
    dim = p.shape[0]
    K = np.zeros((dim, dim))
    occupied = p > ZERO_MASS
    K[occupied] = flow[occupied] / p[occupied, None]
    # unoccupied sources: self-loop by convention (never sampled from)
    for x in np.flatnonzero(~occupied):
        K[x, x] = 1.0
    np.clip(K, 0.0, None, out=K)
    sums = K.sum(axis=1)
    good = sums > 0
    K[good] /= sums[good, None]
    return TransitionKernel(K, theory, eta)


def flow_kernel_dense(pre: np.ndarray, U: np.ndarray, eta: float = EDGE_ETA) -> TransitionKernel:
    """Deterministic max-flow transport of the pre marginal to the post one.

    Raises if the achieved flow falls short of 1 beyond numerical slack,
    which would indicate a non-unitary U or an edge threshold that is too
    aggressive.
    """
    post = U @ pre
    p = born_distribution(pre)
    q = born_distribution(post)
    mask_yx = np.abs(U) > eta
    nbrs = _neighbor_rows(mask_yx)
    flow = _nw_prefill(p, q, nbrs)
    _augment(p, q, mask_yx.T, flow)
    total = float(flow.sum())
    if total < 1.0 - MAX_FLOW_SLACK:
        raise RuntimeError(f"max flow {total} < 1; U is not admissible at eta={eta}")
    return _rows_to_kernel(flow, p, FLOW, eta)


# ---------------------------------------------------------------------------
# sinkhorn theory


def sinkhorn_kernel(
    pre: np.ndarray,
    U: np.ndarray,
    eta: float = EDGE_ETA,
    tol: float = SINKHORN_TOL,
    max_iter: int = SINKHORN_MAX_ITER,
) -> TransitionKernel:
    """Iterative proportional fitting of |a_x||U[y,x]||b_y| to (p, q)."""
    post = U @ pre
    p = born_distribution(pre)
    q = born_distribution(post)
    absU_xy = np.abs(U.T)
    seed = np.abs(pre)[:, None] * absU_xy * np.abs(post)[None, :]
    seed = np.where(absU_xy > eta, seed, 0.0)
    F = seed.copy()
    occupied = p > ZERO_MASS
    live_col = q > ZERO_MASS
    F[~occupied, :] = 0.0
    F[:, ~live_col] = 0.0
    residual = np.inf
    for _ in range(max_iter):
        rows = F.sum(axis=1)
        scale_r = np.where(rows > 0, p / np.where(rows > 0, rows, 1.0), 0.0)
        F *= scale_r[:, None]
        cols = F.sum(axis=0)
        scale_c = np.where(cols > 0, q / np.where(cols > 0, cols, 1.0), 0.0)
        F *= scale_c[None, :]
        residual = float(np.max(np.abs(F.sum(axis=1) - p)))
        if residual <= tol:
            break
    else:
        raise RuntimeError(
            f"proportional fitting did not converge: residual {residual} > {tol} "
            "(disconnected block with mismatched mass?)"
        )
    return _rows_to_kernel(F, p, SINKHORN, eta)


# ---------------------------------------------------------------------------
# dispatch


def theory_kernel(
    pre: np.ndarray, U: np.ndarray, theory: TheoryKind, eta: float = EDGE_ETA
) -> TransitionKernel:
    if theory == PRODUCT:
        return product_kernel(pre, U, eta)
    if theory == FLOW:
        return flow_kernel_dense(pre, U, eta)
    if theory == SINKHORN:
        return sinkhorn_kernel(pre, U, eta)
    raise ValueError(f"unknown theory {theory!r}")


# ---------------------------------------------------------------------------
# per-pair closed forms for single-Hadamard steps
#
# A Hadamard on qubit j splits the register into 2x2 blocks {v, v ^ (1<<j)}.
# Within one block, write a < b for the two indices and (pa, pb) / (qa, qb)
# for pre/post Born masses.  The flow kernel's greedy rule gives
#     at a: P(move to b) = max(0, pa - qa) / pa
#     at b: P(move to a) = max(0, qa - pa) / pb
# and the sinkhorn kernel's seed is rank-1 within the block (|a_x| * c * |b_y|
# with c = 1/sqrt(2)), whose fitting limit is the independent coupling: the
# block-product rule P(end at w) = q_w / (qa + qb) regardless of position.
# Both equal the corresponding dense kernels restricted to the block; the
# trajectory engine steps with them without materializing kernels.


def hadamard_flip_probs(
    pre: np.ndarray,
    post: np.ndarray,
    qubit: int,
    theory: TheoryKind,
    at: np.ndarray | None = None,
) -> np.ndarray:
    """P(move to v ^ (1<<qubit)) during this gate, per basis index v.

    ``at`` restricts evaluation to the given indices (the result aligns with
    it); the default covers the whole register.  Everything is gathered, so
    the cost is O(len(at)) — the trajectory engine passes the handful of
    occupied values instead of the full dimension.
    """
    if at is None:
        at = np.arange(pre.shape[0])
    bit = 1 << qubit
    lo = at & ~bit
    hi = lo | bit
    at_lo = (at & bit) == 0
    p_at = np.abs(pre[at]) ** 2
    q_lo = np.abs(post[lo]) ** 2
    q_hi = np.abs(post[hi]) ** 2
    if theory == FLOW:
        p_lo = np.abs(pre[lo]) ** 2
        d = p_lo - q_lo
        num = np.where(at_lo, d, -d)
        flip = np.where(
            p_at > ZERO_MASS, np.clip(num, 0.0, None) / np.maximum(p_at, ZERO_MASS), 0.0
        )
    elif theory == SINKHORN:
        q_other = np.where(at_lo, q_hi, q_lo)
        tot = q_lo + q_hi
        flip = np.where(tot > ZERO_MASS, q_other / np.maximum(tot, ZERO_MASS), 0.0)
    else:
        raise ValueError(f"no pairwise rule for theory {theory!r}")
    return np.clip(flip, 0.0, 1.0)


def kernel_row(
    theory: TheoryKind,
    state_before: np.ndarray,
    state_after: np.ndarray,
    slice_gates: Sequence[Gate],
    v_from: int,
    eta: float = EDGE_ETA,
) -> np.ndarray:
    """Row ``v_from`` of the kernel a gate sequence induces.

    The sequence's kernel is the composition of the per-gate kernels, each
    evaluated on the intermediate state the previous gates produced — the
    same semantics the trajectory engine samples from.  ``state_after`` is
    the caller's precomputed post-slice state (kept for interface symmetry;
    intermediates are recomputed here).
    """
    dim = state_before.shape[0]
    l = dim.bit_length() - 1
    row = np.zeros(dim)
    row[v_from] = 1.0
    state = state_before
    for gate in slice_gates:
        nxt = apply_gate(state, gate, l, count=False)
        if theory == PRODUCT:
            row = born_distribution(nxt)
        elif isinstance(gate, Hadamard):
            flip = hadamard_flip_probs(state, nxt, gate.qubit, theory)
            moved = row * flip
            partner = np.arange(dim) ^ (1 << gate.qubit)
            row = row - moved + moved[partner]
        elif isinstance(gate, (OracleXor, BasisPermutation, PhaseFlip)):
            perm = gate_permutation(gate, l)
            out = np.zeros_like(row)
            out[perm] = row
            row = out
        else:
            raise TypeError(f"unknown gate {gate!r}")
        state = nxt
    return row


# ---------------------------------------------------------------------------
# robustness probe


@dataclass
class RobustnessProbe:
    """Realized joint-mass deviation under bounded input perturbations.

    The deviation per trial is max over (x, y) of
    ``| K[x,y] p[x] - K'[x,y] p'[x] |`` where primes denote the perturbed
    instance.  ``b`` and ``c`` are carried as probe parameters for reports
    relating eps to register width (no assertion is made about them).
    """

    theory: str
    eps: float
    trials: int
    state_dev: np.ndarray
    unitary_dev: np.ndarray
    joint_dev: np.ndarray
    b: float | None = None
    c: float | None = None

    @property
    def max_deviation(self) -> float:
        return float(self.joint_dev.max()) if self.joint_dev.size else 0.0

    def to_json(self) -> dict:
        return {
            "theory": self.theory,
            "eps": self.eps,
            "trials": self.trials,
            "state_dev": [float(v) for v in self.state_dev],
            "unitary_dev": [float(v) for v in self.unitary_dev],
            "joint_dev": [float(v) for v in self.joint_dev],
            "max_deviation": self.max_deviation,
            "b": self.b,
            "c": self.c,
        }


def _polar_project(M: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(M)
    return u @ vt


#: stream tag separating the probe's draws from other consumers of a seed
_PROBE_STREAM = 0x70B


def probe_robustness(
    theory: TheoryKind,
    pre: np.ndarray,
    U: np.ndarray,
    eps: float,
    trials: int,
    seed: int,
    eta: float = EDGE_ETA,
    b: float | None = None,
    c: float | None = None,
) -> RobustnessProbe:
    """Perturb the state and unitary within eps and measure joint-mass drift.

    Perturbed states keep overlap >= 1 - eps with the original; perturbed
    unitaries are polar projections with entrywise deviation <= eps (the
    nominal perturbation is halved until both bounds hold).  Realized
    deviations are reported alongside the kernel drift.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, _PROBE_STREAM]))
    base = theory_kernel(pre, U, theory, eta).matrix
    base_joint = base * born_distribution(pre)[:, None]
    dim = pre.shape[0]
    s_dev = np.zeros(trials)
    u_dev = np.zeros(trials)
    j_dev = np.zeros(trials)
    for i in range(trials):
        if eps == 0.0:
            alpha, Up = pre, U
        else:
            g = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            scale = eps / max(np.max(np.abs(G)), 1.0)
            while True:
                alpha = pre + scale * g
                alpha = alpha / np.linalg.norm(alpha)
                Up = _polar_project(U + scale * G)
                if abs(np.vdot(alpha, pre)) >= 1.0 - eps and np.max(np.abs(Up - U)) <= eps:
                    break
                scale /= 2.0
        s_dev[i] = 1.0 - float(abs(np.vdot(alpha, pre)))
        u_dev[i] = float(np.max(np.abs(Up - U)))
        K = theory_kernel(alpha, Up, theory, eta).matrix
        joint = K * born_distribution(alpha)[:, None]
        j_dev[i] = float(np.max(np.abs(joint - base_joint)))
    return RobustnessProbe(theory, eps, trials, s_dev, u_dev, j_dev, b, c)
