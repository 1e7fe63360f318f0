"""Seeded, reproducible experiment runner.

Every experiment is a pure function of (config, seed): trials draw from
per-trial substreams, records are ordered by trial index, and emission
writes byte-stable CSV/JSON.  Wall-clock time is deliberately excluded
from the canonical outputs (the ms column is always 0) so reruns diff
clean; pass --timings at the CLI for a non-canonical sidecar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import juggle as jug
from . import sd as sdmod
from . import search as searchmod
from .oracle import HistoryQuery, empirical_marginals, sample_batch, substream
from .qsim import BasisPermutation, Gate, Hadamard, PhaseFlip, SlicedProgram
from .theories import (
    FLOW,
    PRODUCT,
    THEORIES,
    check_indifference,
    check_marginalization,
    theory_kernel,
)

KINDS = ("axioms", "marginals", "juggle", "sd", "collision", "gi", "search", "scaling")

MARGINAL_TOL = 0.02
RESIDUAL_TOL = 1e-7

_AX_STREAM = 0xA10
_MARG_STREAM = 0xA11
_JUG_STREAM = 0xA12

#: lanes sharing one juggle program build (same qubit draws, independent
#: trajectories); the failure bound averages over draws either way.
JUGGLE_BLOCK_LANES = 25


class ConfigError(ValueError):
    """Invalid experiment configuration (unknown kind, bad sizes, ...)."""


class ExperimentFailure(RuntimeError):
    """An invariant the experiment relies on broke mid-run."""


_DEFAULT_SIZES = {
    "axioms": (2, 3, 4),
    "marginals": (3,),
    "juggle": (2, 3, 4, 5, 6, 7, 8),
    "sd": (),  # per-cell defaults, see _run_sd
    "collision": (4, 6, 8),
    "gi": (4,),
    "search": (3, 6, 9),
    "scaling": (3, 6, 9),
}

_DEFAULT_TRIALS = {
    "axioms": 200,
    "marginals": 20,
    "juggle": 10_000,
    "sd": 50,
    "collision": 50,
    "gi": 10,
    "search": 200,
    "scaling": 200,
}

_SIZE_CAPS = {
    "axioms": 4,
    "marginals": 4,
    "juggle": 10,
    "sd": 8,
    "collision": 10,
    "gi": 6,
    "search": 12,
    "scaling": 12,
}


@dataclass
class ExperimentConfig:
    kind: str
    theory: str = FLOW
    sizes: tuple[int, ...] | None = None
    trials: int | None = None
    seed: int = 0
    R: int | None = None
    C: int | None = None
    strict: bool = False
    figures: bool = False
    out: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r} (choose from {KINDS})")
        if self.theory not in THEORIES:
            raise ConfigError(f"unknown theory {self.theory!r} (choose from {THEORIES})")
        trials = self.trials if self.trials is not None else _DEFAULT_TRIALS[self.kind]
        if trials < 1:
            raise ConfigError("trials must be >= 1")
        sizes = self.sizes
        if sizes is not None:
            cap = _SIZE_CAPS[self.kind]
            for s in sizes:
                if s < 1 or s > cap:
                    raise ConfigError(f"size {s} outside 1..{cap} for {self.kind}")
            if self.kind in ("search", "scaling") and any(s % 3 for s in sizes):
                raise ConfigError("search sizes must be divisible by 3")
            if self.kind == "juggle" and any(s < 2 for s in sizes):
                raise ConfigError("juggle needs register size >= 2")
        if self.R is not None and self.R < 1:
            raise ConfigError("R must be >= 1")
        if self.C is not None and self.C < 1:
            raise ConfigError("C must be >= 1")
        return self

    def resolved_sizes(self) -> tuple[int, ...]:
        return self.sizes if self.sizes is not None else _DEFAULT_SIZES[self.kind]

    def resolved_trials(self) -> int:
        return self.trials if self.trials is not None else _DEFAULT_TRIALS[self.kind]


@dataclass
class TrialRecord:
    experiment: str
    size: int
    seed: int
    verdict: str
    success: bool
    queries: int
    batches: int
    ms: float = 0.0

    def csv_row(self) -> str:
        # ms is pinned to 0 in canonical output: determinism over telemetry.
        return (
            f"{self.experiment},{self.size},{self.seed},{self.verdict},"
            f"{'true' if self.success else 'false'},{self.queries},{self.batches},0"
        )


CSV_HEADER = "experiment,size,seed,verdict,success,queries,batches,ms"


def _trial_seed(seed: int, idx: int) -> int:
    """Per-trial integer seed; generators expand these into substreams."""
    return seed * 1_000_003 + idx


# ---------------------------------------------------------------------------
# randomized inputs for the axiom / marginal suites


def random_state(l: int, rng: np.random.Generator) -> np.ndarray:
    s = rng.normal(size=1 << l) + 1j * rng.normal(size=1 << l)
    return s / np.linalg.norm(s)


def _haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_gbd_unitary(l: int, rng: np.random.Generator) -> np.ndarray:
    """Permutation-conjugated block-diagonal unitary with >= 2 blocks.

    The resulting transition structure partitions the basis into the
    permuted blocks, which is exactly what the indifference check must
    recover.
    """
    dim = 1 << l
    n_blocks = int(rng.integers(2, min(4, dim) + 1))
    cuts = np.sort(rng.choice(np.arange(1, dim), size=n_blocks - 1, replace=False))
    bounds = np.concatenate([[0], cuts, [dim]])
    U = np.zeros((dim, dim), dtype=complex)
    for a, b in zip(bounds[:-1], bounds[1:]):
        U[a:b, a:b] = _haar_unitary(b - a, rng)
    p1 = rng.permutation(dim)
    p2 = rng.permutation(dim)
    return U[np.ix_(p1, p2)]


def random_program(l: int, n_slices: int, rng: np.random.Generator) -> SlicedProgram:
    """Random oracle-free program, Hadamard-heavy, one gate per slice."""
    dim = 1 << l
    slices: list[tuple[Gate, ...]] = []
    for _ in range(n_slices):
        r = rng.random()
        if r < 0.6:
            g: Gate = Hadamard(int(rng.integers(0, l)))
        elif r < 0.8:
            mask = int(rng.integers(1, dim))
            g = PhaseFlip(mask=mask, value=int(rng.integers(0, dim)) & mask,
                          negate=bool(rng.integers(2)))
        else:
            g = BasisPermutation(tuple(int(x) for x in rng.permutation(dim)))
        slices.append((g,))
    return SlicedProgram(l, tuple(slices), frozenset(range(1, n_slices + 1)))


# ---------------------------------------------------------------------------
# per-kind runners (records, summary fragment)


def _run_axioms(cfg: ExperimentConfig) -> tuple[list[TrialRecord], dict]:
    sizes = cfg.resolved_sizes()
    trials = cfg.resolved_trials()
    records = []
    max_resid = 0.0
    violations_total = 0
    for idx in range(trials):
        l = sizes[idx % len(sizes)]
        rng = substream(_trial_seed(cfg.seed, idx), _AX_STREAM)
        state = random_state(l, rng)
        U = random_gbd_unitary(l, rng)
        K = theory_kernel(state, U, cfg.theory)
        resid = check_marginalization(K.matrix, state, U @ state)
        viol = check_indifference(K.matrix, U)
        max_resid = max(max_resid, resid)
        ok = resid <= RESIDUAL_TOL and (cfg.theory == PRODUCT or not viol)
        if cfg.theory != PRODUCT:
            violations_total += len(viol)
        records.append(
            TrialRecord(
                "axioms", l, _trial_seed(cfg.seed, idx), "ok" if ok else "violated", ok, 0, 0
            )
        )
    summary = {
        "max_marginalization_residual": float(max_resid),
        "indifference_violations": int(violations_total),
        "pass": bool(
            max_resid <= RESIDUAL_TOL and (cfg.theory == PRODUCT or violations_total == 0)
        ),
    }
    return records, summary


def _run_marginals(cfg: ExperimentConfig) -> tuple[list[TrialRecord], dict]:
    sizes = cfg.resolved_sizes()
    trials = cfg.resolved_trials()
    records = []
    worst = 0.0
    for idx in range(trials):
        l = sizes[idx % len(sizes)]
        rng = substream(_trial_seed(cfg.seed, idx), _MARG_STREAM)
        program = random_program(l, 6, rng)
        query = HistoryQuery(program, cfg.theory, _trial_seed(cfg.seed, idx))
        report = empirical_marginals(query, trials=100_000)
        tv = report.max_tv
        worst = max(worst, tv)
        records.append(
            TrialRecord(
                "marginals",
                l,
                _trial_seed(cfg.seed, idx),
                "ok" if tv <= MARGINAL_TOL else "drift",
                tv <= MARGINAL_TOL,
                0,
                1,
            )
        )
    return records, {"max_tv": float(worst), "pass": bool(worst <= MARGINAL_TOL)}


def _run_juggle(cfg: ExperimentConfig) -> tuple[list[TrialRecord], dict]:
    sizes = cfg.resolved_sizes()
    trials = cfg.resolved_trials()
    records = []
    per_size = {}
    for l in sizes:
        fails = 0
        done = 0
        block = 0
        while done < trials:
            lanes = min(JUGGLE_BLOCK_LANES, trials - done)
            bseed = _trial_seed(cfg.seed, l * 1_000_000 + block)
            rng = substream(bseed, _JUG_STREAM)
            a = int(rng.integers(0, 1 << l))
            b = int(rng.integers(0, (1 << l) - 1))
            if b >= a:
                b += 1
            prep = jug.pair_prep_slices(l, a, b)
            plan = jug.build_juggle_program(prep, l, seed=bseed)
            batch = sample_batch(plan.program, cfg.theory, bseed, lanes)
            cps = [t for t in sorted(plan.program.checkpoints)]
            for lane in range(lanes):
                seen = {int(v) for v in batch.values[lane, cps]}
                ok = a in seen and b in seen
                fails += not ok
                records.append(
                    TrialRecord(
                        "juggle", l, bseed, "ok" if ok else "fail", ok, 0, plan.attempts
                    )
                )
            done += lanes
            block += 1
        bound = jug.failure_bound(l)
        sigma = float(np.sqrt(bound * (1.0 - bound) / trials))
        per_size[str(l)] = {
            "failure_rate": fails / trials,
            "bound": bound,
            "limit": bound + 3.0 * sigma,
        }
    ok_all = all(v["failure_rate"] <= v["limit"] for v in per_size.values())
    return records, {"per_size": per_size, "pass": bool(ok_all)}


_SD_CELLS = (
    ("sd-near-1to1", sdmod.near_one_to_one, "one-to-one"),
    ("sd-far-1to1", sdmod.far_one_to_one, "one-to-one"),
    ("sd-near-m2o", sdmod.near_many_to_one, "many-to-one"),
    ("sd-far-m2o", sdmod.far_many_to_one, "many-to-one"),
)
_SD_CELL_SIZES = {"one-to-one": (4, 5, 6), "many-to-one": (3, 4)}


def _run_sd(cfg: ExperimentConfig) -> tuple[list[TrialRecord], dict]:
    trials = cfg.resolved_trials()
    records = []
    cells = {}
    for cell, gen, kind in _SD_CELLS:
        sizes = cfg.sizes if cfg.sizes is not None else _SD_CELL_SIZES[kind]
        hits = 0
        for idx in range(trials):
            n = sizes[idx % len(sizes)]
            tseed = _trial_seed(cfg.seed, idx)
            inst = gen(n, tseed)
            if kind == "one-to-one":
                res = sdmod.solve_sd_one_to_one(
                    inst.P0, inst.P1, n, tseed, R=cfg.R, theory=cfg.theory,
                    instance_id=inst.instance_id,
                )
            else:
                res = sdmod.solve_sd_general(
                    inst.P0, inst.P1, n, tseed, R=cfg.R, theory=cfg.theory,
                    instance_id=inst.instance_id,
                )
            ok = res.verdict == inst.promise
            hits += ok
            records.append(
                TrialRecord(cell, n, tseed, res.verdict, ok, res.queries, res.batches_used)
            )
        cells[cell] = hits / trials
    return records, {
        "accuracy": cells,
        "pass": bool(min(cells.values()) >= 0.9),
    }


def _run_collision(cfg: ExperimentConfig) -> tuple[list[TrialRecord], dict]:
    sizes = cfg.resolved_sizes()
    trials = cfg.resolved_trials()
    records = []
    acc = {}
    for side, gen in (
        (sdmod.ONE_TO_ONE, sdmod.collision_one_to_one),
        (sdmod.TWO_TO_ONE, sdmod.collision_two_to_one),
    ):
        hits = 0
        for idx in range(trials):
            n = sizes[idx % len(sizes)]
            tseed = _trial_seed(cfg.seed, idx)
            g = gen(n, tseed)
            res = sdmod.distinguish_collision(g, tseed, theory=cfg.theory)
            ok = res.verdict == side
            hits += ok
            records.append(
                TrialRecord(
                    f"collision-{side}", n, tseed, res.verdict, ok, res.queries, res.batches_used
                )
            )
        acc[side] = hits / trials
    return records, {"accuracy": acc, "pass": bool(min(acc.values()) >= 0.9)}


GI_DEFAULT_R = 256


def _run_gi(cfg: ExperimentConfig) -> tuple[list[TrialRecord], dict]:
    trials = cfg.resolved_trials()
    m = cfg.resolved_sizes()[0]
    pairs = sdmod.gi_demo_pairs(cfg.seed, count=trials, m=m)
    records = []
    hits = 0
    for idx, (G0, G1, iso) in enumerate(pairs):
        inst = sdmod.gi_to_sd(G0, G1)
        tseed = _trial_seed(cfg.seed, idx)
        res = sdmod.solve_sd_one_to_one(
            inst.P0, inst.P1, inst.n, tseed, R=cfg.R if cfg.R is not None else GI_DEFAULT_R,
            theory=cfg.theory, instance_id=f"{inst.instance_id}-p{idx}",
        )
        ok = (res.verdict == sdmod.NEAR) == iso
        hits += ok
        records.append(
            TrialRecord(f"gi-{'iso' if iso else 'noniso'}", m, tseed, res.verdict, ok,
                        res.queries, res.batches_used)
        )
    return records, {"accuracy": hits / trials, "pass": bool(hits == trials)}


def scaling_fit(sizes: list[int], mean_queries: list[float]) -> dict:
    """Least-squares fit of log(queries) against log(N), N = 2^size."""
    x = np.array(sizes, dtype=float) * np.log(2.0)
    y = np.log(np.asarray(mean_queries, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": float(r2)}


def _run_search(cfg: ExperimentConfig, fit: bool) -> tuple[list[TrialRecord], dict]:
    sizes = cfg.resolved_sizes()
    trials = cfg.resolved_trials()
    records = []
    per_size = {}
    means = []
    for n in sizes:
        wins = 0
        qsum = 0
        for idx in range(trials):
            tseed = _trial_seed(cfg.seed, idx)
            inst = searchmod.make_search_instance(n, tseed)
            res = searchmod.dqp_search(
                inst.f, n, tseed,
                C=cfg.C if cfg.C is not None else searchmod.SEARCH_C_DEFAULT,
                theory=cfg.theory,
            )
            if res.juggle_queries != 0:
                raise ExperimentFailure(
                    f"juggling charged {res.juggle_queries} queries (n={n}, seed={tseed})"
                )
            ok = res.found == inst.marked
            wins += ok
            qsum += res.queries
            records.append(
                TrialRecord(
                    "search", n, tseed, "found" if ok else "miss", ok, res.queries, res.batches
                )
            )
        per_size[str(n)] = {"success": wins / trials, "mean_queries": qsum / trials}
        means.append(qsum / trials)
    summary = {"per_size": per_size}
    ok = all(v["success"] >= 2.0 / 3.0 for v in per_size.values())
    if fit:
        summary["fit"] = scaling_fit(list(sizes), means)
        ok = ok and 0.2 <= summary["fit"]["slope"] <= 0.5
    summary["pass"] = bool(ok)
    return records, summary


def run_experiment(config: ExperimentConfig) -> tuple[list[TrialRecord], dict]:
    """Execute the configured experiment; (records, summary), deterministic."""
    cfg = config.validate()
    if cfg.kind == "axioms":
        records, summary = _run_axioms(cfg)
    elif cfg.kind == "marginals":
        records, summary = _run_marginals(cfg)
    elif cfg.kind == "juggle":
        records, summary = _run_juggle(cfg)
    elif cfg.kind == "sd":
        records, summary = _run_sd(cfg)
    elif cfg.kind == "collision":
        records, summary = _run_collision(cfg)
    elif cfg.kind == "gi":
        records, summary = _run_gi(cfg)
    elif cfg.kind == "search":
        records, summary = _run_search(cfg, fit=False)
    else:
        records, summary = _run_search(cfg, fit=True)
    summary = {"experiment": cfg.kind, "theory": cfg.theory, "seed": cfg.seed, **summary}
    return records, summary


def emit_results(records: list[TrialRecord], summary: dict, path) -> list[Path]:
    """Write results.csv and summary.json under ``path``; byte-stable."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    lines = [CSV_HEADER] + [r.csv_row() for r in records]
    csv_path.write_text("\n".join(lines) + "\n")
    json_path = out / "summary.json"
    json_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return [csv_path, json_path]
