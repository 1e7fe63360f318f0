"""Command-line entry point.

    hidden-history <experiment> [--theory T] [--n 3,6,9] [--trials K]
                   [--seed S] [--out DIR] [--strict] [--config FILE]
                   [--figures] [--timings] [--R N] [--C N]

Configuration resolves in three layers: built-in defaults, then a flat
key=value config file (--config), then explicit flags.  The seed falls
back to the HH_SEED environment variable when neither layer sets it.

Exit codes: 0 success; 2 configuration error; 3 experiment-level failure
(an internal invariant broke, or --strict and the experiment's pass
threshold was missed).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .experiments import (
    KINDS,
    ConfigError,
    ExperimentConfig,
    ExperimentFailure,
    emit_results,
    run_experiment,
)


def parse_sizes(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError as e:
        raise ConfigError(f"bad size list {text!r}: {e}") from None


def load_config_file(path: str) -> dict:
    """Flat key=value lines; '#' starts a comment; blank lines ignored."""
    values = {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    for ln, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = val
    return values


_BOOL_KEYS = ("strict", "figures", "timings")


def _parse_bool(key: str, val: str) -> bool:
    low = val.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be boolean, got {val!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hidden-history",
        description="Run seeded hidden-variable history experiments.",
    )
    ap.add_argument("experiment", nargs="?", choices=KINDS, help="experiment kind")
    ap.add_argument("--theory", help="hidden-variable theory (product, flow, sinkhorn)")
    ap.add_argument("--n", "--sizes", dest="sizes", help="comma-separated size list")
    ap.add_argument("--trials", type=int, help="trials per size/cell")
    ap.add_argument("--seed", type=int, help="master seed (fallback: HH_SEED, then 0)")
    ap.add_argument("--out", help="output directory for results.csv / summary.json")
    ap.add_argument("--strict", action="store_true", default=None,
                    help="exit 3 when the experiment misses its pass threshold")
    ap.add_argument("--config", help="flat key=value config file")
    ap.add_argument("--figures", action="store_true", default=None,
                    help="also render a PNG figure into --out")
    ap.add_argument("--timings", action="store_true", default=None,
                    help="write a non-canonical timings.json sidecar into --out")
    ap.add_argument("--R", type=int, help="override batch-count constant")
    ap.add_argument("--C", type=int, help="override search batch factor")
    return ap


def resolve_config(args: argparse.Namespace) -> tuple[ExperimentConfig, bool]:
    file_vals = load_config_file(args.config) if args.config else {}
    for key in file_vals:
        if key not in ("experiment", "theory", "n", "sizes", "trials", "seed", "out",
                       "R", "C", *_BOOL_KEYS):
            raise ConfigError(f"unknown config key {key!r}")

    kind = args.experiment or file_vals.get("experiment")
    if not kind:
        raise ConfigError("no experiment given (positional argument or config 'experiment=')")

    theory = args.theory or file_vals.get("theory") or "flow"

    sizes = None
    if args.sizes is not None:
        sizes = parse_sizes(args.sizes)
    elif "n" in file_vals or "sizes" in file_vals:
        sizes = parse_sizes(file_vals.get("n", file_vals.get("sizes", "")))

    def _int_of(flag_val, key):
        if flag_val is not None:
            return flag_val
        if key in file_vals:
            try:
                return int(file_vals[key])
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {file_vals[key]!r}") from None
        return None

    trials = _int_of(args.trials, "trials")
    R = _int_of(args.R, "R")
    C = _int_of(args.C, "C")

    seed = _int_of(args.seed, "seed")
    if seed is None:
        env = os.environ.get("HH_SEED")
        if env is not None:
            try:
                seed = int(env)
            except ValueError:
                raise ConfigError(f"HH_SEED must be an integer, got {env!r}") from None
    if seed is None:
        seed = 0

    def _bool_of(flag_val, key):
        if flag_val is not None:
            return flag_val
        if key in file_vals:
            return _parse_bool(key, file_vals[key])
        return False

    strict = _bool_of(args.strict, "strict")
    figures = _bool_of(args.figures, "figures")
    timings = _bool_of(args.timings, "timings")
    out = args.out or file_vals.get("out")

    cfg = ExperimentConfig(
        kind=kind, theory=theory, sizes=sizes, trials=trials, seed=seed,
        R=R, C=C, strict=strict, figures=figures, out=out,
    ).validate()
    return cfg, timings


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, timings = resolve_config(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    t0 = time.perf_counter()
    try:
        records, summary = run_experiment(cfg)
    except ExperimentFailure as e:
        print(f"experiment failure: {e}", file=sys.stderr)
        return 3
    elapsed_ms = (time.perf_counter() - t0) * 1000.0

    if cfg.out:
        paths = emit_results(records, summary, cfg.out)
        if cfg.figures:
            from .figures import render_figures

            paths += render_figures(cfg.kind, records, summary, cfg.out)
        if timings:
            sidecar = Path(cfg.out) / "timings.json"
            sidecar.write_text(json.dumps({"total_ms": elapsed_ms}) + "\n")
            paths.append(sidecar)
        for p in paths:
            print(p)
    print(json.dumps(summary, sort_keys=True))

    if cfg.strict and not summary.get("pass", False):
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
