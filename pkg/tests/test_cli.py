"""CLI layering, experiment plumbing, canonical outputs, figures."""

import json

import numpy as np
import pytest

from hidden_history.cli import (
    build_parser,
    load_config_file,
    main,
    parse_sizes,
    resolve_config,
)
from hidden_history.experiments import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    TrialRecord,
    _trial_seed,
    emit_results,
    run_experiment,
    scaling_fit,
)
from hidden_history.figures import render_figures


def test_parse_sizes():
    assert parse_sizes("3,6,9") == (3, 6, 9)
    assert parse_sizes("4") == (4,)
    assert parse_sizes("2, 3") == (2, 3)
    with pytest.raises(ConfigError):
        parse_sizes("3;6")


def test_load_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("experiment = juggle\n# comment\ntrials=7  # inline\n\nseed=3\n")
    assert load_config_file(str(p)) == {"experiment": "juggle", "trials": "7", "seed": "3"}
    with pytest.raises(ConfigError):
        load_config_file(str(tmp_path / "absent.cfg"))
    bad = tmp_path / "bad.cfg"
    bad.write_text("just some words\n")
    with pytest.raises(ConfigError):
        load_config_file(str(bad))


def test_unknown_config_key_rejected(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("experiment=juggle\nbogus=1\n")
    args = build_parser().parse_args(["--config", str(p)])
    with pytest.raises(ConfigError):
        resolve_config(args)


def test_precedence_flags_over_file_over_defaults(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("experiment=juggle\ntrials=7\nseed=3\ntheory=sinkhorn\nstrict=yes\n")
    args = build_parser().parse_args(["--config", str(p), "--trials", "9"])
    cfg, timings = resolve_config(args)
    assert cfg.kind == "juggle"
    assert cfg.trials == 9  # flag wins
    assert cfg.seed == 3  # file fills in
    assert cfg.theory == "sinkhorn"
    assert cfg.strict is True
    assert timings is False
    # positional overrides the file's experiment
    args = build_parser().parse_args(["axioms", "--config", str(p)])
    cfg, _ = resolve_config(args)
    assert cfg.kind == "axioms"


def test_seed_environment_fallback(monkeypatch):
    monkeypatch.setenv("HH_SEED", "41")
    cfg, _ = resolve_config(build_parser().parse_args(["juggle"]))
    assert cfg.seed == 41
    cfg, _ = resolve_config(build_parser().parse_args(["juggle", "--seed", "5"]))
    assert cfg.seed == 5
    monkeypatch.setenv("HH_SEED", "nope")
    with pytest.raises(ConfigError):
        resolve_config(build_parser().parse_args(["juggle"]))
    monkeypatch.delenv("HH_SEED")
    cfg, _ = resolve_config(build_parser().parse_args(["juggle"]))
    assert cfg.seed == 0


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="nope").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="axioms", theory="born").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="axioms", trials=0).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="axioms", sizes=(7,)).validate()  # over the cap
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="search", sizes=(4,)).validate()  # not divisible by 3
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="sd", R=0).validate()


def test_trial_record_row_and_seed():
    r = TrialRecord("juggle", 3, 17, "ok", True, 0, 18, ms=12.5)
    assert r.csv_row() == "juggle,3,17,ok,true,0,18,0"  # ms pinned to 0
    assert _trial_seed(5, 2) == 5 * 1_000_003 + 2


def test_scaling_fit_hand_case():
    # mean queries exactly 2^{n/3} -> slope 1/3, perfect fit
    fit = scaling_fit([3, 6, 9], [2.0, 4.0, 8.0])
    assert fit["slope"] == pytest.approx(1 / 3, abs=1e-12)
    assert fit["r2"] == pytest.approx(1.0, abs=1e-12)
    assert fit["intercept"] == pytest.approx(0.0, abs=1e-12)


def test_emit_results_canonical(tmp_path):
    records = [TrialRecord("axioms", 2, 1, "ok", True, 0, 0)]
    summary = {"pass": True, "b": 2, "a": 1}
    paths = emit_results(records, summary, tmp_path / "out")
    csv_text = paths[0].read_text()
    assert csv_text == CSV_HEADER + "\naxioms,2,1,ok,true,0,0,0\n"
    js = paths[1].read_text()
    assert js == json.dumps(summary, sort_keys=True, indent=2) + "\n"
    # empty record list still yields a header-only csv
    paths = emit_results([], {}, tmp_path / "empty")
    assert paths[0].read_text() == CSV_HEADER + "\n"


def test_rerun_is_byte_identical(tmp_path):
    cfg = dict(kind="collision", sizes=(4,), trials=3, seed=9)
    for sub in ("a", "b"):
        records, summary = run_experiment(ExperimentConfig(**cfg))
        emit_results(records, summary, tmp_path / sub)
    for name in ("results.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_main_success_and_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(
        ["collision", "--n", "4", "--trials", "2", "--seed", "1", "--out", str(out), "--strict"]
    )
    captured = capsys.readouterr()
    assert code == 0
    assert (out / "results.csv").exists()
    assert (out / "summary.json").exists()
    assert not (out / "timings.json").exists()
    last = captured.out.strip().splitlines()[-1]
    summary = json.loads(last)
    assert summary["pass"] is True and summary["experiment"] == "collision"


def test_main_timings_sidecar(tmp_path):
    out = tmp_path / "run"
    code = main(["collision", "--n", "4", "--trials", "1", "--out", str(out), "--timings"])
    assert code == 0
    sidecar = json.loads((out / "timings.json").read_text())
    assert sidecar["total_ms"] > 0


def test_main_config_errors(capsys):
    assert main(["axioms", "--n", "9"]) == 2  # size over the cap
    assert "config error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["not-a-kind"])
    assert exc.value.code == 2  # argparse rejects unknown choices


def test_main_strict_failure_exit_code(capsys):
    # the designed negative control: the non-indifferent theory misreads
    # far instances, so the experiment misses its pass threshold
    code = main(
        ["sd", "--theory", "product", "--trials", "2", "--n", "4", "--R", "5", "--strict"]
    )
    assert code == 3
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["pass"] is False
    # same run without --strict reports and exits clean
    assert main(["sd", "--theory", "product", "--trials", "2", "--n", "4", "--R", "5"]) == 0


def test_main_cli_byte_identical(tmp_path):
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["juggle", "--n", "2", "--trials", "50", "--out", str(out)]) == 0
        outs.append(out)
    for name in ("results.csv", "summary.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_figures_rendered(tmp_path):
    records, summary = run_experiment(
        ExperimentConfig(kind="scaling", sizes=(3, 6), trials=3, seed=1)
    )
    paths = render_figures("scaling", records, summary, tmp_path)
    assert len(paths) == 1
    assert paths[0].name == "scaling.png"
    assert paths[0].stat().st_size > 1000
    records, summary = run_experiment(ExperimentConfig(kind="juggle", sizes=(2,), trials=40))
    (fig,) = render_figures("juggle", records, summary, tmp_path)
    assert fig.exists()


def test_figures_via_cli_flag(tmp_path):
    out = tmp_path / "run"
    code = main(
        ["collision", "--n", "4", "--trials", "2", "--out", str(out), "--figures"]
    )
    assert code == 0
    assert (out / "collision.png").exists()


def test_scaling_summary_structure():
    records, summary = run_experiment(
        ExperimentConfig(kind="scaling", sizes=(3, 6), trials=3, seed=1)
    )
    assert set(summary["fit"]) == {"slope", "intercept", "r2"}
    assert set(summary["per_size"]) == {"3", "6"}
    for stats in summary["per_size"].values():
        assert {"success", "mean_queries"} <= set(stats)
