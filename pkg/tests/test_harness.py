import math
import os

import numpy as np
import pytest

from zerochain.harness import (
    CSV_COLUMNS,
    ExperimentManifest,
    cli,
    code_hash,
    fit_scaling,
    manifest_from_summary,
    run_experiment,
    sweep,
)
from zerochain.solvers import SolverConfig
from zerochain.transforms import InstanceSpec, required_dimension


def small_manifest(tmp_path, **kw):
    base = dict(
        instance=InstanceSpec("ZR_BV", eps=0.4, delta=5836.8, L=1.0, sigma2=67712.0),
        solver=SolverConfig("sgd", max_rounds=200000, step=1.0),
        eps_grid=(0.4, 0.34),
        trials=2,
        seed=17,
        output=str(tmp_path / "out" / "exp"),
    )
    base.update(kw)
    return ExperimentManifest(**base)


def test_fit_scaling_examples():
    eps = np.array([0.4, 0.3, 0.2, 0.1])
    fit = fit_scaling([(math.log(1 / e), math.log(7 * e**-4)) for e in eps])
    assert fit.slope == pytest.approx(4.0, abs=1e-12)
    assert fit.stderr == pytest.approx(0.0, abs=1e-12)
    assert fit_scaling([(0, 5), (1, 5), (2, 5)]).slope == 0.0
    assert fit_scaling([(0, 0), (1, 3)]).slope == pytest.approx(3.0)
    with pytest.raises(ValueError):
        fit_scaling([(1, 2), (1, 3)])
    with pytest.raises(ValueError):
        fit_scaling([(1, 2)])


def test_manifest_roundtrip_and_validation(tmp_path):
    m = small_manifest(tmp_path, slope_lo=3.0)
    assert ExperimentManifest.loads(m.dumps()) == m
    with pytest.raises(ValueError):
        small_manifest(tmp_path, eps_grid=(0.3, 0.4))
    with pytest.raises(ValueError):
        small_manifest(tmp_path, trials=0)
    with pytest.raises(ValueError):
        ExperimentManifest.loads(m.dumps() + "bogus = 1\n")


def test_shipped_manifests_parse():
    root = os.path.join(os.path.dirname(__file__), "..", "manifests")
    for name in sorted(os.listdir(root)):
        with open(os.path.join(root, name)) as fh:
            m = ExperimentManifest.loads(fh.read())
        assert len(m.eps_grid) >= 4


def test_sweep_writes_files_and_replays(tmp_path):
    m = small_manifest(tmp_path)
    res = sweep(m)
    csv_path, sum_path = res.paths
    lines = open(csv_path).read().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + 2 * 2
    summary = open(sum_path).read()
    assert f"code_hash = {code_hash()}" in summary
    assert manifest_from_summary(summary) == m
    again = run_experiment(manifest_from_summary(summary), write=False)
    assert again.csv == open(csv_path).read()
    assert res.fit is not None and res.censored == 0
    for row in res.rows:
        assert row["queries"] == row["stationary_round"]
        assert row["final_grad_norm"] <= row["eps"]


def test_parallel_trials_match_serial(tmp_path, monkeypatch):
    m = small_manifest(tmp_path, eps_grid=(0.4,), trials=2)
    serial = run_experiment(m, do_fit=False, write=False).csv
    monkeypatch.setenv("ZEROCHAIN_THREADS", "2")
    assert run_experiment(m, do_fit=False, write=False).csv == serial


def test_censored_runs_are_flagged(tmp_path):
    m = small_manifest(tmp_path, eps_grid=(0.4,), trials=1, solver=SolverConfig("sgd", max_rounds=5, step=1.0))
    res = run_experiment(m, do_fit=False, write=False)
    assert res.censored == 1
    assert res.rows[0]["stationary_round"] == -1
    assert res.rows[0]["queries"] == 5


def test_cli_dim(capsys):
    assert cli(["dim", "--K", "1", "--T", "4", "--p", "0.25", "--delta", "0.5"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == str(required_dimension(1, 4, 0.25, 0.5))
    assert out.splitlines()[-1].startswith("RESULT {")


def test_cli_bad_arguments_exit_2(capsys):
    assert cli(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err
    assert cli(["verify", "--suite", "nope"]) == 2
    assert cli(["run", "--manifest", "/nonexistent/file"]) == 2


def test_cli_verify_small_suite(capsys):
    assert cli(["verify", "--suite", "lemma_a1", "--budget", "2000"]) == 0
    assert "3/3 clauses passed" in capsys.readouterr().out


def test_cli_verify_lemma2_default_budget(capsys):
    assert cli(["verify", "--suite", "lemma2"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS ") == 5 and "5/5 clauses passed" in out


def test_cli_lemma1_and_active(capsys):
    assert cli(["lemma1", "--T", "5", "--p", "0.5", "--delta", "0.1", "--trials", "200"]) == 0
    assert cli(["active", "--N", "3", "--T", "2"]) == 0


def test_cli_run_sweep_replay(tmp_path, capsys):
    m = small_manifest(tmp_path)
    path = tmp_path / "m.txt"
    path.write_text(m.dumps())
    assert cli(["run", "--manifest", str(path)]) == 0
    assert cli(["sweep", "--manifest", str(path)]) == 0
    assert cli(["replay", "--summary", m.output + ".summary.txt"]) == 0
    # an impossible slope window fails the check
    bad = small_manifest(tmp_path, slope_lo=100.0)
    path.write_text(bad.dumps())
    assert cli(["sweep", "--manifest", str(path)]) == 1
