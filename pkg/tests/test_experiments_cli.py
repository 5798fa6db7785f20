import csv
import math

import numpy as np
import pytest

from anchorloc import cli, experiments, synth
from anchorloc.experiments import ExperimentConfig, load_config, run, run_trials, summarize


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_config_defaults():
    cfg = ExperimentConfig()
    assert cfg.trials == 500 and cfg.sigmas == [0.01, 0.1, 1.0]
    sweep = ExperimentConfig(scenario="msl-sweep")
    assert sweep.n_anchors == 20 and sweep.n_sources == 200 and sweep.sigmas == [0.5]
    assert sweep.alphas[0] == 0.0 and sweep.alphas[-1] == 0.25 and sweep.trials == 100


@pytest.mark.parametrize("kwargs", [
    dict(trials=0), dict(sigmas=[]), dict(methods=["bmsl"]), dict(scenario="nope"),
    dict(scenario="ssl-custom"), dict(scenario="msl-file"), dict(alphas=[2.0]),
])
def test_config_invalid(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig(**kwargs)


def test_load_config(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("scenario: msl-sweep\ntrials: 3\nalphas: [0.0, 0.1]\n")
    cfg = load_config(p, trials=2, seed=None)
    assert cfg.trials == 2 and cfg.alphas == [0.0, 0.1] and cfg.seed == 0
    p.write_text("colour: blue\n")
    with pytest.raises(ValueError):
        load_config(p)


def test_zero_noise_all_methods_exact():
    cfg = ExperimentConfig(trials=1, sigmas=[0.0])
    rows = run_trials(cfg)
    assert len(rows) == 3 * 4
    assert all(r["error"] <= 1e-8 and r["status"] == "ok" for r in rows)


def test_ssl_summary_shape_and_recompute():
    cfg = ExperimentConfig(trials=4, noise=["sum-zero"], seed=3)
    rows = run_trials(cfg)
    summ = summarize(rows)
    assert {(s["sigma"], s["method"]) for s in summ} == {
        (s, m) for s in (0.01, 0.1, 1.0) for m in ("bssl", "tlmds", "ls", "lmds")}
    for s in summ:
        errs = [r["error"] for r in rows if (r["sigma"], r["method"]) == (s["sigma"], s["method"])]
        mean = sum(errs) / len(errs)
        std = math.sqrt(sum((e - mean) ** 2 for e in errs) / len(errs))
        assert abs(s["mean"] - mean) <= 1e-12 and abs(s["std"] - std) <= 1e-12


def test_summary_excludes_failed_rows():
    rows = [dict(noise="n", sigma=0.1, alpha=0.0, method="m", error=e, weight=math.nan)
            for e in (1.0, 3.0, math.nan)]
    (cell,) = summarize(rows)
    assert cell["trials"] == 3 and cell["failed"] == 1 and cell["mean"] == 2.0


def test_msl_sweep_one_row_per_alpha(tmp_path):
    cfg = ExperimentConfig(scenario="msl-sweep", trials=2, n_anchors=6, n_sources=15,
                           alphas=[0.0, 0.1, 0.25], out=str(tmp_path))
    paths = run(cfg)
    summ = read_csv(paths["summary"])
    assert [(r["alpha"], r["method"]) for r in summ] == [
        (a, m) for a in ("0.0", "0.1", "0.25") for m in ("bmsl", "lmds")]
    trials = read_csv(paths["trials"])
    assert len(trials) == 2 * 3 * 2
    assert set(trials[0]) == set(experiments.TRIAL_FIELDS)
    assert "time" in read_csv(paths["timings"])[0]


def test_msl_file_scenario(tmp_path):
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(20, 3))
    p = tmp_path / "mol.xyz"
    p.write_text("\n".join(f"C {float(a)!r} {float(b)!r} {float(c)!r}" for a, b, c in pts))
    cfg = ExperimentConfig(scenario="msl-file", points_file=str(p), trials=1, sigmas=[0.0],
                           out=str(tmp_path / "o"))
    rows = run_trials(cfg)
    assert all(r["error"] <= 1e-6 for r in rows)


def test_ssl_custom_scenario(tmp_path):
    p = tmp_path / "anchors.csv"
    p.write_text("0,0\n4,0\n0,3\n5,5\n")
    cfg = ExperimentConfig(scenario="ssl-custom", anchors_file=str(p), source=[1.0, 2.0],
                           trials=1, sigmas=[0.0])
    assert all(r["error"] <= 1e-8 for r in run_trials(cfg))


def test_solver_errors_recorded_not_raised(monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("solver blew up")

    monkeypatch.setattr(experiments.msl, "bmsl_solve", boom)
    cfg = ExperimentConfig(scenario="msl-sweep", trials=1, n_anchors=5, n_sources=6, alphas=[0.1])
    rows = run_trials(cfg)
    bad = [r for r in rows if r["method"] == "bmsl"]
    assert bad and all(r["status"].startswith("error") and math.isnan(r["error"]) for r in bad)


def _cli_run(out, *extra):
    return cli.main(["run", "--scenario", "ssl-example1", "--trials", "3", "--seed", "5",
                     "--out", str(out), *extra])


def test_cli_run_deterministic(tmp_path, capsys):
    assert _cli_run(tmp_path / "a") == 0
    assert _cli_run(tmp_path / "b", "--jobs", "2") == 0
    for name in ("ssl-example1_trials.csv", "ssl-example1_summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert "ssl-example1_summary.csv" in capsys.readouterr().out


def test_cli_run_env_output(tmp_path, monkeypatch):
    monkeypatch.setenv(experiments.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", "--trials", "1", "--scenario", "ssl-example1"]) == 0
    assert (tmp_path / "env" / "ssl-example1_trials.csv").exists()


def test_cli_usage_errors(tmp_path, capsys):
    assert cli.main([]) == 2
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert cli.main(["run", "--config", str(empty)]) == 2
    assert cli.main(["verify", "--config", str(empty)]) == 2
    assert "empty" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "missing.yaml")]) == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["run", "--trials", "0"])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        cli.main(["verify", "--only", "42"])


def test_cli_verify_subset_and_fault(capsys):
    assert cli.main(["verify", "--only", "1,2"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 2
    assert cli.main(["verify", "--only", "1,2", "--inject", "corrupt-frame"]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] 1." in out and "[FAIL] 2." in out


def test_cli_verify_config_file(tmp_path, capsys):
    p = tmp_path / "v.yaml"
    p.write_text("only: [5]\n")
    assert cli.main(["verify", "--config", str(p)]) == 0
    assert capsys.readouterr().out.startswith("[PASS] 5.")


def test_cli_solve_scene(tmp_path, capsys):
    rng = np.random.default_rng(2)
    anchors, sources = rng.uniform(-1, 1, (6, 2)), rng.uniform(-1, 1, (8, 2))
    E, F, _ = synth.observe_msl(anchors, sources, 0.5, 0.0, seed=1)
    synth.write_scene(tmp_path / "scene", anchors, E, F, sources)
    assert cli.main(["solve-scene", str(tmp_path / "scene"), "--out", str(tmp_path / "y.csv")]) == 0
    assert "rmsd=" in capsys.readouterr().out
    np.testing.assert_allclose(synth.load_points_csv(tmp_path / "y.csv"), sources, atol=1e-8)
