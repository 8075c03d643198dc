import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from choquard.cli import EXIT_GATE, EXIT_INADMISSIBLE, EXIT_NONCONVERGED, EXIT_OK, main
from choquard.harness import load_sweep_config, write_manifest, write_records
from choquard.radial import RadialField
from test_harness import _synthetic

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
N5 = str(CONFIGS / "n5_default.yaml")
BAD = str(CONFIGS / "inadmissible.yaml")


def test_predict(capsys):
    assert main(["predict", "--config", N5]) == EXIT_OK
    assert "sigma = 0.1764705882" in capsys.readouterr().out
    assert main(["predict", "--config", N5, "--json"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    gap = next(r for r in out["rates"] if r["observable"] == "gap")
    assert gap["eps_exponent"] == pytest.approx(-0.6 / 3.4, rel=1e-12)


def test_verify(capsys):
    assert main(["verify", "--draws", "100", "--seed", "0"]) == EXIT_OK
    assert "100/100" in capsys.readouterr().out


@pytest.mark.parametrize("cmd", [["predict"], ["solve", "--eps", "100"], ["sweep", "--out", "unused"]])
def test_inadmissible_exit_code(cmd, tmp_path, capsys):
    cmd = [c if c != "unused" else str(tmp_path / "run") for c in cmd]
    assert main([cmd[0], "--config", BAD, *cmd[1:]]) == EXIT_INADMISSIBLE
    assert "inadmissible" in capsys.readouterr().err


def test_solve_and_dump(tmp_path, capsys):
    prof = tmp_path / "w.csv"
    assert main(["solve", "--config", N5, "--eps", "100", "--json", "--dump-profile", str(prof)]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["converged"] and abs(out["nehari_res"]) < 1e-6 and out["gap"] > 0
    f = RadialField.from_csv(prof)
    assert f.grid.N == 5 and f.values[0] > 0 and np.all(np.diff(f.values) <= 0)


def _failing_config(tmp_path):
    raw = yaml.safe_load(Path(N5).read_text())
    raw["solver"] = {"max_iters": 100, "descent_iters": 100, "newton": False}
    path = tmp_path / "slow.yaml"
    path.write_text(yaml.safe_dump(raw))
    return str(path)


def test_nonconvergence_exit_code(tmp_path, capsys):
    cfg = _failing_config(tmp_path)
    assert main(["solve", "--config", cfg, "--eps", "100"]) == EXIT_NONCONVERGED
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "run"), "--quiet"]) == EXIT_NONCONVERGED
    assert (tmp_path / "run" / "sweep.csv").exists()


def _run_dir(tmp_path, recs, config_path=N5):
    run = tmp_path / "run"
    run.mkdir()
    write_records(run / "sweep.csv", recs)
    write_manifest(run / "manifest.json", load_sweep_config(config_path))
    return str(run)


def test_fit_gate_pass(tmp_path, capsys):
    recs, _ = _synthetic(5)
    run = _run_dir(tmp_path, recs)
    assert main(["fit", "--config", N5, "--run", run, "--gate"]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out
    assert main(["fit", "--config", N5, "--run", run, "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["passed"]


def test_fit_gate_fail(tmp_path):
    recs, _ = _synthetic(5)
    # a gap that decays twice as fast as predicted
    bad = [type(r)(**{**r.__dict__, "gap": r.gap**2}) for r in recs]
    run = _run_dir(tmp_path, bad)
    assert main(["fit", "--config", N5, "--run", run]) == EXIT_OK
    assert main(["fit", "--config", N5, "--run", run, "--gate"]) == EXIT_GATE


def test_fit_hash_mismatch(tmp_path, capsys):
    recs, _ = _synthetic(5)
    run = _run_dir(tmp_path, recs)
    other = tmp_path / "other.yaml"
    raw = yaml.safe_load(Path(N5).read_text())
    raw["sweep"]["points"] = 10
    other.write_text(yaml.safe_dump(raw))
    assert main(["fit", "--config", str(other), "--run", run]) == 1
    assert "hash mismatch" in capsys.readouterr().err


def test_constants(capsys):
    assert main(["constants", "--N", "5", "--alpha", "1", "--M", "512", "--json"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert "normalization" in out


def test_reference(tmp_path):
    path = tmp_path / "ref.csv"
    assert main(["reference", "--N", "4", "--alpha", "1", "--M", "256", "--out", str(path)]) == EXIT_OK
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (257, 3) and np.all(np.diff(data[:, 1]) < 0)


def test_expand(capsys):
    args = ["expand", "--N", "5", "--alpha", "1", "--M", "512", "--core", "0.001",
            "--which", "u_kappa", "--scales", "0.01,0.03,0.1,0.3", "--json"]
    assert main(args) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert len(out["rows"]) == 4 and "grad_defect" in out["fits"]


def test_usage_errors():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
