import csv

import numpy as np
import pytest

from memodiff.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, RunManifest, main
from memodiff.config import DEFAULT_CONFIG
from memodiff.errors import ConfigurationError

SMALL = DEFAULT_CONFIG.replace("n_modes = 32", "n_modes = 6").replace("n_quad = 128", "n_quad = 24")


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL.replace("s_step = 0.01", "s_step = 0.05").replace("dt = 0.01", "dt = 0.05"))
    return p


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_zero_data_unforced(tmp_path):
    cfg = tmp_path / "zero.ini"
    cfg.write_text(SMALL.replace("modes = 1:1.0\n", "modes =\n", 1).replace("modes = 1:1.0, 2:-0.5, 3:0.25", "modes ="))
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--t-end", "2"]) == EXIT_OK
    rows = _rows(out / "trajectory.csv")
    assert rows[0][:8] == ["t", "u_l2", "u_h1", "u_h2", "eta_mu1", "eta_mu2", "mt0", "mt1"]
    assert all(float(x) == 0.0 for r in rows[1:] for x in r[1:8])


def test_run_writes_history(small_cfg, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(small_cfg), "--out", str(out), "--t-end", "1", "--history"]) == EXIT_OK
    assert _rows(out / "history.csv")[0] == ["s", "mode", "coefficient"]
    assert len(_rows(out / "trajectory.csv")) == 12


def test_verify_small_passes_and_is_deterministic(tmp_path):
    # the pairing and reformulation tolerances need the default s-step
    cfg = tmp_path / "verify.ini"
    cfg.write_text(SMALL.replace("ensemble = 8", "ensemble = 4"))
    outs = []
    for k in range(2):
        out = tmp_path / f"v{k}"
        assert main(["verify", "--config", str(cfg), "--out", str(out), "--t-end", "10"]) == EXIT_OK
        outs.append(out)
    for name in ("reports.csv", "summary.txt"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    assert (outs[0] / "summary.txt").read_text().splitlines()[-1].startswith("PASS overall")


def test_verify_fails_on_impossible_tolerance(small_cfg, tmp_path):
    out = tmp_path / "v"
    code = main(["verify", "--config", str(small_cfg), "--out", str(out), "--t-end", "5", "--tol", "pairing_r1=-1"])
    assert code == EXIT_FAIL
    assert "FAIL pairing_r1" in (out / "summary.txt").read_text()


def test_pullback_unforced(tmp_path):
    cfg = tmp_path / "pb.ini"
    text = SMALL.replace("modes = 1:1.0\n", "modes =\n", 1).replace("l = 1.0", "l = 0.0")
    text = text.replace("s_step = 0.01", "s_step = 0.05").replace("dt = 0.01", "dt = 0.05").replace("ensemble = 8", "ensemble = 3")
    cfg.write_text(text)
    out = tmp_path / "out"
    assert main(["pullback", "--config", str(cfg), "--out", str(out), "--t-end", "0"]) == EXIT_OK
    rows = _rows(out / "pullback.csv")
    assert rows[0] == ["k", "tau", "delta"] and len(rows) == 6
    assert float(rows[-1][2]) <= 1e-4


def test_sweep(small_cfg, tmp_path):
    out = tmp_path / "out"
    code = main(["sweep", "--config", str(small_cfg), "--out", str(out), "--t-end", "5",
                 "--param", "epsilon.eps0", "--values", "0.5,1,2", "--workers", "2"])
    assert code == EXIT_OK
    rows = _rows(out / "sweep.csv")
    assert len(rows) == 4
    np.testing.assert_allclose([float(r[2]) for r in rows[1:]], [0.5, 0.4, 0.2])


def test_invalid_config_exit_code(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[kernel]\ndelta = 2.0\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_parse_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[domain]\nn_modes = x\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


def test_manifest_validation():
    with pytest.raises(ConfigurationError):
        RunManifest("plot", None, "x")


def test_print_config(capsys):
    assert main(["--print-config"]) == EXIT_OK
    assert capsys.readouterr().out == DEFAULT_CONFIG
