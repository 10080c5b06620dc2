import json
import subprocess
import sys

import numpy as np
import pytest

from patspec.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_TOLERANCE, main

SMALL = """
[domain]
length = pi
cells = 120

[speed]
speed = "{speed}"

[bc]
alpha = {alpha}

[basis]
num_modes = 6

[phantom]
robin = "{robin}"
dirichlet = "2:1.0, 4:-0.3"

[output]
dir = {out}
"""

A1 = """
[domain]
length = pi
cells = 400

[speed]
speed = "sine:amp=0.5,base=1.0"

[bc]
alpha = 1.0

[basis]
num_modes = 10

[phantom]
robin = "1:1.0, 3:0.5"
dirichlet = "2:1.0, 4:-0.3"

[output]
dir = {out}
"""


def write_cfg(tmp_path, template=SMALL, **kw):
    fields = {"speed": "sine:amp=0.5,base=1.0", "alpha": 1.0, "robin": "1:1.0, 3:0.5", "out": tmp_path / "out"}
    fields.update(kw)
    path = tmp_path / "run.ini"
    path.write_text(template.format(**fields))
    return path


def test_eigen_prints_tables(tmp_path, capsys):
    cfg = write_cfg(tmp_path, speed="constant:1.0", out=tmp_path / "new" / "dir")
    assert main(["eigen", "--config", str(cfg)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Dirichlet eigenvalues" in out
    rows = [line.split() for line in out.splitlines() if line.strip()[:1].isdigit()]
    dirichlet = rows[6:11]
    for k, row in enumerate(dirichlet, start=1):
        assert float(row[1]) == pytest.approx(k, rel=1e-3)
    meta = json.loads((tmp_path / "new" / "dir" / "dirichlet.json").read_text())
    assert meta["bc"] == "dirichlet" and len(meta["lambdas"]) == 6
    assert (tmp_path / "new" / "dir" / "robin_modes.csv").exists()


def test_alpha_rejected_before_compute(tmp_path, capsys):
    cfg = write_cfg(tmp_path, alpha=0.0)
    assert main(["eigen", "--config", str(cfg)]) == EXIT_CONFIG
    assert "alpha" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_missing_config(tmp_path):
    assert main(["eigen", "--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG


def test_out_flag_overrides(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["eigen", "--config", str(cfg), "--out", str(tmp_path / "elsewhere")]) == EXIT_OK
    assert (tmp_path / "elsewhere" / "robin.json").exists()


def test_roundtrip_small_theorem5(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    code = main(["roundtrip", "--config", str(cfg), "--theorem", "5"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert out.strip().splitlines()[-1].startswith("rel_l2_error=")
    for name in ("dirichlet_normal_deriv.csv", "theorem5_report.json", "theorem5_reconstruction.csv"):
        assert (tmp_path / "out" / name).exists()
    header = (tmp_path / "out" / "theorem5_reconstruction.csv").read_text().splitlines()[0]
    assert header == "node,x,f_true,f_rec"


def test_threshold_zero(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    code = main(["roundtrip", "--config", str(cfg), "--theorem", "5", "--max-error", "0"])
    captured = capsys.readouterr()
    assert code == EXIT_TOLERANCE
    assert "rel_l2_error=" in captured.out
    assert "exceeds" in captured.err


def test_phantom_beyond_basis_fails_at_forward(tmp_path, capsys):
    cfg = write_cfg(tmp_path, robin="1:1.0, 8:0.5")
    code = main(["roundtrip", "--config", str(cfg), "--theorem", "4"])
    assert code == EXIT_NUMERICAL
    assert "stage=forward" in capsys.readouterr().err


def test_bad_data_flag(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["invert", "--config", str(cfg), "--data", "7=x.csv"]) == EXIT_CONFIG


def test_forward_then_invert(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["forward", "--config", str(cfg)]) == EXIT_OK
    assert main(["invert", "--config", str(cfg)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "theorem4 rel_l2_error=" in out and "theorem5 rel_l2_error=" in out
    rep = json.loads((tmp_path / "out" / "theorem5_report.json").read_text())
    assert rep["target_bc"] == "robin"
    assert max(m["rel_err"] for m in rep["modes"]) <= 5e-2


def test_invert_missing_data_is_stage_failure(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["invert", "--config", str(cfg), "--data", f"5={tmp_path / 'none.csv'}"]) == EXIT_NUMERICAL
    assert "stage=read" in capsys.readouterr().err


def test_reports_are_byte_identical(tmp_path):
    texts = []
    for run in ("a", "b"):
        cfg = write_cfg(tmp_path, out=tmp_path / run)
        assert main(["roundtrip", "--config", str(cfg), "--theorem", "5"]) == EXIT_OK
        texts.append((tmp_path / run / "theorem5_report.json").read_bytes())
    assert texts[0] == texts[1]


def test_console_entry_point(tmp_path):
    cfg = write_cfg(tmp_path)
    proc = subprocess.run(
        [sys.executable, "-m", "patspec", "eigen", "--config", str(cfg)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "Robin(alpha=1) eigenvalues" in proc.stdout


def test_a1_roundtrip_exit_zero(tmp_path, capsys):
    cfg = write_cfg(tmp_path, template=A1)
    code = main(["roundtrip", "--config", str(cfg)])
    out = capsys.readouterr().out
    err = float(out.strip().splitlines()[-1].split("=")[1])
    assert err <= 5e-2
    assert code == EXIT_OK
    recon = np.loadtxt(tmp_path / "out" / "theorem4_reconstruction.csv", delimiter=",", skiprows=1)
    assert recon.shape == (401, 4)
