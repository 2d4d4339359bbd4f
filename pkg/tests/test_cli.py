import json
import os

import numpy as np
import pytest

from surfids.cli import main
from surfids.counting import EmpiricalCurve

MODEL = """
[model]
b = [1.0]
shift = "lattice"

[model.parallel]
kind = "levels"
levels = [-1.0, 0.6]
essential_floor = 1.0
count = 2

[model.profile]
kind = "gaussian"
rate = 2.0
amplitude = 0.1
"""

NUMERICS = """
[numerics]
L = [3.0]
h = 0.25
energies = {{ start = -1.2, stop = 0.9, num = 8 }}
n_realizations = 3
seed = 17
{extra}
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def tree(root):
    out = {}
    for d, _, files in os.walk(root):
        for f in files:
            p = os.path.join(d, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = fh.read()
    return out


def test_selftest_passes(tmp_path, capsys):
    assert main(["selftest", "--out", str(tmp_path)]) == 0
    report = (tmp_path / "selftest" / "report.txt").read_text()
    assert "FAIL" not in report and report == capsys.readouterr().out


def test_idss_run_is_byte_identical(tmp_path):
    cfg = write(tmp_path, MODEL + NUMERICS.format(extra=""))
    assert main(["idss", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["idss", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert a == b and any(k.endswith(".csv") for k in a)
    (digest,) = os.listdir(tmp_path / "a")
    curve = EmpiricalCurve.read_csv(str(tmp_path / "a" / digest / "curves" / "idss_L3p0.csv"))
    assert curve.n_real == 3 and curve.seed0 == 17


def test_seed_flag_changes_digest(tmp_path):
    cfg = write(tmp_path, MODEL + NUMERICS.format(extra=""))
    main(["idss", "--config", cfg, "--out", str(tmp_path / "o")])
    main(["idss", "--config", cfg, "--out", str(tmp_path / "o"), "--seed", "18"])
    assert len(os.listdir(tmp_path / "o")) == 2


def test_delta_outside_interval_exits_2(tmp_path, capsys):
    study = """
[study]
checks = ["ground"]
lambda_star = 0.5
lambdas = { start = 0.05, stop = 0.5, num = 5 }
delta = 0.01
"""
    cfg = write(tmp_path, MODEL + NUMERICS.format(extra="") + study)
    assert main(["sandwich", "--config", cfg, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "admissible delta: (" in err and "1.0)" in err


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, MODEL + NUMERICS.format(extra="n_realisations = 3"))
    assert main(["idss", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "numerics.n_realisations: unknown key" in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path):
    assert main(["idss", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path)]) == 2


def test_energy_at_floor_exits_2(tmp_path):
    text = MODEL + NUMERICS.format(extra="").replace("stop = 0.9", "stop = 1.0")
    assert main(["idss", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == 2


def test_budget_exits_3(tmp_path):
    cfg = write(tmp_path, MODEL + NUMERICS.format(extra="max_dim = 10"))
    assert main(["idss", "--config", cfg, "--out", str(tmp_path)]) == 3


def _run_dir(out):
    (digest,) = os.listdir(out)
    return out / digest


def test_json_format(tmp_path):
    cfg = write(tmp_path, MODEL + NUMERICS.format(extra=""))
    out = tmp_path / "o"
    assert main(["free-ids", "--config", cfg, "--out", str(out), "--format", "json"]) == 0
    rows = json.loads((_run_dir(out) / "curves" / "free_ids.json").read_text())
    assert len(rows) == 8 and set(rows[0]) == {"E", "N0", "N0_conv_rho"}
    assert "format = json" in (_run_dir(out) / "manifest.txt").read_text()


def test_transverse_gap(tmp_path):
    text = MODEL + NUMERICS.format(extra="").replace("L = [3.0]", "L = [3.0, 4.0]")
    out = tmp_path / "o"
    assert main(["transverse-gap", "--config", write(tmp_path, text), "--out", str(out)]) == 0
    lines = (_run_dir(out) / "curves" / "transverse_gap.csv").read_text().splitlines()
    assert lines[0] == "L,Z,lnZ_over_L2" and len(lines) == 3
    Z = [float(l.split(",")[1]) for l in lines[1:]]
    assert Z[0] > Z[1] > 0


def test_sandwich_checks(tmp_path):
    study = """
[study]
checks = ["finite", "ground", "plateau"]
j = 2
lambda_star = 0.5
lambdas = { start = 0.05, stop = 0.5, num = 5 }
plateau_tol = 1.0
"""
    cfg = write(tmp_path, MODEL + NUMERICS.format(extra="") + study)
    out = tmp_path / "o"
    code = main(["sandwich", "--config", cfg, "--out", str(out)])
    reports = _run_dir(out) / "reports"
    names = set(os.listdir(reports))
    assert {"finite_L3p0.csv", "ground_L3p0.csv", "projection_L3p0.csv", "plateau_L3p0.txt"} <= names
    assert code == 0
    assert "PASS" in (reports / "ground_L3p0.txt").read_text()


def test_study_failure_exits_1(tmp_path, capsys):
    study = """
[study]
checks = ["plateau"]
j = 2
plateau_tol = 0.01
"""
    cfg = write(tmp_path, MODEL + NUMERICS.format(extra="") + study)
    assert main(["sandwich", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "study failed" in capsys.readouterr().err


def test_lifshits_fit_synthetic(tmp_path):
    fit = """
[study]
lambdas = { start = 0.05, stop = 0.5, num = 40 }

[fit]
synthetic = "power"
exponent = -2.0
"""
    cfg = write(tmp_path, MODEL + NUMERICS.format(extra="") + fit)
    out = tmp_path / "o"
    assert main(["lifshits-fit", "--config", cfg, "--out", str(out)]) == 0
    row = (_run_dir(out) / "fits" / "lifshits_slope.csv").read_text().splitlines()[1]
    assert float(row.split(",")[0]) == pytest.approx(-2.0, abs=1e-6)


def test_lifshits_fit_from_curve(tmp_path):
    lam = np.linspace(0.05, 0.5, 30)
    EmpiricalCurve(lam, np.exp(-lam ** -1.0), np.zeros(30), 1, 1.0, 0.1, 0).write_csv(tmp_path / "c.csv")
    out = tmp_path / "o"
    assert main(["lifshits-fit", "--curve", str(tmp_path / "c.csv"), "--out", str(out)]) == 0
    text = (_run_dir(out) / "fits" / "lifshits.txt").read_text()
    assert "not expected to match" in text
    row = (_run_dir(out) / "fits" / "lifshits_slope.csv").read_text().splitlines()[1]
    assert float(row.split(",")[0]) == pytest.approx(-1.0, abs=1e-6)


def test_reduced_ids_writes_three_scales(tmp_path):
    study = """
[study]
j = 1
lambda_star = 0.5
lambdas = { start = 0.05, stop = 0.5, num = 5 }
"""
    cfg = write(tmp_path, MODEL + NUMERICS.format(extra="") + study)
    out = tmp_path / "o"
    assert main(["reduced-ids", "--config", cfg, "--out", str(out)]) == 0
    curves = sorted(f for f in os.listdir(_run_dir(out) / "curves") if f.endswith(".csv"))
    assert len(curves) == 2 and all(f.startswith("reduced_j1_") for f in curves)
