import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from swingsim.cli import main
from swingsim.runner import read_csv

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def cli():
    return CliRunner()


def test_run_writes_outputs(cli, tmp_path):
    res = cli.invoke(main, ["run", str(SCENARIOS / "pi_load_step.json"), "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    assert {p.name for p in tmp_path.iterdir()} == {"trajectory.csv", "report.txt", "report.json"}
    report = json.loads((tmp_path / "report.json").read_text())
    assert all(report["checks"].values())


def test_csv_well_formed(cli, tmp_path):
    cli.invoke(main, ["run", str(SCENARIOS / "dual_pi.json"), "--out", str(tmp_path)])
    header, data = read_csv(tmp_path / "trajectory.csv")
    assert header[:3] == ["t", "omega", "chi"] and header[-2:] == ["W", "Wdot_residual"]
    assert data.shape[1] == len(header)
    assert np.all(np.diff(data[:, 0]) > 0)
    # every field carries enough digits to round-trip a double
    line = (tmp_path / "trajectory.csv").read_text().splitlines()[100]
    for field in line.split(","):
        assert float(repr(float(field))) == float(field)
    P_e, P_I, P_L = data[:, header.index("P_e")], data[:, [header.index("P_I_1"), header.index("P_I_2")]], \
        data[:, header.index("P_L_1")]
    assert np.abs(P_e + P_I.sum(axis=1) - P_L).max() < 1e-12


def test_invalid_config_exit_2_and_no_output(cli, tmp_path):
    doc = json.loads((SCENARIOS / "pi_load_step.json").read_text())
    doc["controller"]["xi"] = [0.9, 0.0]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    out = tmp_path / "out"
    res = cli.invoke(main, ["run", str(bad), "--out", str(out)])
    assert res.exit_code == 2
    assert "controller.xi" in res.output
    assert not out.exists()


def test_unparseable_config_exit_2(cli, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    res = cli.invoke(main, ["run", str(bad), "--out", str(tmp_path / "o")])
    assert res.exit_code == 2 and "line 1" in res.output


def test_divergence_exit_4(cli, tmp_path):
    doc = json.loads((SCENARIOS / "pi_load_step.json").read_text())
    doc["integrator"]["initial_state"] = {"omega": 5e6}
    p = tmp_path / "div.json"
    p.write_text(json.dumps(doc))
    assert cli.invoke(main, ["run", str(p), "--out", str(tmp_path / "o")]).exit_code == 4


def test_builtin_experiment_passes(cli, tmp_path):
    res = cli.invoke(main, ["reproduce-paper", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    assert res.output.count("[PASS]") >= 3 and "[FAIL]" not in res.output
    assert (tmp_path / "trajectory.csv").exists()


def test_builtin_experiment_without_integral_fails(cli):
    res = cli.invoke(main, ["reproduce-paper", "--beta", "0"])
    assert res.exit_code == 3
    assert "[FAIL] frequency restored" in res.output


def test_builtin_experiment_xi_override(cli):
    res = cli.invoke(main, ["reproduce-paper", "--xi", "0.5,0.5"])
    assert "ratio 1" in res.output


def test_optimal_xi(cli):
    res = cli.invoke(main, ["optimal-xi", "--costs", "1,2"])
    assert res.exit_code == 0
    assert [float(x) for x in res.output.split()] == [2 / 3, 1 / 3]
    assert cli.invoke(main, ["optimal-xi", "--costs", "1,-2"]).exit_code == 2


def test_batch(cli, tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    for name in ("pi_load_step.json", "proportional_offset.json"):
        shutil.copy(SCENARIOS / name, src / name)
    (src / "broken.json").write_text("[]")
    res = cli.invoke(main, ["batch", str(src), "--out", str(tmp_path / "out"), "-j", "2"])
    assert res.exit_code == 2
    assert (tmp_path / "out" / "pi_load_step" / "trajectory.csv").exists()
    assert not (tmp_path / "out" / "broken").exists()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "swingsim", "optimal-xi", "--costs", "2,2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.split() == ["0.5", "0.5"]
