import csv
import json
import subprocess
import sys

import pytest

from phclab import cli


def run(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr()


def test_vertex_writes_csv(tmp_path, capsys):
    code, cap = run(["vertex", "--N", "1", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    with open(tmp_path / "vertex_N1.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["theta", "f", "g"]
    assert float(rows[1][1]) == pytest.approx(1.0)
    assert "zeros 3" in cap.out


def test_json_report(tmp_path, capsys):
    code, cap = run(["vertex", "--N", "0", "--json", "--out-dir", str(tmp_path)], capsys)
    rep = json.loads(cap.out)
    assert code == 0 and rep["ok"] and rep["values"]["N"] == 0
    assert set(rep["checks"]) == {"equation", "boundary", "collocation"}


def test_negative_order_is_usage_error(capsys):
    assert run(["vertex", "--N", "-1"], capsys)[0] == 2


def test_unknown_family_is_usage_error(capsys):
    assert run(["verify", "--family", "e99"], capsys)[0] == 2


def test_bad_param_is_usage_error(capsys):
    assert run(["verify", "--family", "e13", "--param", "nu"], capsys)[0] == 2


def test_period_at_c(capsys):
    code, cap = run(["period", "--c", "0.3", "--json"], capsys)
    rep = json.loads(cap.out)
    assert code == 0
    assert rep["values"]["T_quad"] == pytest.approx(rep["values"]["T_ode"], abs=1e-6)


def test_period_rational(capsys):
    code, cap = run(["period", "--rational", "6", "7", "--json"], capsys)
    assert code == 0
    assert json.loads(cap.out)["values"]["err"] < 1e-6


def test_period_needs_a_mode(capsys):
    assert run(["period"], capsys)[0] == 2


def test_verify_cone(capsys):
    code, cap = run(["verify", "--family", "e15", "--param", "a=6", "--param", "b=7"], capsys)
    assert code == 0
    assert "check holomorphy: ok" in cap.out


def test_surface_csv(tmp_path, capsys):
    code, _ = run(["surface", "--family", "e17", "--grid", "8", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    with open(tmp_path / "surface_e17.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["s1", "s2", "t", "x", "y", "z"]
    assert len(rows) == 65


def test_identities_with_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nn_points = 300\nidentity_tol = 1e-12\nseed=3\n")
    code, cap = run(["identities", "--config", str(cfg), "--json"], capsys)
    rep = json.loads(cap.out)
    assert code == 0 and len(rep["checks"]) == 6


def test_bad_config_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("nonsense = 1\n")
    assert run(["identities", "--config", str(cfg)], capsys)[0] == 2


def test_failed_contract_exits_one(tmp_path, capsys):
    cfg = tmp_path / "strict.cfg"
    cfg.write_text("identity_tol = 1e-30\nn_points = 50\n")
    code, cap = run(["identities", "--config", str(cfg)], capsys)
    assert code == 1
    assert json.loads(cap.out)["ok"] is False


def test_fold_reported_as_failure(tmp_path, capsys):
    code, cap = run(["graph", "--family", "e16b", "--n", "16", "--out-dir", str(tmp_path)], capsys)
    assert code == 1
    assert json.loads(cap.out)["checks"]["run"]["error"] == "FoldDetected"


def test_graph_e17(tmp_path, capsys):
    code, cap = run(["graph", "--family", "e17", "--n", "64", "--json", "--out-dir", str(tmp_path)],
                    capsys)
    rep = json.loads(cap.out)
    assert code == 0
    assert rep["values"]["sheets"] == 2 and rep["values"]["taylor_selects"] == "first"
    assert (tmp_path / "graph_e17.csv").exists()


def test_limit_json_fields(capsys):
    code, cap = run(["limit", "--family", "e14", "--json"], capsys)
    rep = json.loads(cap.out)
    assert code == 0 and rep["values"]["tuple"] == [0, 1, 0, 0, 0]
    assert {"p", "q_plus", "q_minus", "n_plus", "n_minus", "s_used"} <= set(rep["values"]["limit"])


def test_energy_profile(tmp_path, capsys):
    code, _ = run(["energy", "--family", "e13", "--points", "3", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    with open(tmp_path / "energy_e13.csv") as fh:
        assert next(csv.reader(fh)) == ["s", "sigma", "sigma_s3", "mu", "mu_s3", "err"]


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "phclab.cli", "vertex", "--N", "0", "--json",
                          "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["ok"]
