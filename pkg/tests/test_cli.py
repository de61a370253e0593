import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from costa_epi.cli import main, parse_gammas
from costa_epi.epi import costa_check
from costa_epi.io import instance_to_dict, load_instance, load_schema, save_instance
from costa_epi.epi import EpiInstance, counterexample_instance

REPORT_SCHEMA = load_schema("report")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    report = json.loads(out)
    jsonschema.validate(report, REPORT_SCHEMA)
    return code, report


@pytest.fixture
def ce_file(tmp_path):
    path = tmp_path / "counterexample.json"
    save_instance(path, counterexample_instance())
    return path


@pytest.fixture
def diagonal_file(tmp_path):
    path = tmp_path / "diag.json"
    save_instance(path, EpiInstance(np.diag([3.0, 1.0]), np.diag([2.0, 5.0]), np.diag([0.3, 0.6])))
    return path


def write_json(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


class TestReproduce:
    def test_table_and_exit(self, capsys):
        code, out, _ = run(capsys, "reproduce")
        assert code == 0
        assert "19.53" in out and "40.27" in out

    def test_json(self, capsys):
        code, rep = run_json(capsys, "reproduce")
        assert code == 0
        res = rep["result"]
        assert res["all_match"] and all(res["checks"].values())
        assert 19.52 <= res["lhs_over_2pie"] <= 19.54
        assert 40.27 <= res["rhs_over_2pie"] <= 40.29
        assert res["commutes"] is False

    def test_digest_reproducible(self, capsys):
        _, a = run_json(capsys, "reproduce")
        _, b = run_json(capsys, "reproduce")
        assert a["input_digest"] == b["input_digest"]
        assert a["result"] == b["result"]


class TestCheck:
    def test_counterexample_violated(self, capsys, ce_file):
        code, rep = run_json(capsys, "check", ce_file)
        assert code == 3
        assert rep["result"]["report"]["violated"] is True
        assert rep["result"]["theorem1_applies"] is False

    def test_diagonal_holds(self, capsys, diagonal_file):
        code, rep = run_json(capsys, "check", diagonal_file)
        assert code == 0
        assert rep["result"]["theorem1_applies"] is True
        assert "guaranteed" in rep["result"]["note"]

    def test_csv(self, capsys, diagonal_file):
        code, out, _ = run(capsys, "check", diagonal_file, "--csv")
        assert code == 0
        assert out.splitlines()[0] == "field,value"
        assert any(line.startswith("violated,False") for line in out.splitlines())

    def test_asymmetric_rejected(self, capsys, tmp_path):
        data = instance_to_dict(counterexample_instance())
        data["sigma_x"][0][1] += 0.5
        code, _, err = run(capsys, "check", write_json(tmp_path, "bad.json", data))
        assert code == 2
        assert "sigma_x" in err and "symmetric" in err

    def test_malformed(self, capsys, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"n": 2,\n "sigma_x": [[1, 0], [0, 1]]\n "sigma_z": 1}')
        code, _, err = run(capsys, "check", path)
        assert code == 2
        assert "line 3" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "check", tmp_path / "absent.json")
        assert code == 2

    def test_bad_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["check"])
        assert exc.value.code == 2
        capsys.readouterr()

    def test_tol_env_and_flag(self, capsys, ce_file, monkeypatch):
        monkeypatch.setenv("COSTA_EPI_TOL", "1e-6")
        _, rep = run_json(capsys, "check", ce_file)
        assert rep["result"]["tol"] == 1e-6
        _, rep = run_json(capsys, "check", ce_file, "--tol", "1e-8")
        assert rep["result"]["tol"] == 1e-8


class TestGammaPath:
    def test_parse(self):
        assert parse_gammas("0:0.95:0.05")[-1] == 0.95
        assert len(parse_gammas("0:0.95:0.05")) == 20
        assert parse_gammas("0.1, 0.5") == [0.1, 0.5]
        with pytest.raises(ValueError):
            parse_gammas("0:1")

    def test_counterexample_half(self, capsys, ce_file):
        code, rep = run_json(capsys, "gamma-path", ce_file, "--gammas", "0,0.5")
        assert code == 0
        first, half = rep["result"]["rows"]
        assert first["k_matrix"] == [[0.0, 0.0], [0.0, 0.0]]
        assert half["amgm_holds"] is False
        np.testing.assert_allclose(sorted(half["eigenvalues"]), [-0.7273, -0.0053], atol=5e-4)

    def test_commuting_grid(self, capsys, diagonal_file):
        code, rep = run_json(capsys, "gamma-path", diagonal_file)
        assert code == 0
        assert all(r["amgm_holds"] for r in rep["result"]["rows"])

    @pytest.mark.parametrize("gammas", ["1.0", "0.5,1.2", "-0.1"])
    def test_domain(self, capsys, ce_file, gammas):
        code, _, err = run(capsys, "gamma-path", ce_file, "--gammas", gammas)
        assert code == 2
        assert "[0, 1)" in err

    def test_table(self, capsys, ce_file):
        code, out, _ = run(capsys, "gamma-path", ce_file, "--gammas", "0.5")
        assert code == 0
        assert "-0.727257" in out


class TestSearch:
    def test_found_round_trip(self, capsys, tmp_path):
        out = tmp_path / "found.json"
        code, rep = run_json(capsys, "search", "--n", 2, "--restarts", 4, "--iters", 400, "--seed", 7, "--out", out)
        assert code == 0
        assert rep["seed"] == 7
        gap = rep["result"]["trace"]["best_gap"]
        code, chk = run_json(capsys, "check", out)
        assert code == 3
        assert chk["result"]["report"]["gap"] == pytest.approx(gap, rel=1e-9)
        assert costa_check(load_instance(out)).gap < -1e-6 * costa_check(load_instance(out)).scale

    def test_scalar_not_found(self, capsys, tmp_path):
        out = tmp_path / "none.json"
        code, _ = run_json(capsys, "search", "--n", 1, "--restarts", 2, "--iters", 200, "--out", out)
        assert code == 1
        assert not out.exists()

    def test_commuting_only_not_found(self, capsys):
        code, _ = run_json(capsys, "search", "--n", 2, "--restarts", 2, "--iters", 300, "--commuting-only")
        assert code == 1

    @pytest.mark.parametrize("argv", [["--n", "0"], ["--restarts", "0"], ["--eig-lo", "5", "--eig-hi", "1"]])
    def test_invalid_config(self, capsys, argv):
        code, _, err = run(capsys, "search", *argv)
        assert code == 2
        assert "invalid search configuration" in err


class TestMc:
    @pytest.fixture
    def files(self, tmp_path):
        mixture = {"components": [{"weight": 1.0, "mean": [0, 0], "cov": [[200, 100], [100, 51]]}]}
        return (
            write_json(tmp_path, "x.json", mixture),
            write_json(tmp_path, "sz.json", [[200, 0], [0, 1]]),
            write_json(tmp_path, "a.json", {"matrix": [[0.25, 0], [0, 0.81]]}),
            write_json(tmp_path, "a_bad.json", [[0.3125, 0.3375], [0.3375, 0.785]]),
        )

    def test_consistent(self, capsys, files):
        x, sz, a, _ = files
        code, rep = run_json(capsys, "mc", "--mixture", x, "--sigma-z", sz, "--a", a, "--m", 20000, "--seed", 3)
        assert code == 0
        assert rep["seed"] == 3
        assert rep["result"]["report"]["conclusion"] in ("consistent", "inconclusive")

    def test_non_commuting(self, capsys, files):
        x, sz, _, a_bad = files
        code, _, err = run(capsys, "mc", "--mixture", x, "--sigma-z", sz, "--a", a_bad, "--m", 100)
        assert code == 2
        assert "costa_check" in err

    def test_suspicious_exit_code(self, capsys, files, monkeypatch):
        import costa_epi.cli as cli
        from costa_epi.mc_entropy import McReport

        fake = McReport(1.0, 2.0, 0.01, 0.01, {}, 10, 5, 0, "suspicious")
        monkeypatch.setattr(cli, "mc_theorem1_check", lambda *a, **k: fake)
        x, sz, a, _ = files
        code, _, _ = run(capsys, "mc", "--mixture", x, "--sigma-z", sz, "--a", a)
        assert code == 4


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "costa_epi", "reproduce"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "19.53" in proc.stdout
