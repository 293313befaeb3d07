from __future__ import annotations

import io
import json
import os

import pytest

from zetaforge import cli

from conftest import fixture_path


def call(*argv):
    buf = io.StringIO()
    code = cli.run(list(argv), stdout=buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 1
    summary = json.loads(lines[0])
    assert summary["exit_code"] == code
    return code, summary


def test_validate_funnel_tuple(tmp_path):
    code, out = call("validate", "--tuple", fixture_path("funnel.json"), "--out", str(tmp_path))
    assert code == 0
    checks = out["report"]["checks"]
    assert checks and all(c["status"] == "pass" for c in checks)
    assert json.loads((tmp_path / "validate.json").read_text())["ok"] is True


def test_validate_violated_tuple(tmp_path):
    code, out = call("validate", "--tuple", fixture_path("funnel_violated.json"),
                     "--out", str(tmp_path))
    assert code == 2 and out["status"] == "validation-failed"
    assert "5(i)" in out["error"]
    assert (tmp_path / "validate.json").exists()


def test_validate_builtin_cusped():
    code, _ = call("validate", "--group", "builtin:cusped")
    assert code == 0


def test_crosscheck_twist(tmp_path):
    code, out = call("crosscheck", "--group", fixture_path("schottky2.json"), "--rep",
                     fixture_path("twist2.json"), "--s", "3+0i", "--lmax", "12",
                     "--out", str(tmp_path))
    assert code == 0
    row = out["report"]["rows"][0]
    assert row["discrepancy"] <= row["tail"] + row["det_error"] + 1e-8
    assert (tmp_path / "crosscheck.csv").read_text().startswith("s_re,s_im,discrepancy")


def test_divergent_zeta():
    code, out = call("zeta", "--s", "0.2+0i")
    assert code == 3
    assert "increase ℓ_max or Re s" in out["error"]


def test_determinant_route_n_stability():
    code, out = call("zeta", "--route", "determinant", "--s", "2", "--degree", "4",
                     "--tol", "1e-12")
    assert code == 3 and "increase --degree" in out["error"]
    code, out = call("zeta", "--route", "determinant", "--s", "2", "--degree", "30")
    assert code == 0


def test_zeta_csv(tmp_path):
    code, _ = call("zeta", "--s", "3", "--s", "2.5-1i,4", "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "zeta.csv").read_text().splitlines()
    assert lines[0] == "s_re,s_im,route,value_re,value_im,tail,l_max,N"
    assert len(lines) == 4


def test_malformed_json():
    code, out = call("validate", "--tuple", fixture_path("malformed.json"))
    assert code == 1 and out["status"] == "malformed-input"
    assert out["line"] == 5 and "column" in out


def test_missing_field():
    code, out = call("validate", "--group", fixture_path("missing_field.json"))
    assert code == 1 and out["field"] == "intervals"


def test_missing_file():
    code, _ = call("validate", "--tuple", fixture_path("nope.json"))
    assert code == 1


@pytest.mark.parametrize("argv", [
    ("zeta", "--s", "3", "--degree", "0"),
    ("zeta", "--s", "3", "--rho", "1.5"),
    ("zeta", "--s", "3", "--lmax", "-2"),
    ("zeta", "--s", "bogus"),
    ("det", "--group", "builtin:funnel", "--s", "1", "--degree", "5", "--split", "9"),
    ("frobnicate",),
    (),
    ("resonances", "--group", "builtin:funnel", "--rect", "1,0,0,1"),
    ("rep-info", "--group", "builtin:schottky2", "--rep", fixture_path("jordan2.json")),
])
def test_bad_arguments_exit_one(argv):
    code, out = call(*argv)
    assert code == 1 and out["status"] == "malformed-input"


def test_expanding_cusp_rejected():
    code, out = call("det", "--group", "builtin:cusped", "--rep",
                     fixture_path("expanding_cusp.json"), "--s", "3")
    assert code == 2 and "NECM" in out["error"]


def test_det_reports_poles(tmp_path):
    code, out = call("det", "--group", "builtin:cusped", "--s", "0.5,-0.25,3", "--degree", "16",
                     "--out", str(tmp_path))
    assert code == 0
    (pole,) = json.loads((tmp_path / "poles.json").read_text())
    assert pole["s0"] == [0.5, 0.0]
    assert pole["order"] <= pole["rank_bound"]
    status = [line.split(",")[4] for line in (tmp_path / "det.csv").read_text().splitlines()[1:]]
    assert status == ["pole", "ok", "ok"]


def test_resonances_funnel(tmp_path):
    code, out = call("resonances", "--group", "builtin:funnel", "--rect", "-0.3,0.3,-1,1",
                     "--grid", "5,5", "--degree", "20", "--out", str(tmp_path))
    assert code == 0 and out["count"] == 2
    assert out["N"] == 20 and out["tol"] == 1e-8
    assert out["zeros"][0]["multiplicity"] == 2
    assert len((tmp_path / "scan.csv").read_text().splitlines()) == 26
    assert (tmp_path / "zeros.csv").exists()


def test_factor_check():
    code, out = call("factor-check", "--hom", "a=1,b=0", "--s", "3", "--lmax", "10")
    assert code == 0 and out["report"]["ok"]


def test_rep_info_jordan():
    code, out = call("rep-info", "--group", "builtin:cusped", "--rep", fixture_path("jordan2.json"),
                     "--mmax", "200")
    assert code == 0
    info = out["info"]
    assert info["d0"] == 2 and info["necm"]
    assert info["rank_bound_sum"] == 6
    assert abs(info["cusps"]["p"]["growth_slope"] - 1.0) < 0.05


def test_lerch_values():
    code, out = call("lerch", "--s", "2", "--lam", "1", "--w", "1")
    assert code == 0
    assert abs(out["result"]["value"][0] - 1.6449340668482264) < 1e-12
    code, out = call("lerch", "--s", "1", "--lam", "1", "--w", "0.5")
    assert code == 0 and out["result"]["pole"] and abs(out["result"]["residue"][0] - 1) < 1e-12
    code, out = call("lerch", "--s", "2", "--w", "-1")
    assert code == 1


def test_negative_values_accepted():
    code, out = call("det", "--group", "builtin:cusped", "--s", "-0.25", "--degree", "10")
    assert code == 0


def test_failed_run_leaves_no_partial_files(tmp_path):
    call("zeta", "--s", "0.2", "--out", str(tmp_path))
    assert [p for p in os.listdir(tmp_path) if not p.startswith(".")] == []


def _bench(tmp_path, workers):
    d = tmp_path / f"w{workers}"
    code, out = call("bench", "--group", "builtin:funnel", "--degree", "30", "--grid", "101,101",
                     "--workers", str(workers), "--out", str(d))
    assert code == 0
    return out, (d / "bench_values.csv").read_bytes()


def test_bench_determinism(tmp_path):
    out1, v1 = _bench(tmp_path, 1)
    out2, v2 = _bench(tmp_path, 2)
    assert set(out1["timings"]) == {"enumeration", "assembly", "determinant", "scan"}
    assert v1 == v2
    _, v1b = _bench(tmp_path / "again", 1)
    assert v1 == v1b


def test_workers_env(monkeypatch):
    monkeypatch.setenv("ZETAFORGE_WORKERS", "3")
    code, out = call("bench", "--degree", "8", "--grid", "3,3")
    assert code == 0 and out["workers"] == 3
    monkeypatch.setenv("ZETAFORGE_WORKERS", "zero")
    code, _ = call("bench", "--degree", "8", "--grid", "3,3")
    assert code == 1


def test_console_script_entry():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "zetaforge", "validate", "--tuple",
                        fixture_path("funnel.json")], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["status"] == "ok"
