import json
import subprocess
import sys

import numpy as np
import pytest

from todamaps.cli import dumps, run


def _report(out, name):
    return json.loads((out / name).read_text())


def test_dumps_is_sorted_and_full_precision():
    s = dumps({"b": 0.1, "a": [1, 2.5, complex(1, -2)], "c": np.float64(1 / 3), "d": True, "e": None})
    assert s == '{"a": [1, 2.5, [1, -2]], "b": 0.10000000000000001, "c": 0.33333333333333331, "d": true, "e": null}\n'
    assert dumps(float("inf")) == '"inf"\n'
    with pytest.raises(TypeError):
        dumps(object())


def test_algebra_verify_schema(tmp_path):
    assert run(["algebra", "verify", "--n", "4", "--out", str(tmp_path)]) == 0
    r = _report(tmp_path, "algebra_verify.json")
    assert set(r) == {"command", "config_echo", "residuals", "artifacts", "details"}
    assert r["command"] == "algebra verify"
    assert r["config_echo"]["n"] == 4
    assert r["residuals"]["jacobi"] == {"max_abs": 0.0, "rms": 0.0, "tolerance": 0.0, "pass": True}
    assert r["details"]["cartan_matrix"] == [[2, -1, 0], [-1, 2, -1], [0, -1, 2]]


def test_uniton_density_at_origin(tmp_path):
    assert run(["uniton", "generate", "--f", "0,1", "--n", "97", "--format", "both", "--out", str(tmp_path)]) == 0
    r = _report(tmp_path, "uniton_generate.json")
    assert r["details"]["origin"] == [0.0, 0.0]
    assert r["details"]["density_at_origin"] == pytest.approx(1.0, abs=1e-12)
    for a in r["artifacts"]:
        assert (tmp_path / a).exists()
    assert "uniton_density.csv" in r["artifacts"]


def test_failing_residual_exits_one(tmp_path):
    # alpha = 1 does not match phi = -2 ln(1 + z zbar)
    assert run(["toda", "residual", "--alpha", "1", "--n", "24", "--out", str(tmp_path)]) == 1
    r = _report(tmp_path, "toda_residual.json")
    assert r["residuals"]["toda"]["pass"] is False


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["algebra"],
    ["algebra", "verify", "--n", "1"],
    ["uniton", "generate"],
    ["uniton", "generate", "--f", "0,x"],
    ["toda", "residual", "--beta", "0"],
    ["cat", "verify", "--tol", "-1"],
    ["wzw", "decompose", "--matrix", "1,2,3"],
    ["wzw", "decompose", "--matrix", "2,0,0,1"],
    ["uniton", "generate", "--f", "0,1", "--n", "4"],
])
def test_usage_errors_exit_two(argv, tmp_path, capsys):
    assert run(argv + ["--out", str(tmp_path)] if len(argv) > 1 else argv) == 2


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("TODAMAPS_OUT_DIR", str(tmp_path / "env"))
    assert run(["affine", "verify", "--samples", "20"]) == 0
    assert (tmp_path / "env" / "affine_verify.json").exists()


def test_subcommand_output_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["affine", "verify", "--samples", "40", "--seed", "3", "--out", str(d)]) == 0
    assert (a / "affine_verify.json").read_bytes() == (b / "affine_verify.json").read_bytes()


def test_wzw_decompose_matrix(tmp_path):
    assert run(["wzw", "decompose", "--matrix", "2,1,1,1", "--out", str(tmp_path)]) == 0
    d = _report(tmp_path, "wzw_decompose.json")["details"]
    assert d["x"] == [1.0, 0.0] and d["y"] == [1.0, 0.0] and d["phi"] == [0.0, 0.0]


@pytest.mark.parametrize("argv", [
    ["cat", "verify", "--n", "24"],
    ["cat", "limit", "--which", "sinh", "--n", "24"],
    ["cat", "limit", "--which", "liouville", "--n", "24"],
    ["toda", "connection", "--n", "24"],
    ["reduce", "result4", "--count", "3", "--n", "24"],
])
def test_small_subcommands_pass(argv, tmp_path):
    assert run(argv + ["--out", str(tmp_path)]) == 0


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "todamaps", "algebra", "verify", "--n", "2", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert p.returncode == 0 and "pass" in p.stdout
