import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from orbcount import __version__
from orbcount.cli import main
from orbcount.group_enum import read_census_log
from orbcount.io import header_dict, header_lines, read_csv, write_csv, write_json

GOLDEN = Path(__file__).parent / "golden"


def run(tmp_path, *argv, config=None):
    args = list(argv) + ["--out", str(tmp_path / "out"), "-q"]
    if config is not None:
        path = tmp_path / "run.cfg"
        path.write_text(config)
        args += ["--config", str(path)]
    return main(args), tmp_path / "out"


def body(path):
    return [line for line in Path(path).read_text().splitlines() if not line.startswith("#")]


def load(path):
    return json.loads(Path(path).read_text())


# --- emissions --------------------------------------------------------------


def test_csv_round_trip_and_header(tmp_path):
    header = header_lines("abc", 1.5, {"note": "x"})
    write_csv(tmp_path / "t.csv", ["a", "b"], [[1, 0.1], [2, np.float64(1 / 3)]], header)
    text = (tmp_path / "t.csv").read_text().splitlines()
    assert text[:4] == [f"# orbcount {__version__}", "# config_hash: abc", "# completeness_radius: 1.5", "# note: x"]
    cols, rows = read_csv(tmp_path / "t.csv")
    assert cols == ["a", "b"] and float(rows[1][1]) == 1 / 3


def test_json_meta_and_non_finite_values(tmp_path):
    write_json(tmp_path / "t.json", {"h": float("-inf"), "v": np.arange(2), "ok": np.True_}, header_lines("h", None))
    doc = load(tmp_path / "t.json")
    assert doc["meta"] == header_dict(header_lines("h", None))
    assert doc["result"] == {"h": "-inf", "v": [0, 1], "ok": True}


# --- subcommands ------------------------------------------------------------


@pytest.mark.slow
def test_count_matches_golden_files(tmp_path):
    code, out = run(tmp_path, "count", "--preset", "schottky2_sym", "--radius", "12")
    assert code == 0
    assert body(out / "counting.csv") == body(GOLDEN / "counting_schottky2_sym_r12.csv")
    got, ref = load(out / "count_fit.json"), load(GOLDEN / "count_fit_schottky2_sym_r12.json")
    assert got["result"] == ref["result"]
    assert got["meta"]["completeness_radius"] == ref["meta"]["completeness_radius"]


def test_count_is_byte_identical_across_runs_and_threads(tmp_path):
    code1, out1 = run(tmp_path / "a", "count", "--radius", "9")
    code2, out2 = run(tmp_path / "b", "count", "--radius", "9", "--threads", "3")
    assert code1 == code2 == 0
    for name in ("counting.csv", "count_fit.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_entropy_constant_roof(tmp_path):
    r = 1.7
    code, out = run(tmp_path, "entropy", config=f"preset = schottky2_sym\nroof = {r}\ndepth = 6")
    assert code == 0
    res = load(out / "entropy.json")["result"]
    assert abs(res["h"] - np.log(3) / r) <= 1e-10
    assert res["closed_form"] == pytest.approx(np.log(3) / r, abs=1e-15)


def test_enumerate_writes_binary_log(tmp_path):
    code, out = run(tmp_path, "enumerate", "--radius", "5")
    assert code == 0
    summary = load(out / "census.json")["result"]
    assert summary["elements"] == 1 + sum(4 * 3 ** (j - 1) for j in range(1, 6))
    assert summary["ping_pong"]["certified"] and summary["monotone"]
    rec = read_census_log(out / "census.bin", 2)
    assert len(rec) == summary["elements"]


def test_psmeasure_outputs(tmp_path):
    code, out = run(tmp_path, "psmeasure", "--depth", "6")
    assert code == 0
    cols, rows = read_csv(out / "cylinder_masses.csv")
    assert cols == ["word", "mass"] and len(rows) == 4 * 3 ** 5
    assert sum(float(m) for _, m in rows) == pytest.approx(1.0, abs=1e-12)
    res = load(out / "psmeasure.json")["result"]
    assert res["refinement_residual"] <= 1e-8
    assert res["quasi_invariance"]["max_residual"] <= 0.1


def test_rank_two_pipeline(tmp_path):
    code, out = run(tmp_path, "all", "--preset", "product2", "--radius", "10", "--depth", "6")
    assert code == 0
    for name in ("census.bin", "counting.csv", "psi_sample.csv", "cone.csv", "growth_form.csv",
                 "entropy.json", "cylinder_masses.csv"):
        assert (out / name).exists()
    cols, rows = read_csv(out / "cone.csv")
    assert cols == ["x_1", "x_2", "x_3", "x_4", "supporting_word"] and len(rows) == 2
    form = load(out / "growth_form.json")["result"]
    assert form["orthogonality"] <= 1e-9 and not form["boundary"]
    cols, rows = read_csv(out / "growth_form.csv")
    assert [r[0] for r in rows] == ["coeffs", "u"]


def test_dedup_run_is_marked_approximate(tmp_path, capsys):
    code, out = run(tmp_path, "count", "--radius", "8", config="preset = schottky2_sym\nmode = dedup")
    assert code == 0
    assert "APPROXIMATE" in capsys.readouterr().out
    assert "APPROXIMATE" in (out / "counting.csv").read_text().splitlines()[3]


def test_dedup_entropy_unsupported(tmp_path):
    code, _ = run(tmp_path, "entropy", config="preset = schottky2_sym\nmode = dedup")
    assert code == 3


# --- exit codes -------------------------------------------------------------


def test_bad_config_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "count", config="generator = [[2, 0], [0, 1]]")
    assert code == 2
    assert "generator 0" in capsys.readouterr().err


def test_parse_error_reports_position(tmp_path, capsys):
    code, _ = run(tmp_path, "count", config="radius = 12\nradius 13")
    assert code == 2
    assert "line 2, column 1" in capsys.readouterr().err


def test_out_of_range_override(tmp_path):
    assert run(tmp_path, "count", "--radius", "99")[0] == 2


def test_failed_check_exit_code(tmp_path):
    # the identity is not proximal, so the ping-pong certificate fails
    code, out = run(tmp_path, "enumerate", "--radius", "3",
                    config="generator = [[4, 0], [0, 0.25]]\ngenerator = [[1, 0], [0, 1]]")
    assert code == 1
    assert not load(out / "census.json")["result"]["ping_pong"]["certified"]


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "orbcount.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == f"orbcount {__version__}"


@pytest.mark.slow
def test_verify_exits_zero(tmp_path):
    code, out = run(tmp_path, "verify")
    assert code == 0
    results = load(out / "verify.json")["result"]
    assert all(r["passed"] for r in results.values())
