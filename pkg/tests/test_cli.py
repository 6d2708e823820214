import json
import subprocess
import sys

import numpy as np
import pytest

from dispersive_profiles.cli import CONFIG_ENV, main
from dispersive_profiles.dfld import read_dfld, write_dfld
from dispersive_profiles.field import Field, GridSpec

SPEC = {
    "d": 1,
    "grid": {"M": 256},
    "n_max": 8,
    "T": 8.0,
    "n_t": 33,
    "laws": {"kind": "mixed"},
    "profiles": [{"kind": "ricker", "width": 2.0, "energy": 1.0}, {"kind": "ricker", "width": 2.0, "energy": 0.5}],
    "noise": {"level": 1e-3},
    "seed": 3,
    "symbol": "schrodinger",
    "s": 0.25,
}


def test_exponents_text(capsys):
    assert main(["exponents", "--symbol", "schrodinger", "--d", "3", "--s", "1"]) == 0
    out = capsys.readouterr().out
    assert "r = 10" in out and "p(s) = 6" in out


def test_exponents_json_exact_rationals(capsys):
    assert main(["exponents", "--symbol", "dirac3d", "--d", "3", "--s", "3/4", "--json"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["r"] == "16/3"


def test_exponents_pair(capsys):
    assert main(["exponents", "--symbol", "wave", "--d", "3", "--s", "1/2", "--p", "4"]) == 0
    assert "(p, q) = (4, 4)" in capsys.readouterr().out


def test_usage_errors_exit_2(capsys, tmp_path):
    assert main(["exponents", "--symbol", "dirac3d", "--d", "2", "--s", "1/2"]) == 2
    assert "error [ConfigError]" in capsys.readouterr().err
    assert main(["exponents", "--symbol", "schrodinger", "--d", "1", "--s", "1/2"]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["exponents", "--config", str(cfg)]) == 2
    assert "unknown config keys: bogus" in capsys.readouterr().err
    assert main(["propagate", "--input", str(tmp_path / "missing.dfld"), "--output", "x", "--t", "1"]) == 2


def test_config_from_environment(monkeypatch, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"symbol": "wave", "d": 3, "s": 0.5}))
    monkeypatch.setenv(CONFIG_ENV, str(cfg))
    assert main(["exponents"]) == 0
    assert "r = 4" in capsys.readouterr().out
    # flags override the file
    assert main(["exponents", "--s", "1"]) == 0
    assert "r = 8" in capsys.readouterr().out


def test_propagate_roundtrip(tmp_path):
    g = GridSpec(1, 64)
    f = Field(g, np.exp(-(g.x1d**2) / 8) + 0j)
    src, dst = tmp_path / "in.dfld", tmp_path / "out.dfld"
    write_dfld(src, f)
    assert main(["propagate", "--symbol", "schrodinger", "--input", str(src), "--output", str(dst), "--t", "1", "-1"]) == 0
    out, header = read_dfld(dst)
    assert header["count"] == 2 and header["meta"]["times"] == [1.0, -1.0]
    assert np.linalg.norm(out[0].phys) == pytest.approx(np.linalg.norm(f.phys))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    spec = d / "spec.json"
    spec.write_text(json.dumps(SPEC))
    fam = d / "fam.dfld"
    assert main(["synthesize", "--spec", str(spec), "--output", str(fam), "--ledger", str(d / "ledger.json")]) == 0
    args = [
        "decompose", "--symbol", "schrodinger", "--input", str(fam), "--s", "0.25", "--delta-s", "auto",
        "--window-T", "8", "--nt", "33", "--report", str(d / "report.json"), "--dump-dir", str(d / "dump"),
        "--csv-dir", str(d / "csv"), "--figures-dir", str(d / "fig"),
    ]
    assert main(args) == 0
    return d


def test_synthesize_then_decompose(pipeline):
    rep = json.loads((pipeline / "report.json").read_text())
    assert rep["J"] == 2
    assert [round(p["energy"], 2) for p in rep["profiles"]] == [1.0, 0.5]
    assert (pipeline / "dump" / "profiles.dfld").exists() and (pipeline / "dump" / "remainder.dfld").exists()
    assert (pipeline / "csv" / "ledger.csv").read_text().startswith("step,profile_energy,max_abs_defect")
    for name in ("strichartz_trace.png", "ledger.png", "profiles.png"):
        assert (pipeline / "fig" / name).stat().st_size > 0


def test_verify_pythagorean_from_dump(pipeline, capsys):
    args = [
        "verify", "--check", "pythagorean", "--symbol", "schrodinger", "--s", "0.25",
        "--decomposition", str(pipeline / "report.json"), "--dump-dir", str(pipeline / "dump"),
        "--family", str(pipeline / "fam.dfld"), "--report", str(pipeline / "verdict.json"),
    ]
    assert main(args) == 0
    verdict = json.loads((pipeline / "verdict.json").read_text())
    assert verdict["passed"] and verdict["verdicts"][0]["check"] == "pythagorean"


def test_verify_writes_csv_and_figures(tmp_path):
    args = [
        "verify", "--check", "lqdecay", "--symbol", "schrodinger", "--d", "1", "--M", "4096", "--L-box", "800",
        "--report", str(tmp_path / "v.json"), "--csv-dir", str(tmp_path / "csv"), "--figures-dir", str(tmp_path / "fig"),
    ]
    code = main(args)
    verdict = json.loads((tmp_path / "v.json").read_text())
    assert code == (0 if verdict["passed"] else 1)
    assert (tmp_path / "csv" / "01_lqdecay.csv").exists()
    assert (tmp_path / "fig" / "01_lqdecay.png").exists()


def test_decompose_report_is_deterministic(pipeline, tmp_path):
    args = [
        "decompose", "--symbol", "schrodinger", "--input", str(pipeline / "fam.dfld"), "--s", "0.25",
        "--delta-s", "auto", "--window-T", "8", "--nt", "33", "--report", str(tmp_path / "again.json"),
    ]
    assert main(args) == 0
    assert (tmp_path / "again.json").read_bytes() == (pipeline / "report.json").read_bytes()


def test_console_script_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "dispersive_profiles.cli", "exponents", "--symbol", "schrodinger", "--d", "3", "--s", "1"],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0 and "r = 10" in res.stdout


def test_rational_sobolev_index_everywhere(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SPEC))
    fam = tmp_path / "fam.dfld"
    assert main(["synthesize", "--spec", str(spec), "--output", str(fam), "--s", "1/4"]) == 0
    with pytest.raises(SystemExit):
        main(["verify", "--check", "unitarity", "--s", "one quarter"])


def test_verify_lqdecay_width(capsys):
    code = main(["verify", "--check", "lqdecay", "--symbol", "wave", "--d", "3", "--width", "3"])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["passed"] is True
