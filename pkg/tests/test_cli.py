import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from spectaper.cli import EXIT_ACCEPTANCE, EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from spectaper.kernel_approx import rate_experiment

SMALL = {
    "spectrum-report": {"N": 6, "T": 512, "n_roundtrip": 50, "n_bound_pairs": 5},
    "collapse": {"N_list": [4, 8], "trials": 10000},
    "approx-rates": {"strategy": "all", "beta": 0.5, "T": 256, "N_list": [4, 6],
                     "seeds": [0, 1, 2], "grid_size": 256},
    "scale-mismatch": {"N": 6, "T": 1024, "t_list": [32, 1024], "grid_size": 256},
    "taper-check": {"N": 5, "T_ref": 1000, "n_spectra": 10},
    "gates-dump": {"architecture": "mamba", "N": 4, "L": 8, "step_size": 0.5},
    "impulse": {"N": 4, "T": 512, "t_list": [400], "fractions": [0.05, 0.1]},
    "energy": {"alpha": 0.5, "ell": 0.05, "t_list": [20, 80], "trials": 1000},
    "scan-check": {"L": 64, "N": 3, "d": 2, "instances": 2, "chunks": [1, 8, 64]},
}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_collapse_schema(tmp_path):
    cfg = write_cfg(tmp_path, {"experiment": "collapse", "seed": 7, "output": "c.csv",
                               "params": {"N_list": [8, 16, 32], "trials": 100000}})
    assert main(["run", cfg, "--out-dir", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "c.csv")
    assert rows[0][:5] == ["N", "mean_min_gap", "closed_form", "stderr", "mean_max_coherence"]
    assert [r[0] for r in rows[1:]] == ["8", "16", "32"]
    meta = json.loads((tmp_path / "c.csv.meta.json").read_text())
    assert meta["metadata"]["seed"] == 7 and "wall_time" in meta["metadata"]
    assert meta["passed"] is True
    raw = (tmp_path / "c.csv").read_bytes()
    assert b"\r" not in raw
    # full precision floats survive a text round trip
    assert float(rows[1][2]) == 1 / 63


def test_approx_rates_values(tmp_path):
    params = {"strategy": "geometric", "beta": 0.5, "T": 1024, "N_list": [4, 6, 8],
              "grid_size": 512, "span_search": False}
    cfg = write_cfg(tmp_path, {"experiment": "approx-rates", "params": params})
    assert main(["run", cfg, "--out-dir", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "approx-rates.csv")
    ref = rate_experiment("geometric", 0.5, 1024, [4, 6, 8], grid_size=512, span_search=False)
    got = {r[2]: r[3] for r in rows[1:]}
    for N, e in zip(ref.N, ref.error):
        assert float(got[str(N)]) == e
    assert float(got["fit_slope"]) == ref.slope


def test_invalid_beta(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"experiment": "approx-rates", "params": {"beta": 1.5}})
    assert main(["run", cfg, "--out-dir", str(tmp_path)]) == EXIT_VALIDATION
    assert "beta" in capsys.readouterr().err
    assert not list(tmp_path.glob("*.csv"))


def test_all_violations_listed(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"experiment": "scale-mismatch",
                               "params": {"N": 0, "beta": -1, "colour": 3}})
    assert main(["run", cfg]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    for field in ("params.N", "params.beta", "params.colour"):
        assert field in err


def test_unknown_top_level_key(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"experiment": "energy", "sead": 3})
    assert main(["run", cfg]) == EXIT_VALIDATION
    assert "sead" in capsys.readouterr().err


def test_unknown_experiment(tmp_path):
    cfg = write_cfg(tmp_path, {"experiment": "nope"})
    assert main(["run", cfg]) == EXIT_VALIDATION


def test_io_error(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write_cfg(tmp_path, {"experiment": "taper-check", "params": SMALL["taper-check"]})
    assert main(["run", cfg, "--out-dir", str(blocker)]) == EXIT_IO
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_IO
    assert "missing.json" in capsys.readouterr().err


@pytest.mark.parametrize("name", sorted(SMALL))
def test_determinism(tmp_path, name):
    outs = []
    for run in range(2):
        d = tmp_path / f"r{run}"
        cfg = write_cfg(tmp_path, {"experiment": name, "seed": 11, "params": SMALL[name]})
        assert main(["run", cfg, "--out-dir", str(d)]) == EXIT_OK
        meta = json.loads((d / f"{name}.csv.meta.json").read_text())
        meta["metadata"].pop("wall_time")
        outs.append(((d / f"{name}.csv").read_bytes(), meta))
    assert outs[0] == outs[1]
    assert not [p for p in tmp_path.rglob(".tmp-*")]


def test_json_format_and_seed_override(tmp_path):
    cfg = write_cfg(tmp_path, {"experiment": "collapse", "seed": 1, "format": "json",
                               "params": SMALL["collapse"]})
    assert main(["run", cfg, "--out-dir", str(tmp_path / "a"), "--seed", "5"]) == EXIT_OK
    doc = json.loads((tmp_path / "a" / "collapse.json").read_text())
    assert doc["metadata"]["seed"] == 5
    assert len(doc["rows"]) == 2 and all(len(r) == len(doc["columns"]) for r in doc["rows"])
    cfg5 = write_cfg(tmp_path, {"experiment": "collapse", "seed": 5, "format": "json",
                                "params": SMALL["collapse"]}, "five.json")
    assert main(["run", cfg5, "--out-dir", str(tmp_path / "b")]) == EXIT_OK
    other = json.loads((tmp_path / "b" / "collapse.json").read_text())
    assert other["rows"] == doc["rows"]


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("SPECTAPER_OUT_DIR", str(tmp_path / "env"))
    cfg = write_cfg(tmp_path, {"experiment": "gates-dump", "params": SMALL["gates-dump"]})
    assert main(["run", cfg]) == EXIT_OK
    rows = read_csv(tmp_path / "env" / "gates-dump.csv")
    assert rows[0] == ["t", "w_1", "w_2", "w_3", "w_4"] and len(rows) == 9


def test_report_empty(tmp_path):
    cfg = write_cfg(tmp_path, {"experiments": []})
    assert main(["report", cfg, "--out-dir", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["experiments"] == [] and doc["metadata"]["n_experiments"] == 0


def test_report_mixed(tmp_path):
    members = [
        {"experiment": "taper-check", "params": SMALL["taper-check"]},
        # saturated exponential: finite-t ratio sits below the lower bracket
        {"experiment": "energy", "params": {"alpha": 0.5, "ell": 1.0, "t_list": [200, 800],
                                            "trials": 1000}},
        {"experiment": "energy", "params": {"beta": 2}},
    ]
    cfg = write_cfg(tmp_path, {"experiments": members, "output": "sum.json"})
    code = main(["report", cfg, "--out-dir", str(tmp_path), "--threads", "2"])
    assert code == EXIT_ACCEPTANCE
    doc = json.loads((tmp_path / "sum.json").read_text())
    assert [b["passed"] for b in doc["experiments"]] == [True, False, False]
    assert "beta" in doc["experiments"][2]["error"]


def test_report_thread_invariance(tmp_path):
    members = [{"experiment": n, "seed": 3, "params": SMALL[n]}
               for n in ("collapse", "scan-check", "impulse")]
    docs = []
    for threads in ("1", "3"):
        cfg = write_cfg(tmp_path, {"experiments": members, "output": f"r{threads}.json"})
        assert main(["report", cfg, "--out-dir", str(tmp_path), "--threads", threads]) == 0
        doc = json.loads((tmp_path / f"r{threads}.json").read_text())
        docs.append([b["rows"] for b in doc["experiments"]])
    assert docs[0] == docs[1]


def test_console_entry(tmp_path):
    cfg = write_cfg(tmp_path, {"experiment": "scan-check", "params": SMALL["scan-check"]})
    res = subprocess.run([sys.executable, "-m", "spectaper", "run", cfg, "--out-dir",
                          str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert os.path.exists(tmp_path / "scan-check.csv")


def test_bundled_report_config_validates():
    from spectaper.cli import default_report_config, validate_config

    raw = default_report_config()
    names = {validate_config(m)[0].experiment for m in raw["experiments"]}
    assert names >= {"collapse", "approx-rates", "scale-mismatch", "taper-check", "impulse",
                     "energy", "scan-check", "gates-dump", "spectrum-report"}
