import copy
import csv
import json
import os
import subprocess
import sys

import pytest

from yeebands.cli import ConfigError, load_config, main, parse_config

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")

SMALL = {
    "lattice": {"class": "cubic", "grid": [4, 4, 4]},
    "geometry": {"shapes": [{"type": "sphere", "center": [0.5, 0.5, 0.5], "radius": 0.2}]},
    "kpath": {"path": "X-M", "samples_per_segment": 2},
    "solver": {"num_eigs": 4},
}


def _write(tmp_path, cfg, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_validate_only_shipped_configs(capsys):
    for name in ("sc_sphere.json", "bcc_gyroid.json"):
        assert main(["--config", os.path.join(CONFIGS, name), "--validate-only"]) == 0
        assert "config ok" in capsys.readouterr().out


def test_missing_lattice_exit_1(tmp_path, capsys):
    cfg = copy.deepcopy(SMALL)
    del cfg["lattice"]
    assert main(["--config", _write(tmp_path, cfg)]) == 1
    assert "lattice" in capsys.readouterr().err


@pytest.mark.parametrize("path, value, field", [
    (("lattice", "grid"), [4, 0, 4], "lattice.grid"),
    (("solver", "tol_outer"), 2.0, "solver.tol_outer"),
    (("kpath", "samples_per_segment"), 0, "kpath.samples_per_segment"),
    (("geometry", "eps_out"), 0.5, "geometry.eps_out"),
])
def test_bad_fields_named(tmp_path, capsys, path, value, field):
    cfg = copy.deepcopy(SMALL)
    cfg[path[0]][path[1]] = value
    assert main(["--config", _write(tmp_path, cfg)]) == 1
    assert field in capsys.readouterr().err


def test_bad_shape_names_index(tmp_path, capsys):
    cfg = copy.deepcopy(SMALL)
    cfg["geometry"]["shapes"][0]["radius"] = -1
    assert main(["--config", _write(tmp_path, cfg)]) == 1
    assert "geometry.shapes[0].radius" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path):
    cfg = copy.deepcopy(SMALL)
    cfg["solver"]["tolerance"] = 1e-3
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, cfg))
    assert "solver.tolerance" in str(info.value)


def test_invalid_json(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["--config", str(p)]) == 1
    assert main(["--config", str(tmp_path / "missing.json")]) == 1


def test_bad_threads_flag(tmp_path):
    assert main(["--config", _write(tmp_path, SMALL), "--threads", "0"]) == 1


def test_defaults():
    cfg = parse_config(copy.deepcopy(SMALL), ".")
    assert cfg.solver.tol_outer == 1e-12 and cfg.solver.tol_inner == 1e-13
    assert cfg.geometry.eps_out == 1.0 and cfg.geometry.shapes[0].eps == 13.0
    bare = parse_config({"lattice": {"class": "cubic", "grid": [4, 4, 4]}}, ".")
    assert bare.solver.num_eigs == 10 and bare.path.samples_per_segment == 10


def test_raw_lattice_requires_points():
    raw = {"lattice": {"lengths": [1, 1, 1], "angles_deg": {"gamma": 90, "beta": 90, "alpha": 90},
                       "grid": [4, 4, 4]}}
    with pytest.raises(ConfigError):
        parse_config(raw, ".")
    raw["kpath"] = {"path": "A-B", "points": {"A": [0, 0, 0.1], "B": [0.5, 0, 0]}}
    cfg = parse_config(raw, ".")
    assert len(cfg.samples()) == 11


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "bands.csv"
    svg = tmp_path / "bands.svg"
    assert main(["--config", _write(tmp_path, SMALL), "--out", str(out), "--svg", str(svg)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0][:6] == ["index", "s", "kx", "ky", "kz", "status"]
    assert len(rows) == 1 + 3 and len(rows[0]) == 6 + 4
    data = json.loads((tmp_path / "bands.json").read_text())
    assert data["metadata"]["path"] == "X-M" and len(data["rows"]) == 3
    assert svg.read_text().startswith("<svg")


def test_csv_to_stdout(tmp_path, capsys):
    assert main(["--config", _write(tmp_path, SMALL)]) == 0
    assert capsys.readouterr().out.startswith("index,s,kx")


def test_byte_identical_rerun(tmp_path):
    cfg = _write(tmp_path, SMALL)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["--config", cfg, "--out", str(a), "--threads", "1"]) == 0
    assert main(["--config", cfg, "--out", str(b), "--threads", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sweep_outputs(tmp_path):
    cfg = copy.deepcopy(SMALL)
    cfg["sweep"] = {"eps": [13, 4]}
    cfg["output"] = {"csv": "s.csv", "json": "s.json"}
    assert main(["--config", _write(tmp_path, cfg)]) == 0
    names = set(os.listdir(tmp_path))
    assert {"s_eps13.csv", "s_eps4.csv", "s_eps13.json", "s_eps4.json", "s_sweep.json"} <= names
    summary = json.loads((tmp_path / "s_sweep.json").read_text())
    assert [e["eps_in"] for e in summary] == [13, 4]


def test_all_failed_exit_2(tmp_path):
    cfg = copy.deepcopy(SMALL)
    cfg["solver"]["max_inner"] = 1
    assert main(["--config", _write(tmp_path, cfg)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "yeebands", "--config", _write(tmp_path, SMALL),
                           "--validate-only"], capture_output=True, text=True)
    assert proc.returncode == 0 and "config ok" in proc.stdout


def test_sc_demo_config_row_count(tmp_path):
    out = tmp_path / "sc.csv"
    assert main(["--config", os.path.join(CONFIGS, "sc_sphere.json"), "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    # Γ-X-M-Γ-R is four segments, M-R one more branch
    assert len(rows) - 1 == (4 * 10 + 1) + (1 * 10 + 1)
    assert rows[0][6:] == [f"omega_{i}" for i in range(1, 11)]
    assert all(r[5] == "ok" for r in rows[1:])
