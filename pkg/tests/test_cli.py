import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from cli_project import (ue_points, write_config, write_footprints, write_measurements, write_stations,
                         write_ues)
from helpers import ORIGIN, geo
from oracles import fspl_db
from urbanray.cli import main
from urbanray.evaluation import FidelityReport
from urbanray.propagation.rssi import REAL, RssiMatrix

STATIONS = [("BS0", -100, 120, 25.0, {"pattern": "tr38901", "azimuth": 0}),
            ("BS1", 120, 100, 30.0, {"pattern": "tr38901", "azimuth": 120}),
            ("BS2", 0, -150, 20.0, {"pattern": "tr38901", "azimuth": 240})]


def provenance_lines(path):
    return [ln for ln in path.read_text().splitlines() if ln.startswith("#")]


@pytest.fixture()
def project(tmp_path):
    ues = ue_points(40)
    write_footprints(tmp_path / "fp.geojson")
    write_stations(tmp_path / "stations.json", STATIONS)
    write_ues(tmp_path / "ues.csv", ues)
    cfg = write_config(tmp_path / "run.json", footprints="fp.geojson", stations="stations.json", ues="ues.csv",
                       seed=3, solver={"samples_per_src": 3000})
    return tmp_path, cfg, ues


@pytest.fixture()
def measured(project):
    """Project whose REAL data are a noisy simulation at different station azimuths."""
    d, cfg, ues = project
    write_stations(d / "truth.json", [(s, x, y, a, {**e, "azimuth": (e["azimuth"] + 60) % 360})
                                      for s, x, y, a, e in STATIONS])
    assert main(["simulate", "-c", str(cfg), "--stations", str(d / "truth.json"),
                 "--out", str(d / "truth.csv"), "--workers", "1"]) == 0
    write_measurements(d / "meas.csv", ues, d / "truth.csv", noise_db=2.0)
    doc = json.loads(cfg.read_text())
    doc.pop("ues")
    doc["measurements"] = "meas.csv"
    doc["sweep"] = {"target": "BS_ALTITUDE", "values": [11, 12, 15, 20, 35, 40, 55], "scope": "PER_STATION"}
    doc["optimize"] = {"axes": [{"target": "BS_AZIMUTH", "values": list(range(0, 360, 60)),
                                 "scope": "PER_STATION"}]}
    cfg.write_text(json.dumps(doc))
    return d, cfg, ues


def test_scene_build_summary(project, capsys):
    d, cfg, _ = project
    assert main(["scene", "build", "-c", str(cfg), "--obj", str(d / "s.obj")]) == 0
    doc = json.loads((d / "out" / "scene.json").read_text())
    assert doc["summary"]["prisms"] == 5
    assert doc["provenance"]["command"] == "scene build"
    assert "5 prisms" in capsys.readouterr().out
    obj = (d / "s.obj").read_text()
    assert obj.startswith("# tool=urbanray") and obj.count("\nf ") == doc["summary"]["triangles"]


def test_export_obj(project):
    d, cfg, _ = project
    assert main(["scene", "export-obj", "-c", str(cfg), "--out", str(d / "x.obj")]) == 0
    assert "config_sha256=" in (d / "x.obj").read_text()


def test_bad_footprint_reports_id(project, capsys):
    d, cfg, _ = project
    write_footprints(d / "bad.geojson", bad=True)
    assert main(["scene", "build", "-c", str(cfg), "--footprints", str(d / "bad.geojson")]) != 0
    assert "bowtie" in capsys.readouterr().err


def test_missing_input_is_an_error(project, capsys):
    d, cfg, _ = project
    assert main(["simulate", "-c", str(cfg), "--stations", str(d / "nope.json")]) == 2
    assert "not found" in capsys.readouterr().err


def test_simulate_free_space_matches_fspl(tmp_path):
    write_stations(tmp_path / "st.json", [("BS0", 0.0, 0.0, 30.0, {"pattern": "iso", "tx_power": 43.0})])
    write_ues(tmp_path / "ues.csv", [("u0", 300.0, 400.0)])
    cfg = write_config(tmp_path / "run.json", stations="st.json", ues="ues.csv", ground=False)
    assert main(["simulate", "-c", str(cfg), "--workers", "1"]) == 0
    m = RssiMatrix.from_csv(tmp_path / "out" / "sim_rssi.csv")
    d = float(np.sqrt(300.0 ** 2 + 400.0 ** 2 + (30.0 - 1.5) ** 2))
    assert abs(m.values[0, 0] - (43.0 - fspl_db(d, 1.2e9))) < 0.01


def test_simulate_deterministic_across_workers(project):
    d, cfg, _ = project
    outs = []
    for i, w in enumerate(("1", "3", "1")):
        out = d / f"sim{i}.csv"
        assert main(["simulate", "-c", str(cfg), "--workers", w, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    assert main(["simulate", "-c", str(cfg), "--seed", "4", "--out", str(d / "s4.csv"), "--workers", "1"]) == 0
    assert (d / "s4.csv").read_bytes() != outs[0]


def test_simulate_provenance(project):
    d, cfg, _ = project
    assert main(["simulate", "-c", str(cfg), "--workers", "1"]) == 0
    lines = provenance_lines(d / "out" / "sim_rssi.csv")
    keys = {ln[2:].split("=")[0] for ln in lines}
    assert keys == {"tool", "command", "seed", "config_sha256"}
    assert "# seed=3" in lines


def test_solver_flag_changes_hash(project):
    d, cfg, _ = project
    main(["simulate", "-c", str(cfg), "--workers", "1", "--out", str(d / "a.csv")])
    main(["simulate", "-c", str(cfg), "--workers", "1", "--out", str(d / "b.csv"), "--solver", "max_depth=1"])
    main(["simulate", "-c", str(cfg), "--workers", "2", "--out", str(d / "c.csv")])
    a, b, c = (provenance_lines(d / f"{n}.csv")[-1] for n in "abc")
    assert a != b and a == c


def test_evaluate_self_is_perfect(project):
    d, cfg, _ = project
    assert main(["simulate", "-c", str(cfg), "--workers", "1"]) == 0
    sim = d / "out" / "sim_rssi.csv"
    assert main(["evaluate", "-c", str(cfg), "--real", str(sim)]) == 0
    rep = FidelityReport.load(d / "out" / "report.json")
    assert all(v == 1.0 for v in rep.per_station_spearman.values())
    assert rep.knn_errors["RR"] == rep.knn_errors["SS"]
    assert rep.knn_errors["RS"] == rep.knn_errors["SR"] == rep.knn_errors["RR"]
    assert rep.meta["command"] == "evaluate"


def test_sweep_then_report(measured):
    d, cfg, _ = measured
    assert main(["sweep", "-c", str(cfg), "--workers", "1"]) == 0
    doc = json.loads((d / "out" / "sweep.json").read_text())
    assert [r["value"] for r in doc["rows"]] == [11, 12, 15, 20, 35, 40, 55]
    assert main(["report", "-c", str(cfg), str(d / "out" / "sweep.json")]) == 0
    svg = (d / "out" / "sweep_spearman.svg").read_text()
    assert svg.count('<g class="group"') == 7
    assert "config_sha256=" in svg
    knn = (d / "out" / "sweep_knn.svg").read_text()
    assert knn.count('class="scenario"') == 4
    rows = list(csv.reader(ln for ln in (d / "out" / "table.csv").read_text().splitlines() if not ln.startswith("#")))
    assert rows[0] == ["", "BS0", "BS1", "BS2", "R->R", "R->S", "S->S", "S->R"]
    assert len(rows) == 8


def test_optimize_then_evaluate(measured):
    d, cfg, _ = measured
    assert main(["optimize", "-c", str(cfg), "--workers", "1"]) == 0
    out = d / "out"
    for name in ("trace.csv", "optimized_stations.json", "optimize.json", "report.json"):
        assert (out / name).exists()
    opt = json.loads((out / "optimize.json").read_text())
    assert opt["best_score"] >= opt["base_score"]
    trace = [ln for ln in (out / "trace.csv").read_text().splitlines() if not ln.startswith("#")]
    assert trace[0] == "step,axis,value,objective,detail_json" and len(trace) == 1 + 6
    # truth is 60 degrees off the initial azimuths
    best = {s["id"]: s["azimuth"] for s in json.loads((out / "optimized_stations.json").read_text())}
    assert best == {"BS0": 60.0, "BS1": 180.0, "BS2": 300.0}
    assert main(["simulate", "-c", str(cfg), "--stations", str(out / "optimized_stations.json"),
                 "--out", str(out / "opt_sim.csv"), "--workers", "1"]) == 0
    assert main(["evaluate", "-c", str(cfg), "--sim", str(out / "opt_sim.csv"),
                 "--out", str(out / "opt_report.json")]) == 0
    rep = FidelityReport.load(out / "opt_report.json")
    assert rep.per_station_spearman == FidelityReport.load(out / "report.json").per_station_spearman
    assert main(["report", "-c", str(cfg), str(out / "optimize.json")]) == 0
    table = (out / "table.csv").read_text()
    assert "optimized configuration" in table and "60deg" in table


def test_overrides_drop_station(measured):
    d, cfg, _ = measured
    (d / "ov.json").write_text(json.dumps([{"station_id": "BS1", "action": "DROP"}]))
    assert main(["simulate", "-c", str(cfg), "--overrides", str(d / "ov.json"), "--workers", "1"]) == 0
    m = RssiMatrix.from_csv(d / "out" / "sim_rssi.csv", REAL)
    assert list(m.stations) == ["BS0", "BS2"]


def test_module_entry_point(project):
    d, cfg, _ = project
    r = subprocess.run([sys.executable, "-m", "urbanray", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "urbanray" in r.stdout
    r = subprocess.run([sys.executable, "-m", "urbanray", "sweep", "-c", str(cfg)], capture_output=True, text=True)
    assert r.returncode == 2 and "sweep" in r.stderr
