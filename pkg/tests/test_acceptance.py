"""Acceptance suite.

Tier 1 runs everywhere with synthetic data.  Tier 2 needs the Rome
measurement export: point ``URBANRAY_ROME_DIR`` at a directory holding
``footprints.geojson``, ``measurements.csv``, ``stations.json`` and
optionally ``overrides.json``.  Every criterion is reported as one
PASS/FAIL/SKIP line in the terminal summary.
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from cli_project import ue_points, write_config, write_footprints, write_stations, write_ues
from helpers import ORIGIN, planted_azimuth_experiment, random_boxes, station, synthetic_experiment, ue
from urbanray.antenna import AntennaConfig, Orientation, Pattern, gain_dbi, pattern_gain
from urbanray.bvh import brute_force_first_hits
from urbanray.cli import main
from urbanray.evaluation import average_ranks, evaluate, knn_localize, make_split, spearman
from urbanray.optimizer import Objective, Scope, SweepAxis, Target, greedy_optimize
from urbanray.propagation import PathKind, SolverConfig, simulate_rssi, simulate_station, solve_paths
from urbanray.propagation.rssi import REAL, SIM, RssiMatrix
from urbanray.scene import build_scene

criterion = pytest.mark.criterion


# ------------------------------------------------------------------ tier 1


@criterion(1, "FSPL oracle on 100 random (d, f) pairs within 0.01 dB, < 1 s")
def test_c01_fspl_oracle():
    rng = np.random.default_rng(101)
    scene = build_scene([], ORIGIN, ground=False)
    tr = AntennaConfig(Pattern.TR38901, Orientation(30.0, -5.0))
    hw = AntennaConfig(Pattern.HW_DIPOLE)
    cfgs = {}
    worst = 0.0
    t0 = time.perf_counter()
    for i in range(100):
        d_h = rng.uniform(5.0, 2000.0)
        f = float(rng.uniform(0.4e9, 6e9))
        bearing = rng.uniform(0, 2 * math.pi)
        p_tx = rng.uniform(20.0, 46.0)
        bs = station("bs", 0.0, 0.0, 25.0, tr, tx_power=p_tx)
        u = ue("u", d_h * math.cos(bearing), d_h * math.sin(bearing), antenna=hw)
        cfg = cfgs.setdefault(f, SolverConfig(frequency=f, samples_per_src=64))
        (got,) = simulate_station(scene, bs, [u], cfg, seed=i)
        v = u.enu(ORIGIN) - bs.enu(ORIGIN)
        want = p_tx + gain_dbi(tr, v) + gain_dbi(hw, -v) - oracles.fspl_db(float(np.linalg.norm(v)), f)
        worst = max(worst, abs(got - want))
    elapsed = time.perf_counter() - t0
    assert worst < 0.01
    assert elapsed < 1.0


@criterion(2, "two-ray geometry within 1 mm and budget within 0.1 dB on 50 heights, < 5 s")
def test_c02_two_ray_oracle():
    rng = np.random.default_rng(202)
    cfg = SolverConfig(specular_reflection=True, diffuse_reflection=False, refraction=False, max_depth=1)
    scene = build_scene([], ORIGIN, cover=[[-1000, -1000, 0], [1000, 1000, 0]])
    t0 = time.perf_counter()
    for i in range(50):
        h_tx, h_rx = rng.uniform(2.0, 60.0), rng.uniform(1.0, 10.0)
        d = rng.uniform(20.0, 800.0)
        paths = solve_paths(scene, [0.0, 0.0, h_tx], [d, 0.0, h_rx], cfg, seed=i)
        assert sorted(p.kind for p in paths) == [PathKind.LOS, PathKind.SPECULAR]
        o = oracles.two_ray(h_tx, h_rx, d, cfg.frequency)
        ref = next(p for p in paths if p.kind is PathKind.SPECULAR)
        assert np.linalg.norm(ref.vertices[1] - [o["reflection_x"], 0.0, 0.0]) < 1e-3
        budget = 10 * math.log10(sum(10 ** (p.path_gain_db / 10) for p in paths))
        assert abs(budget - o["total"]) < 0.1
    assert time.perf_counter() - t0 < 5.0


@pytest.mark.parametrize("backend", ["compiled", "python"])
@criterion(3, "indexed first_hit identical to brute force on 1000 rays over 20 scenes, < 30 s")
def test_c03_index_vs_brute_force(backend):
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    hits = 0
    for _ in range(20):
        scene = build_scene(random_boxes(rng, int(rng.integers(1, 51)), 300.0), ORIGIN)
        idx = scene.index.with_backend(backend)
        o = np.column_stack([rng.uniform(-320, 320, (50, 2)), rng.uniform(0.5, 40.0, 50)])
        # aim at random points inside the built volume so most rays meet geometry
        target = np.column_stack([rng.uniform(-300, 300, (50, 2)), rng.uniform(0.0, 30.0, 50)])
        d = target - o
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        t, tri = idx.first_hits(o, d, np.inf, scene.epsilon)
        bt, btri = brute_force_first_hits(scene.triangles, o, d, np.full(50, np.inf), scene.epsilon)
        assert np.array_equal(tri, btri)
        assert np.array_equal(t, bt)
        hits += int((tri >= 0).sum())
    assert hits > 500
    assert time.perf_counter() - t0 < 30.0


def _sphere_mean(pattern, n=1500):
    theta = (np.arange(n) + 0.5) * math.pi / n
    phi = (np.arange(2 * n) + 0.5) * math.pi / n - math.pi
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    return float((pattern_gain(pattern, th, ph) * np.sin(th)).sum() * (math.pi / n) ** 2 / (4 * math.pi))


@criterion(4, "pattern normalization within 0.5 %, TR38901 boresight 8 dBi, HW_DIPOLE 2.15 dBi")
def test_c04_pattern_normalization():
    iso = _sphere_mean(Pattern.ISO)
    for p in (Pattern.DIPOLE, Pattern.HW_DIPOLE):
        assert abs(_sphere_mean(p) / iso - 1.0) < 5e-3
    assert gain_dbi(AntennaConfig(Pattern.TR38901), [1.0, 0.0, 0.0]) == 8.0
    assert abs(gain_dbi(AntennaConfig(Pattern.HW_DIPOLE), [1.0, 0.0, 0.0]) - 2.15) <= 0.01


@criterion(5, "Spearman examples and 1000 tied random vectors vs brute force to 1e-12")
def test_c05_spearman():
    assert spearman([3.0, 1.0, 2.0, 7.0], [3.0, 1.0, 2.0, 7.0]) == 1.0
    assert spearman([1, 2, 3], [3, 2, 1]) == -1.0
    assert abs(spearman([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]) - 0.8) < 1e-12
    rng = np.random.default_rng(505)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 30))
        x = rng.integers(0, max(2, n // 2), n).astype(float)
        y = rng.integers(0, max(2, n // 3), n).astype(float)
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        worst = max(worst, abs(spearman(x, y) - oracles.brute_spearman(x, y)))
    assert worst <= 1e-12
    assert np.array_equal(average_ranks([5.0, 1.0, 5.0, 3.0]), [3.5, 1.0, 3.5, 2.0])


@criterion(6, "kNN shift invariance, k=1 self-match, RS/SR swap symmetry")
def test_c06_knn_invariances():
    rng = np.random.default_rng(606)
    for trial in range(50):
        train = np.round(rng.uniform(-120, -40, (30, 5)) * 4) / 4
        test = np.round(rng.uniform(-120, -40, (8, 5)) * 4) / 4
        xy = rng.uniform(-400, 400, (30, 2))
        ids = [f"u{i:02d}" for i in range(30)]
        shift = float(rng.integers(-30, 31))
        k = int(rng.integers(1, 11))
        a = knn_localize(train, xy, test, k=k, train_ids=ids)
        assert np.array_equal(a, knn_localize(train + shift, xy, test + shift, k=k, train_ids=ids))
        assert np.array_equal(knn_localize(train, xy, train, k=1, train_ids=ids), xy)

        stations = [f"BS{i}" for i in range(4)]
        ues = [f"u{j:03d}" for j in range(40)]
        real = RssiMatrix(stations, ues, rng.uniform(-120, -50, (4, 40)), REAL)
        sim = RssiMatrix(stations, ues, rng.uniform(-120, -50, (4, 40)), SIM)
        pos = {u: tuple(rng.uniform(-300, 300, 2)) for u in ues}
        split = make_split(ues, trial)
        r1 = evaluate(real, sim, split, pos, k=5)
        r2 = evaluate(sim.with_source(REAL), real.with_source(SIM), split, pos, k=5)
        assert (r1.knn_errors["RS"], r1.knn_errors["SR"]) == (r2.knn_errors["SR"], r2.knn_errors["RS"])


@criterion(7, "simulate byte-identical across worker counts, 3 stations x 100 UEs, < 2 min")
def test_c07_determinism(tmp_path):
    write_footprints(tmp_path / "fp.geojson")
    write_stations(tmp_path / "st.json", [("BS0", -100, 120, 25.0, {"pattern": "tr38901", "azimuth": 0}),
                                          ("BS1", 120, 100, 30.0, {"pattern": "tr38901", "azimuth": 120}),
                                          ("BS2", 0, -150, 20.0, {"pattern": "iso"})])
    write_ues(tmp_path / "ues.csv", ue_points(100, seed=7))
    cfg = write_config(tmp_path / "run.json", footprints="fp.geojson", stations="st.json", ues="ues.csv",
                       seed=11, solver={"samples_per_src": 20000})
    t0 = time.perf_counter()
    blobs = []
    for i, workers in enumerate(("1", "3", "1")):
        out = tmp_path / f"sim{i}.csv"
        assert main(["simulate", "-c", str(cfg), "--workers", workers, "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]
    assert len([ln for ln in blobs[0].decode().splitlines() if ln.startswith("BS")]) == 300
    assert time.perf_counter() - t0 < 120.0


@criterion(8, "greedy never degrades on 20 random scenes and finds the planted azimuth")
def test_c08_greedy_ascent():
    axes = [SweepAxis(Target.BS_ALTITUDE, (15.0, 30.0, 45.0), Scope.PER_STATION),
            SweepAxis(Target.BS_AZIMUTH, tuple(range(0, 360, 60)), Scope.PER_STATION)]
    for seed in range(20):
        exp, base, _ = synthetic_experiment(seed, n_stations=2, n_ues=40, n_buildings=5, samples=800)
        res = greedy_optimize(axes, base, exp)
        assert res.best_score >= res.base_score
        for s in base.stations:
            assert res.best_report.station_score(s.id) >= res.base_report.station_score(s.id)
        glob = greedy_optimize([SweepAxis(Target.BS_ALTITUDE, (15.0, 30.0, 45.0))], base, exp,
                               Objective.MEAN_SPEARMAN)
        assert glob.best_score >= glob.base_score

    exp, base = planted_azimuth_experiment(120.0)
    axis = SweepAxis(Target.BS_AZIMUTH, tuple(float(a) for a in range(0, 360, 30)), Scope.PER_STATION)
    exhaustive = [exp.evaluate(base.apply(axis, v)).station_score("BS0") for v in axis.values]
    assert axis.values[int(np.argmax(exhaustive))] == 120.0
    res = greedy_optimize([axis], base, exp)
    assert res.best.stations[0].antenna.orientation.azimuth == 120.0


@criterion(9, "free-space Spearman(sim RSSI, -distance) = 1 with ISO antennas")
def test_c09_free_space_monotonicity():
    rng = np.random.default_rng(909)
    scene = build_scene([], ORIGIN, ground=False)
    ues = [ue(f"u{i:03d}", *rng.uniform(-800, 800, 2)) for i in range(100)]
    sts = [station(f"BS{i}", *rng.uniform(-300, 300, 2), float(rng.uniform(10, 50))) for i in range(3)]
    m = simulate_rssi(scene, sts, ues, SolverConfig(samples_per_src=500), seed=0, workers=1)
    for s in sts:
        dist = [np.linalg.norm(u.enu(ORIGIN) - s.enu(ORIGIN)) for u in ues]
        assert spearman(m.row(s.id), -np.asarray(dist)) == 1.0


# ------------------------------------------------------------------ tier 2

ROME = os.environ.get("URBANRAY_ROME_DIR")
rome = pytest.mark.skipif(not ROME, reason="URBANRAY_ROME_DIR not set")
ALTITUDES = (11.0, 12.0, 15.0, 20.0, 35.0, 40.0, 55.0)
AZIMUTHS = tuple(float(a) for a in range(0, 360, 30))


@pytest.fixture(scope="module")
def rome_exp():
    from urbanray.config import RunConfig
    from urbanray.cli import _experiment

    d = Path(ROME)
    doc = {"footprints": "footprints.geojson", "measurements": "measurements.csv", "stations": "stations.json",
           "solver": {"samples_per_src": int(os.environ.get("URBANRAY_ROME_SAMPLES", 100_000))}, "seed": 0}
    if (d / "overrides.json").exists():
        doc["overrides"] = "overrides.json"
    rc = RunConfig.from_dict(doc, base_dir=d)

    class Args:
        workers = None

    exp, base = _experiment(rc, Args)
    base = base.apply(SweepAxis(Target.BS_ALTITUDE, (11.0,)), 11.0)
    base = base.apply(SweepAxis(Target.BS_AZIMUTH, (0.0,)), 0.0)
    return exp, base


@pytest.fixture(scope="module")
def rome_greedy(rome_exp):
    exp, base = rome_exp
    axes = [SweepAxis(Target.BS_ALTITUDE, ALTITUDES, Scope.PER_STATION),
            SweepAxis(Target.BS_AZIMUTH, AZIMUTHS, Scope.PER_STATION)]
    return greedy_optimize(axes, base, exp)


@rome
@pytest.mark.rome
@pytest.mark.slow
@criterion(10, "Rome R->R kNN mean error within 15 % of 118.32 m")
def test_c10_rome_rr(rome_exp):
    exp, base = rome_exp
    rep = exp.evaluate(base)
    assert abs(rep.knn_errors["RR"] / 118.32 - 1.0) <= 0.15


@rome
@pytest.mark.rome
@pytest.mark.slow
@criterion(11, "Rome mean Spearman at 40 m exceeds 11 m")
def test_c11_rome_altitude(rome_exp):
    exp, base = rome_exp
    axis = SweepAxis(Target.BS_ALTITUDE, (11.0, 40.0))
    lo, hi = (exp.evaluate(base.apply(axis, v)).mean_spearman for v in axis.values)
    assert hi > lo


@rome
@pytest.mark.rome
@pytest.mark.slow
@criterion(12, "Rome mean Spearman at 1.2 GHz at least that at 3.6 GHz")
def test_c12_rome_frequency(rome_exp):
    exp, base = rome_exp
    axis = SweepAxis(Target.FREQUENCY, (1.2e9, 3.6e9))
    low_f, high_f = (exp.evaluate(base.apply(axis, v)).mean_spearman for v in axis.values)
    assert low_f >= high_f


@rome
@pytest.mark.rome
@pytest.mark.slow
@criterion(13, "Rome greedy improves >= 4 of 6 stations and the mean Spearman")
def test_c13_rome_greedy(rome_greedy):
    res = rome_greedy
    ids = [s.id for s in res.best.stations]
    improved = sum(res.best_report.station_score(s) > res.base_report.station_score(s) for s in ids)
    assert improved >= min(4, len(ids))
    assert res.best_report.mean_spearman > res.base_report.mean_spearman


@rome
@pytest.mark.rome
@pytest.mark.slow
@criterion(14, "Rome S->R kNN error drops by >= 15 % after optimization")
def test_c14_rome_sr(rome_greedy):
    res = rome_greedy
    before, after = res.base_report.knn_errors["SR"], res.best_report.knn_errors["SR"]
    assert after <= 0.85 * before, json.dumps({"before": before, "after": after})


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
