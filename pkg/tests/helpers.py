"""Small builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from urbanray.antenna import AntennaConfig, Orientation, Pattern
from urbanray.devices import StationConfig, UeConfig
from urbanray.geodesy import EnuPoint, GeoPoint, to_geo
from urbanray.scene import Footprint

ORIGIN = GeoPoint(41.9, 12.5)
ISO = AntennaConfig(Pattern.ISO, Orientation())


def geo(x: float, y: float, alt: float = 0.0, origin: GeoPoint = ORIGIN) -> GeoPoint:
    return to_geo(EnuPoint(x, y, alt), origin)


def box(fid: str, cx: float, cy: float, wx: float, wy: float, floors=None, origin: GeoPoint = ORIGIN) -> Footprint:
    """Axis-aligned rectangular footprint centred at ENU (cx, cy)."""
    corners = [(cx - wx / 2, cy - wy / 2), (cx + wx / 2, cy - wy / 2), (cx + wx / 2, cy + wy / 2),
               (cx - wx / 2, cy + wy / 2)]
    return Footprint(fid, [geo(x, y, 0.0, origin) for x, y in corners], floors)


def random_boxes(rng: np.random.Generator, n: int, extent: float = 300.0) -> list[Footprint]:
    return [box(f"b{i}", *rng.uniform(-extent, extent, 2), *rng.uniform(5, 40, 2), floors=int(rng.integers(1, 8)))
            for i in range(n)]


def station(sid: str, x: float, y: float, alt: float = 20.0, antenna: AntennaConfig = ISO, tx_power=43.0):
    return StationConfig(sid, geo(x, y), alt, antenna, tx_power)


def ue(uid: str, x: float, y: float, alt: float = 1.5, antenna: AntennaConfig = ISO):
    return UeConfig(uid, geo(x, y, alt), antenna)


def synthetic_experiment(seed: int, n_stations: int = 3, n_ues: int = 60, n_buildings: int = 6,
                         samples: int = 2000, noise_db: float = 4.0, k: int = 5):
    """Scene, base candidate and experiment whose REAL data come from a perturbed simulation."""
    from urbanray.evaluation import make_split
    from urbanray.optimizer import Candidate, Experiment
    from urbanray.propagation import REAL, SolverConfig, simulate_rssi
    from urbanray.scene import build_scene

    rng = np.random.default_rng(seed)
    ues = [ue(f"u{i:03d}", *rng.uniform(-250, 250, 2)) for i in range(n_ues)]
    tr = AntennaConfig(Pattern.TR38901, Orientation(0.0, -5.0))
    sts = [station(f"BS{i}", *rng.uniform(-200, 200, 2), 15.0, tr) for i in range(n_stations)]
    scene = build_scene(random_boxes(rng, n_buildings, 220.0), ORIGIN,
                        cover=[u.position for u in ues] + [s.position for s in sts])
    cfg = SolverConfig(samples_per_src=samples)
    truth = [s.with_altitude(float(rng.choice([15.0, 30.0, 45.0]))).with_antenna(
        azimuth=float(rng.choice(np.arange(0, 360, 60)))) for s in sts]
    real = simulate_rssi(scene, truth, ues, cfg, seed + 1000, workers=1)
    real = real.with_source(REAL)
    real.values[:] = real.values + rng.normal(0.0, noise_db, real.values.shape)
    xy = {u.id: tuple(u.enu(ORIGIN)[:2]) for u in ues}
    exp = Experiment(scene, real, make_split([u.id for u in ues], seed), xy, seed, k=k, workers=1)
    return exp, Candidate(tuple(sts), tuple(ues), cfg), truth


def planted_azimuth_experiment(azimuth: float = 120.0, n_cluster: int = 25, seed: int = 0):
    """One TR 38.901 station in free space; REAL data simulated at ``azimuth``.

    Half the UEs sit in a tight cluster along the planted boresight, the
    rest are scattered so that ranks constrain the pointing direction.
    """
    from urbanray.evaluation import make_split
    from urbanray.optimizer import Candidate, Experiment
    from urbanray.propagation import REAL, SolverConfig, simulate_rssi
    from urbanray.scene import build_scene

    rng = np.random.default_rng(seed)
    b = np.radians(azimuth)
    centre = 150.0 * np.array([np.cos(b), np.sin(b)])
    ues = [ue(f"c{i:02d}", *(centre + rng.normal(0, 15, 2))) for i in range(n_cluster)]
    ues += [ue(f"s{i:02d}", *rng.uniform(-250, 250, 2)) for i in range(n_cluster)]
    bs = station("BS0", 0.0, 0.0, 25.0, AntennaConfig(Pattern.TR38901, Orientation(0.0, -5.0)))
    scene = build_scene([], ORIGIN, ground=False)
    cfg = SolverConfig(samples_per_src=200)
    real = simulate_rssi(scene, [bs.with_antenna(azimuth=azimuth)], ues, cfg, seed, workers=1).with_source(REAL)
    xy = {u.id: tuple(u.enu(ORIGIN)[:2]) for u in ues}
    exp = Experiment(scene, real, make_split([u.id for u in ues], seed), xy, seed, k=3, workers=1)
    return exp, Candidate((bs,), tuple(ues), cfg)
