"""Writes a small on-disk project (footprints, stations, UEs, measurements) for CLI runs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from helpers import ORIGIN, geo

ROWS = [("b0", 0, 0, 30, 20, 4), ("b1", 80, 60, 30, 30, 3), ("b2", -90, 40, 25, 40, 6),
        ("b3", 60, -90, 40, 20, 2), ("b4", -60, -80, 20, 20, None)]


def rect(cx, cy, wx, wy):
    pts = [(cx - wx / 2, cy - wy / 2), (cx + wx / 2, cy - wy / 2), (cx + wx / 2, cy + wy / 2),
           (cx - wx / 2, cy + wy / 2)]
    ring = [[geo(x, y).lon, geo(x, y).lat] for x, y in pts]
    return ring + [ring[0]]


def feature(fid, ring, floors=None):
    props = {} if floors is None else {"building:levels": floors}
    return {"type": "Feature", "id": fid, "properties": props,
            "geometry": {"type": "Polygon", "coordinates": [ring]}}


def write_footprints(path: Path, rows=ROWS, bad=False) -> Path:
    feats = [feature(fid, rect(cx, cy, wx, wy), fl) for fid, cx, cy, wx, wy, fl in rows]
    if bad:
        # bow-tie ring
        a, b, c, d = geo(200, 200), geo(230, 230), geo(230, 200), geo(200, 230)
        feats.append(feature("bowtie", [[p.lon, p.lat] for p in (a, b, c, d, a)]))
    path.write_text(json.dumps({"type": "FeatureCollection", "features": feats}))
    return path


def write_stations(path: Path, stations) -> Path:
    """``stations``: iterable of (id, x, y, altitude, extra-dict)."""
    doc = []
    for sid, x, y, alt, extra in stations:
        p = geo(x, y)
        doc.append({"id": sid, "lat": p.lat, "lon": p.lon, "altitude": alt, **extra})
    path.write_text(json.dumps(doc))
    return path


def ue_points(n: int, seed: int = 1, extent: float = 200.0):
    rng = np.random.default_rng(seed)
    return [(f"ue{i:03d}", *rng.uniform(-extent, extent, 2)) for i in range(n)]


def write_ues(path: Path, ues) -> Path:
    lines = ["ue_id,lat,lon"] + [f"{u},{geo(x, y).lat!r},{geo(x, y).lon!r}" for u, x, y in ues]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_measurements(path: Path, ues, sim_csv: Path, noise_db: float = 0.0, seed: int = 2) -> Path:
    """Long-format measurement CSV built from a simulated RSSI CSV plus optional noise."""
    rng = np.random.default_rng(seed)
    pos = {u: geo(x, y) for u, x, y in ues}
    lines = ["ue_id,lat,lon,station_id,rssi_dbm"]
    for ln in sim_csv.read_text().splitlines():
        if ln.startswith("#") or ln.startswith("station_id"):
            continue
        sid, uid, v = ln.split(",")
        val = "" if v == "" else repr(float(v) + rng.normal(0, noise_db))
        lines.append(f"{uid},{pos[uid].lat!r},{pos[uid].lon!r},{sid},{val}")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_config(path: Path, **fields) -> Path:
    doc = {"origin": {"lat": ORIGIN.lat, "lon": ORIGIN.lon}, "output_dir": "out", **fields}
    path.write_text(json.dumps(doc, indent=1))
    return path
