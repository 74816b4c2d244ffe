"""Received-power matrices and their simulation."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from ..antenna import gain_dbi
from ..devices import StationConfig, UeConfig
from ..scene import Scene
from .config import SolverConfig
from .solver import cached_trace, derive_seed, link_paths

REAL = "REAL"
SIM = "SIM"
WORKERS_ENV = "URBANRAY_WORKERS"
CSV_HEADER = ("station_id", "ue_id", "rssi_dbm")


class RssiMatrix:
    """Stations x UEs received power in dBm; ``NaN`` marks a missing value."""

    def __init__(self, stations: Sequence[str], ues: Sequence[str], values, source: str):
        self.stations = tuple(str(s) for s in stations)
        self.ues = tuple(str(u) for u in ues)
        self.values = np.array(values, dtype=float).reshape(len(self.stations), len(self.ues))
        if source not in (REAL, SIM):
            raise ValueError(f"source must be REAL or SIM, got {source!r}")
        self.source = source
        if len(set(self.stations)) != len(self.stations):
            raise ValueError("duplicate station ids")
        if len(set(self.ues)) != len(self.ues):
            raise ValueError("duplicate UE ids")
        if np.isinf(self.values).any():
            raise ValueError("RSSI values must be finite or missing")
        self._srow = {s: i for i, s in enumerate(self.stations)}
        self._ucol = {u: j for j, u in enumerate(self.ues)}

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, RssiMatrix):
            return NotImplemented
        return (self.stations == other.stations and self.ues == other.ues and self.source == other.source
                and np.array_equal(self.values, other.values, equal_nan=True))

    def __repr__(self) -> str:
        return f"RssiMatrix({self.source}, {len(self.stations)}x{len(self.ues)}, missing={self.n_missing})"

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.values).sum())

    def get(self, station: str, ue: str) -> float | None:
        v = self.values[self._srow[station], self._ucol[ue]]
        return None if math.isnan(v) else float(v)

    def row(self, station: str) -> np.ndarray:
        return self.values[self._srow[station]].copy()

    def column(self, ue: str) -> np.ndarray:
        if ue not in self._ucol:
            raise KeyError(f"unknown UE id {ue!r}")
        return self.values[:, self._ucol[ue]].copy()

    def select(self, stations: Sequence[str] | None = None, ues: Sequence[str] | None = None) -> "RssiMatrix":
        stations = self.stations if stations is None else tuple(stations)
        ues = self.ues if ues is None else tuple(ues)
        missing = [s for s in stations if s not in self._srow] + [u for u in ues if u not in self._ucol]
        if missing:
            raise KeyError(f"unknown ids: {missing}")
        r = [self._srow[s] for s in stations]
        c = [self._ucol[u] for u in ues]
        return RssiMatrix(stations, ues, self.values[np.ix_(r, c)], self.source)

    def with_source(self, source: str) -> "RssiMatrix":
        return RssiMatrix(self.stations, self.ues, self.values, source)

    # --------------------------------------------------------------- CSV

    def to_csv_text(self, comments: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in comments:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, s in enumerate(self.stations):
            for j, u in enumerate(self.ues):
                v = self.values[i, j]
                w.writerow((s, u, "" if math.isnan(v) else repr(float(v))))
        return buf.getvalue()

    def to_csv(self, path: str | os.PathLike, comments: Sequence[str] = ()) -> None:
        Path(path).write_text(self.to_csv_text(comments))

    @classmethod
    def from_csv(cls, path: str | os.PathLike, source: str = SIM) -> "RssiMatrix":
        """Parse the long ``station_id,ue_id,rssi_dbm`` format; ``#`` lines are skipped."""
        stations: list[str] = []
        ues: list[str] = []
        seen_s: set[str] = set()
        seen_u: set[str] = set()
        cells: dict[tuple[str, str], float] = {}
        with open(path, newline="") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        reader = csv.reader(lines)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            s, u, v = row
            if (s, u) in cells:
                raise ValueError(f"{path}:{lineno}: duplicate pair ({s}, {u})")
            if s not in seen_s:
                seen_s.add(s)
                stations.append(s)
            if u not in seen_u:
                seen_u.add(u)
                ues.append(u)
            cells[(s, u)] = float(v) if v.strip() else math.nan
        values = np.full((len(stations), len(ues)), np.nan)
        si = {s: i for i, s in enumerate(stations)}
        ui = {u: j for j, u in enumerate(ues)}
        for (s, u), v in cells.items():
            values[si[s], ui[u]] = v
        return cls(stations, ues, values, source)


# ------------------------------------------------------------- simulation


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV, "").strip()
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


def incoherent_sum_dbm(dbm) -> float:
    """Power sum of per-path received powers given in dBm."""
    dbm = np.asarray(dbm, dtype=float)
    peak = float(dbm.max())
    return peak + 10.0 * math.log10(float(np.sum(10.0 ** ((dbm - peak) / 10.0))))


def _station_row(args) -> np.ndarray:
    scene, station, tx, ue_enu, ue_antennas, cfg, seed = args
    trace = cached_trace(scene, tx, cfg, seed)
    out = np.full(len(ue_enu), np.nan)
    for j, rx in enumerate(ue_enu):
        lp = link_paths(scene, trace, rx, cfg)
        if len(lp) == 0:
            continue
        gt = gain_dbi(station.antenna, lp.departure)
        gr = gain_dbi(ue_antennas[j], lp.arrival)
        out[j] = incoherent_sum_dbm(station.tx_power + gt + gr + lp.gain_db)
    return out


def simulate_station(scene: Scene, station: StationConfig, ues: Sequence[UeConfig], cfg: SolverConfig,
                     seed: int) -> np.ndarray:
    """One row of the SIM matrix; the random stream depends only on (seed, station id)."""
    tx = station.enu(scene.origin)
    ue_enu = [u.enu(scene.origin) for u in ues]
    return _station_row((scene, station, tx, ue_enu, [u.antenna for u in ues], cfg, derive_seed(seed, station.id)))


def simulate_rssi(scene: Scene, stations: Sequence[StationConfig], ues: Sequence[UeConfig], cfg: SolverConfig,
                  seed: int, workers: int | None = None) -> RssiMatrix:
    """SIM matrix over every station/UE pair, incoherent sum over paths."""
    if not stations or not ues:
        raise ValueError("need at least one station and one UE")
    workers = default_workers() if workers is None else int(workers)
    ue_enu = [u.enu(scene.origin) for u in ues]
    ue_ant = [u.antenna for u in ues]
    jobs = [(scene, s, s.enu(scene.origin), ue_enu, ue_ant, cfg, derive_seed(seed, s.id)) for s in stations]
    if workers <= 1 or len(jobs) == 1:
        rows = [_station_row(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_station_row, jobs))
    return RssiMatrix([s.id for s in stations], [u.id for u in ues], np.vstack(rows), SIM)
