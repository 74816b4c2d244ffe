"""Measurement and device-registry ingestion.

Measurements are long-format CSV, one reading per row::

    ue_id,lat,lon,station_id,rssi_dbm

An empty ``rssi_dbm`` (or empty ``station_id``) registers the UE without a
reading.  Stations come from a JSON list of objects with ``id, lat, lon,
altitude`` and optional ``pattern, azimuth, tilt, roll, tx_power``.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
import os
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .antenna import AntennaConfig
from .devices import (DEFAULT_TX_POWER_DBM, DEFAULT_UE_ALTITUDE, StationConfig, UeConfig,
                      default_station_antenna)
from .geodesy import GeoPoint
from .propagation.rssi import REAL, RssiMatrix

log = logging.getLogger(__name__)

MEASUREMENT_COLUMNS = ("ue_id", "lat", "lon", "station_id", "rssi_dbm")
UE_COLUMNS = ("ue_id", "lat", "lon")
DEFAULT_FLOOR_DBM = -150.0

__all__ = [
    "Action",
    "CorrectionOverride",
    "DEFAULT_FLOOR_DBM",
    "DEFAULT_TX_POWER_DBM",
    "Measurements",
    "StationConfig",
    "UeConfig",
    "apply_corrections",
    "drop_stations",
    "fingerprint",
    "fingerprints",
    "load_measurements",
    "load_overrides",
    "load_stations",
    "load_ues",
    "save_stations",
]


class DataError(ValueError):
    """Malformed input file; message carries file and line/field context."""


class Action(str, enum.Enum):
    MOVE = "MOVE"
    DROP = "DROP"


@dataclass(frozen=True)
class CorrectionOverride:
    station_id: str
    action: Action
    corrected_position: GeoPoint | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "action", Action(str(self.action).upper().replace("ACTION.", "")))
        if self.action is Action.MOVE and self.corrected_position is None:
            raise ValueError(f"MOVE override for {self.station_id!r} needs a corrected position")


@dataclass
class Measurements:
    matrix: RssiMatrix
    ues: list[UeConfig]
    stations: list[StationConfig]


def load_stations(path: str | os.PathLike) -> list[StationConfig]:
    with open(path) as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        doc = doc.get("stations", [])
    out: list[StationConfig] = []
    seen = set()
    for i, item in enumerate(doc):
        try:
            st = StationConfig.from_dict(item)
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: station #{i}: {exc}") from None
        if st.id in seen:
            raise DataError(f"{path}: duplicate station id {st.id!r}")
        seen.add(st.id)
        out.append(st)
    return out


def save_stations(stations: Sequence[StationConfig], path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump([s.to_dict() for s in stations], fh, indent=2)
        fh.write("\n")


def load_overrides(path: str | os.PathLike) -> list[CorrectionOverride]:
    with open(path) as fh:
        doc = json.load(fh)
    out = []
    for i, item in enumerate(doc):
        try:
            action = Action(str(item.get("action", "MOVE")).upper())
            pos = None
            if action is Action.MOVE:
                pos = GeoPoint(float(item["lat"]), float(item["lon"]))
            out.append(CorrectionOverride(str(item["station_id"]), action, pos))
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: override #{i}: {exc}") from None
    return out


def _check_header(path, header, expected, optional=()):
    if header is None:
        raise DataError(f"{path}: empty file")
    cols = [h.strip() for h in header]
    unknown = [c for c in cols if c not in expected and c not in optional]
    if unknown:
        raise DataError(f"{path}: unknown column(s) {unknown}")
    missing = [c for c in expected if c not in cols]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}")
    return cols


def load_ues(path: str | os.PathLike, antenna: AntennaConfig | None = None) -> list[UeConfig]:
    """UE registry CSV: ``ue_id,lat,lon`` with an optional ``alt`` column."""
    antenna = antenna or AntennaConfig()
    out: list[UeConfig] = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.reader(ln for ln in fh if not ln.startswith("#"))
        cols = _check_header(path, next(reader, None), UE_COLUMNS, optional=("alt",))
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            rec = dict(zip(cols, row))
            uid = rec["ue_id"].strip()
            if uid in seen:
                raise DataError(f"{path}:{lineno}: duplicate ue_id {uid!r}")
            seen.add(uid)
            try:
                alt = float(rec["alt"]) if rec.get("alt", "").strip() else DEFAULT_UE_ALTITUDE
                pos = GeoPoint(float(rec["lat"]), float(rec["lon"]), alt)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            out.append(UeConfig(uid, pos, antenna))
    return out


def load_measurements(
    path: str | os.PathLike,
    stations: Sequence[StationConfig] | str | os.PathLike | None = None,
    ue_antenna: AntennaConfig | None = None,
) -> Measurements:
    """Parse a measurement CSV into a REAL matrix plus UE and station registries.

    Matrix rows follow the station registry order; columns follow first
    appearance of each UE in the file.  Without a registry, stations are
    listed in first-appearance order with a placeholder position at the
    first UE that reported them and default altitude 1 m.
    """
    if stations is not None and not isinstance(stations, (list, tuple)):
        stations = load_stations(stations)
    ue_antenna = ue_antenna or AntennaConfig()

    ue_ids: list[str] = []
    ue_pos: dict[str, GeoPoint] = {}
    station_ids: list[str] = []
    station_first_ue: dict[str, str] = {}
    readings: dict[tuple[str, str], float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(ln for ln in fh if not ln.startswith("#"))
        cols = _check_header(path, next(reader, None), MEASUREMENT_COLUMNS)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(cols):
                raise DataError(f"{path}:{lineno}: expected {len(cols)} fields, got {len(row)}")
            rec = dict(zip(cols, (c.strip() for c in row)))
            uid, sid = rec["ue_id"], rec["station_id"]
            if not uid:
                raise DataError(f"{path}:{lineno}: empty ue_id")
            try:
                pos = GeoPoint(float(rec["lat"]), float(rec["lon"]), DEFAULT_UE_ALTITUDE)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if uid not in ue_pos:
                ue_ids.append(uid)
                ue_pos[uid] = pos
            elif (ue_pos[uid].lat, ue_pos[uid].lon) != (pos.lat, pos.lon):
                raise DataError(f"{path}:{lineno}: ue {uid!r} reported at two different positions")
            if not sid:
                continue
            if sid not in station_first_ue:
                station_ids.append(sid)
                station_first_ue[sid] = uid
            if not rec["rssi_dbm"]:
                continue
            if (sid, uid) in readings:
                raise DataError(f"{path}:{lineno}: duplicate reading for station {sid!r}, ue {uid!r}")
            try:
                v = float(rec["rssi_dbm"])
            except ValueError:
                raise DataError(f"{path}:{lineno}: rssi_dbm is not a number: {rec['rssi_dbm']!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}:{lineno}: rssi_dbm must be finite")
            readings[(sid, uid)] = v

    if stations is None:
        stations = [StationConfig(s, ue_pos[station_first_ue[s]], 1.0, default_station_antenna(), DEFAULT_TX_POWER_DBM)
                    for s in station_ids]
    registry = {s.id for s in stations}
    unknown = [s for s in station_ids if s not in registry]
    if unknown:
        raise DataError(f"{path}: station ids not in the station registry: {unknown}")

    values = np.full((len(stations), len(ue_ids)), np.nan)
    col = {u: j for j, u in enumerate(ue_ids)}
    row = {s.id: i for i, s in enumerate(stations)}
    for (sid, uid), v in readings.items():
        values[row[sid], col[uid]] = v
    matrix = RssiMatrix([s.id for s in stations], ue_ids, values, REAL)
    ues = [UeConfig(u, ue_pos[u], ue_antenna) for u in ue_ids]
    return Measurements(matrix, ues, list(stations))


def apply_corrections(stations: Sequence[StationConfig], overrides: Iterable[CorrectionOverride]) -> list[StationConfig]:
    """Apply MOVE/DROP overrides.

    MOVE on an unknown id raises ``KeyError``.  DROP of an id that is already
    absent is a no-op, which keeps repeated application idempotent.
    """
    overrides = list(overrides)
    ids = {s.id for s in stations}
    for ov in overrides:
        if ov.action is Action.MOVE and ov.station_id not in ids:
            raise KeyError(f"override for unknown station id {ov.station_id!r}")
        if ov.action is Action.DROP and ov.station_id not in ids:
            log.info("DROP override for absent station %r ignored", ov.station_id)
    dropped = {ov.station_id for ov in overrides if ov.action is Action.DROP}
    moves = {ov.station_id: ov.corrected_position for ov in overrides if ov.action is Action.MOVE}
    out = []
    for s in stations:
        if s.id in dropped:
            continue
        if s.id in moves:
            p = moves[s.id]
            s = replace(s, position=GeoPoint(p.lat, p.lon, s.position.alt))
        out.append(s)
    return out


def drop_stations(matrix: RssiMatrix, stations: Sequence[StationConfig]) -> RssiMatrix:
    """Restrict ``matrix`` rows to the given station registry, in its order."""
    return matrix.select(stations=[s.id for s in stations])


def fingerprint(matrix: RssiMatrix, ue_id: str, floor_dbm: float = DEFAULT_FLOOR_DBM) -> np.ndarray:
    """Station-ordered RSSI vector of one UE with missing readings set to ``floor_dbm``."""
    v = matrix.column(ue_id)
    return np.where(np.isnan(v), floor_dbm, v)


def fingerprints(matrix: RssiMatrix, ue_ids: Sequence[str] | None = None,
                 floor_dbm: float = DEFAULT_FLOOR_DBM) -> np.ndarray:
    """``(len(ue_ids), M)`` fingerprint array."""
    sub = matrix if ue_ids is None else matrix.select(ues=ue_ids)
    return np.where(np.isnan(sub.values), floor_dbm, sub.values).T.copy()
