"""Parameter sweeps and single-pass greedy coordinate ascent."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import threading
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .antenna import AntennaConfig, Orientation, Pattern
from .dataset import DEFAULT_FLOOR_DBM
from .devices import StationConfig, UeConfig
from .evaluation import DEFAULT_K, FidelityReport, Split, evaluate
from .propagation.config import SolverConfig
from .propagation.rssi import SIM, RssiMatrix, simulate_rssi
from .scene import Scene

TRACE_HEADER = ("step", "axis", "value", "objective", "detail_json")


class Target(str, enum.Enum):
    BS_ALTITUDE = "BS_ALTITUDE"
    BS_AZIMUTH = "BS_AZIMUTH"
    BS_PATTERN = "BS_PATTERN"
    UE_PATTERN = "UE_PATTERN"
    UE_AZIMUTH = "UE_AZIMUTH"
    FREQUENCY = "FREQUENCY"
    SOLVER_FIELD = "SOLVER_FIELD"


class Scope(str, enum.Enum):
    GLOBAL = "GLOBAL"
    PER_STATION = "PER_STATION"


class Objective(str, enum.Enum):
    MEAN_SPEARMAN = "MEAN_SPEARMAN"
    PER_STATION_SPEARMAN = "PER_STATION_SPEARMAN"
    KNN_SR_ERROR = "KNN_SR_ERROR"

    def score(self, report: FidelityReport) -> float:
        """Higher is better; undefined correlations score ``-inf``."""
        if self is Objective.KNN_SR_ERROR:
            return -report.knn_errors["SR"]
        m = report.mean_spearman
        return -math.inf if math.isnan(m) else m


_STATION_TARGETS = {Target.BS_ALTITUDE, Target.BS_AZIMUTH, Target.BS_PATTERN}


@dataclass(frozen=True)
class SweepAxis:
    target: Target
    values: tuple
    scope: Scope = Scope.GLOBAL
    field_name: str | None = None  # SOLVER_FIELD only

    def __post_init__(self) -> None:
        object.__setattr__(self, "target", Target(self.target))
        object.__setattr__(self, "scope", Scope(self.scope))
        vals = tuple(self._coerce(v) for v in self.values)
        if not vals:
            raise ValueError("axis values must be non-empty")
        if len(set(vals)) != len(vals):
            raise ValueError(f"axis values must be distinct: {vals}")
        object.__setattr__(self, "values", vals)
        if self.target is Target.SOLVER_FIELD:
            if not self.field_name:
                raise ValueError("SOLVER_FIELD axis needs field_name")
            if self.field_name not in {f.name for f in fields(SolverConfig)}:
                raise ValueError(f"unknown solver field {self.field_name!r}")
        elif self.field_name is not None:
            raise ValueError("field_name is only meaningful for SOLVER_FIELD axes")
        if self.scope is Scope.PER_STATION and self.target not in _STATION_TARGETS:
            raise ValueError(f"{self.target.value} cannot be swept per station")

    def _coerce(self, v):
        t = Target(self.target)
        if t in (Target.BS_PATTERN, Target.UE_PATTERN):
            return Pattern.parse(v)
        if t is Target.BS_ALTITUDE:
            v = float(v)
            if not v > 0:
                raise ValueError("altitude values must be positive")
            return v
        if t in (Target.BS_AZIMUTH, Target.UE_AZIMUTH, Target.FREQUENCY):
            v = float(v)
            if not math.isfinite(v):
                raise ValueError("axis values must be finite")
            if t is Target.FREQUENCY and not v > 0:
                raise ValueError("frequency values must be positive")
            return v
        return v

    @property
    def label(self) -> str:
        name = f"SOLVER_FIELD({self.field_name})" if self.target is Target.SOLVER_FIELD else self.target.value
        return f"{name}@{self.scope.value}" if self.scope is Scope.PER_STATION else name

    def default_objective(self) -> Objective:
        return Objective.PER_STATION_SPEARMAN if self.scope is Scope.PER_STATION else Objective.MEAN_SPEARMAN

    def to_dict(self) -> dict:
        d = {"target": self.target.value, "values": [_plain(v) for v in self.values], "scope": self.scope.value}
        if self.field_name:
            d["field"] = self.field_name
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SweepAxis":
        unknown = set(d) - {"target", "values", "scope", "field"}
        if unknown:
            raise ValueError(f"unknown axis keys {sorted(unknown)}")
        return cls(Target(str(d["target"]).upper()), tuple(d["values"]), Scope(str(d.get("scope", "GLOBAL")).upper()),
                   d.get("field"))


def _plain(v):
    return v.value if isinstance(v, enum.Enum) else v


@dataclass(frozen=True)
class Candidate:
    """The tunable part of a run."""

    stations: tuple[StationConfig, ...]
    ues: tuple[UeConfig, ...]
    solver: SolverConfig

    def apply(self, axis: SweepAxis, value, station_id: str | None = None) -> "Candidate":
        """Set ``axis`` to ``value`` on every station, or only on ``station_id``."""
        t = axis.target

        def on_station(s: StationConfig) -> StationConfig:
            if station_id is not None and s.id != station_id:
                return s
            if t is Target.BS_ALTITUDE:
                return s.with_altitude(value)
            if t is Target.BS_AZIMUTH:
                return s.with_antenna(azimuth=value)
            return s.with_antenna(pattern=value)

        if t in _STATION_TARGETS:
            return replace(self, stations=tuple(on_station(s) for s in self.stations))
        if t in (Target.UE_PATTERN, Target.UE_AZIMUTH):
            def on_ue(u: UeConfig) -> UeConfig:
                a = u.antenna
                if t is Target.UE_PATTERN:
                    return u.with_antenna(AntennaConfig(value, a.orientation))
                o = a.orientation
                return u.with_antenna(AntennaConfig(a.pattern, Orientation(value, o.tilt, o.roll)))
            return replace(self, ues=tuple(on_ue(u) for u in self.ues))
        if t is Target.FREQUENCY:
            return replace(self, solver=self.solver.with_field("frequency", value))
        return replace(self, solver=self.solver.with_field(axis.field_name, value))

    def describe(self) -> dict:
        return {
            "stations": [s.to_dict() for s in self.stations],
            "ue_antennas": sorted({json.dumps(u.antenna.to_dict(), sort_keys=True) for u in self.ues}),
            "solver": self.solver.to_dict(),
        }


class SimulationCache:
    """Thread-safe store of simulated station rows.

    Stations are simulated independently, so a row is fully determined by the
    scene, the station, the UE set, the solver config and the seed.
    """

    def __init__(self) -> None:
        self._rows: dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(scene: Scene, station: StationConfig, ues: Sequence[UeConfig], solver: SolverConfig, seed: int) -> tuple:
        return (scene.key, station, tuple(ues), solver.key(), int(seed))

    def get(self, key):
        with self._lock:
            row = self._rows.get(key)
            if row is None:
                self.misses += 1
            else:
                self.hits += 1
            return row

    def put(self, key, row: np.ndarray) -> None:
        row = np.array(row, dtype=float)
        row.setflags(write=False)
        with self._lock:
            self._rows.setdefault(key, row)

    def __len__(self) -> int:
        with self._lock:
            return len(self._rows)


@dataclass
class Experiment:
    """Fixed inputs shared by every evaluation of a sweep or greedy run."""

    scene: Scene
    real: RssiMatrix
    split: Split
    ue_xy: Mapping[str, Sequence[float]]
    seed: int
    k: int = DEFAULT_K
    floor_dbm: float = DEFAULT_FLOOR_DBM
    metric: str = "euclidean"
    workers: int | None = None
    cache: SimulationCache = field(default_factory=SimulationCache)

    def simulate(self, cand: Candidate) -> RssiMatrix:
        keys = [SimulationCache.key(self.scene, s, cand.ues, cand.solver, self.seed) for s in cand.stations]
        rows = [self.cache.get(k) for k in keys]
        todo = [i for i, r in enumerate(rows) if r is None]
        if todo:
            fresh = simulate_rssi(self.scene, [cand.stations[i] for i in todo], list(cand.ues), cand.solver,
                                  self.seed, workers=self.workers)
            for n, i in enumerate(todo):
                self.cache.put(keys[i], fresh.values[n])
                rows[i] = fresh.values[n]
        return RssiMatrix([s.id for s in cand.stations], [u.id for u in cand.ues], np.vstack(rows), SIM)

    def evaluate(self, cand: Candidate) -> FidelityReport:
        sim = self.simulate(cand)
        real = self.real.select(stations=sim.stations, ues=sim.ues)
        return evaluate(real, sim, self.split, self.ue_xy, k=self.k, floor_dbm=self.floor_dbm, metric=self.metric)


@dataclass
class SweepRow:
    value: Any
    report: FidelityReport


def sweep(axis: SweepAxis, base: Candidate, exp: Experiment) -> list[SweepRow]:
    """One full simulate+evaluate per axis value, in the order given."""
    out = []
    for v in axis.values:
        try:
            rep = exp.evaluate(base.apply(axis, v))
        except Exception as exc:
            raise RuntimeError(f"{axis.label} = {_plain(v)!r} failed: {exc}") from exc
        out.append(SweepRow(v, rep))
    return out


@dataclass
class TraceRow:
    step: int
    axis: str
    value: Any
    objective: float
    detail: dict


@dataclass
class GreedyResult:
    base: Candidate
    best: Candidate
    base_report: FidelityReport
    best_report: FidelityReport
    objective: Objective
    trace: list[TraceRow]
    choices: list[dict]

    @property
    def base_score(self) -> float:
        return self.objective.score(self.base_report)

    @property
    def best_score(self) -> float:
        return self.objective.score(self.best_report)

    def trace_csv(self, comments: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for c in comments:
            buf.write(f"# {c}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in self.trace:
            w.writerow((r.step, r.axis, _plain(r.value), repr(float(r.objective)),
                        json.dumps(r.detail, sort_keys=True)))
        return buf.getvalue()


def _pick(scores: Sequence[float]) -> int:
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


def greedy_optimize(axes: Sequence[SweepAxis], base: Candidate, exp: Experiment,
                    objective: Objective | None = None, passes: int = 1,
                    progress: Callable[[TraceRow], None] | None = None) -> GreedyResult:
    """Coordinate ascent over ``axes`` in order.

    Per-station axes scored with PER_STATION_SPEARMAN let each station keep
    the value that maximizes its own correlation; every other combination
    picks one value for the whole axis.  ``objective`` (default: per-axis
    default) is also the score reported for the overall result.  Exact ties
    go to the value listed first.
    """
    if not axes:
        raise ValueError("need at least one axis")
    if passes < 1:
        raise ValueError("passes must be >= 1")
    overall = Objective(objective) if objective is not None else axes[0].default_objective()
    for ax in axes:
        ob = Objective(objective) if objective is not None else ax.default_objective()
        if ob is Objective.PER_STATION_SPEARMAN and ax.scope is not Scope.PER_STATION:
            raise ValueError(f"PER_STATION_SPEARMAN needs a PER_STATION axis, got {ax.label}")
    if overall is Objective.PER_STATION_SPEARMAN:
        overall_score = Objective.MEAN_SPEARMAN
    else:
        overall_score = overall

    base_report = exp.evaluate(base)
    current = base
    trace: list[TraceRow] = []
    choices: list[dict] = []
    step = 0
    for _ in range(passes):
        for ax in axes:
            ob = Objective(objective) if objective is not None else ax.default_objective()
            reports = []
            for v in ax.values:
                try:
                    rep = exp.evaluate(current.apply(ax, v))
                except Exception as exc:
                    raise RuntimeError(f"{ax.label} = {_plain(v)!r} failed: {exc}") from exc
                reports.append(rep)
                score = (Objective.MEAN_SPEARMAN if ob is Objective.PER_STATION_SPEARMAN else ob).score(rep)
                row = TraceRow(step, ax.label, v, score, {
                    "per_station_spearman": rep.per_station_spearman,
                    "knn_errors": rep.knn_errors,
                })
                trace.append(row)
                if progress:
                    progress(row)
                step += 1
            if ob is Objective.PER_STATION_SPEARMAN:
                chosen = {}
                nxt = current
                for s in current.stations:
                    i = _pick([r.station_score(s.id) for r in reports])
                    chosen[s.id] = _plain(ax.values[i])
                    nxt = nxt.apply(ax, ax.values[i], station_id=s.id)
                current = nxt
                choices.append({"axis": ax.label, "per_station": chosen})
            else:
                i = _pick([ob.score(r) for r in reports])
                current = current.apply(ax, ax.values[i])
                choices.append({"axis": ax.label, "value": _plain(ax.values[i])})
    best_report = exp.evaluate(current)
    return GreedyResult(base, current, base_report, best_report, overall_score, trace, choices)
