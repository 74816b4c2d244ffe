"""Run configuration: one JSON document describes a reproducible run."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .antenna import AntennaConfig
from .dataset import DEFAULT_FLOOR_DBM
from .evaluation import DEFAULT_K, DEFAULT_TRAIN_RATIO, METRICS
from .geodesy import GeoPoint
from .optimizer import Objective, SweepAxis
from .propagation.config import SolverConfig

PATH_FIELDS = ("footprints", "measurements", "stations", "overrides", "ues", "output_dir")


@dataclass(frozen=True)
class OptimizeSpec:
    axes: tuple[SweepAxis, ...]
    objective: Objective | None = None
    passes: int = 1

    def to_dict(self) -> dict:
        return {"axes": [a.to_dict() for a in self.axes],
                "objective": None if self.objective is None else self.objective.value,
                "passes": self.passes}

    @classmethod
    def from_dict(cls, d: Mapping) -> "OptimizeSpec":
        unknown = set(d) - {"axes", "objective", "passes"}
        if unknown:
            raise ValueError(f"unknown optimize keys {sorted(unknown)}")
        obj = d.get("objective")
        return cls(tuple(SweepAxis.from_dict(a) for a in d["axes"]),
                   None if obj is None else Objective(str(obj).upper()), int(d.get("passes", 1)))


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs besides the input files themselves.

    Relative paths are resolved against ``base_dir`` (the directory of the
    config file), which is not part of the hash.
    """

    footprints: str | None = None
    measurements: str | None = None
    stations: str | None = None
    overrides: str | None = None
    ues: str | None = None
    output_dir: str = "out"
    solver: SolverConfig = field(default_factory=SolverConfig)
    ue_antenna: AntennaConfig = field(default_factory=AntennaConfig)
    origin: GeoPoint | None = None
    ground: bool = True
    sweep: SweepAxis | None = None
    optimize: OptimizeSpec | None = None
    seed: int = 0
    floor_dbm: float = DEFAULT_FLOOR_DBM
    k: int = DEFAULT_K
    train_ratio: float = DEFAULT_TRAIN_RATIO
    metric: str = "euclidean"
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def path(self, name: str) -> Path | None:
        v = getattr(self, name)
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self) -> dict:
        return {
            **{n: getattr(self, n) for n in PATH_FIELDS},
            "solver": self.solver.to_dict(),
            "ue_antenna": self.ue_antenna.to_dict(),
            "origin": None if self.origin is None else {"lat": self.origin.lat, "lon": self.origin.lon},
            "ground": self.ground,
            "sweep": None if self.sweep is None else self.sweep.to_dict(),
            "optimize": None if self.optimize is None else self.optimize.to_dict(),
            "seed": self.seed,
            "floor_dbm": self.floor_dbm,
            "k": self.k,
            "train_ratio": self.train_ratio,
            "metric": self.metric,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base_dir: str | os.PathLike = ".") -> "RunConfig":
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        kw: dict[str, Any] = {n: d[n] for n in PATH_FIELDS if d.get(n) is not None}
        if "solver" in d:
            kw["solver"] = SolverConfig.from_dict(d["solver"])
        if "ue_antenna" in d:
            kw["ue_antenna"] = AntennaConfig.from_dict(d["ue_antenna"])
        if d.get("origin") is not None:
            kw["origin"] = GeoPoint(float(d["origin"]["lat"]), float(d["origin"]["lon"]))
        if d.get("sweep") is not None:
            kw["sweep"] = SweepAxis.from_dict(d["sweep"])
        if d.get("optimize") is not None:
            kw["optimize"] = OptimizeSpec.from_dict(d["optimize"])
        for n, conv in (("ground", bool), ("seed", int), ("floor_dbm", float), ("k", int),
                        ("train_ratio", float), ("metric", str)):
            if d.get(n) is not None:
                kw[n] = conv(d[n])
        return cls(base_dir=str(base_dir), **kw)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "RunConfig":
        with open(path) as fh:
            doc = json.load(fh)
        return cls.from_dict(doc, base_dir=Path(path).resolve().parent)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def sha256(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()
