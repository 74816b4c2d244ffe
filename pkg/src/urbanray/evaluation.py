"""Fidelity scoring: per-station rank correlation and fingerprint kNN localization."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import DEFAULT_FLOOR_DBM
from .propagation.rssi import RssiMatrix

SCENARIOS = ("RR", "RS", "SS", "SR")
METRICS = ("euclidean", "manhattan")
DEFAULT_K = 10
DEFAULT_TRAIN_RATIO = 0.8


class UndefinedCorrelation(ValueError):
    """Raised when a rank correlation has no defined value; ``reason`` says why."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def average_ranks(x) -> np.ndarray:
    """1-based ranks with ties sharing the mean of the positions they occupy."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], len(xs)]
    run_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(len(x))
    ranks[order] = np.repeat(run_rank, ends - starts)
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation after pairwise removal of missing (NaN) entries."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"spearman needs two equal-length vectors, got {x.shape} and {y.shape}")
    keep = ~(np.isnan(x) | np.isnan(y))
    x, y = x[keep], y[keep]
    if len(x) < 2:
        raise UndefinedCorrelation(f"fewer than 2 paired values (n={len(x)})")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelation("constant input")
    rx = average_ranks(x)
    ry = average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    rho = float(np.dot(rx, ry) / math.sqrt(float(np.dot(rx, rx)) * float(np.dot(ry, ry))))
    return min(1.0, max(-1.0, rho))


@dataclass(frozen=True)
class Split:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int
    ratio: float

    def __post_init__(self) -> None:
        if set(self.train_ids) & set(self.test_ids):
            raise ValueError("train and test ids overlap")


def make_split(ue_ids: Sequence[str], seed: int, ratio: float = DEFAULT_TRAIN_RATIO) -> Split:
    """Seeded shuffle of the sorted ids; the first ``round(ratio*n)`` go to training.

    Both parts are kept non-empty when there are at least two ids.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    ids = sorted(set(str(u) for u in ue_ids))
    if len(ids) != len(ue_ids):
        raise ValueError("duplicate UE ids")
    if len(ids) < 2:
        raise ValueError("need at least two UEs to split")
    perm = np.random.default_rng(seed).permutation(len(ids))
    n_train = min(max(int(round(ratio * len(ids))), 1), len(ids) - 1)
    shuffled = [ids[i] for i in perm]
    return Split(tuple(sorted(shuffled[:n_train])), tuple(sorted(shuffled[n_train:])), int(seed), float(ratio))


def _distances(train_fp: np.ndarray, test_fp: np.ndarray, metric: str) -> np.ndarray:
    diff = test_fp[:, None, :] - train_fp[None, :, :]
    if metric == "euclidean":
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if metric == "manhattan":
        return np.abs(diff).sum(axis=2)
    raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")


def knn_localize(train_fp, train_xy, test_fp, k: int = DEFAULT_K, train_ids: Sequence[str] | None = None,
                 metric: str = "euclidean") -> np.ndarray:
    """Mean (x, y) of the ``k`` nearest training fingerprints for every test row.

    Distance ties go to the training UE whose id sorts first; without ids the
    row order stands in for the id order.
    """
    train_fp = np.atleast_2d(np.asarray(train_fp, dtype=float))
    test_fp = np.atleast_2d(np.asarray(test_fp, dtype=float))
    train_xy = np.asarray(train_xy, dtype=float).reshape(-1, 2)
    n = len(train_fp)
    if n == 0:
        raise ValueError("empty training set")
    if len(train_xy) != n:
        raise ValueError("train fingerprints and locations differ in length")
    if train_fp.shape[1] != test_fp.shape[1]:
        raise ValueError(f"fingerprint dimension mismatch: {train_fp.shape[1]} vs {test_fp.shape[1]}")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if not (np.isfinite(train_fp).all() and np.isfinite(test_fp).all()):
        raise ValueError("fingerprints must be finite")
    if train_ids is None:
        id_rank = np.arange(n)
    else:
        if len(train_ids) != n:
            raise ValueError("train_ids length mismatch")
        id_rank = np.empty(n, dtype=np.int64)
        id_rank[sorted(range(n), key=lambda i: str(train_ids[i]))] = np.arange(n)
    d = _distances(train_fp, test_fp, metric)
    out = np.empty((len(test_fp), 2))
    for q in range(len(test_fp)):
        nearest = np.lexsort((id_rank, d[q]))[:k]
        out[q] = train_xy[nearest].mean(axis=0)
    return out


@dataclass
class FidelityReport:
    per_station_spearman: dict[str, float | None]
    knn_errors: dict[str, float]
    n_ues: int
    n_stations: int
    split_seed: int
    k: int = DEFAULT_K
    undefined: dict[str, str] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if set(self.knn_errors) != set(SCENARIOS):
            raise ValueError(f"report needs all scenarios {SCENARIOS}")
        if any(not (v >= 0) for v in self.knn_errors.values()):
            raise ValueError("kNN errors must be non-negative")

    @property
    def mean_spearman(self) -> float:
        """Mean over stations with a defined correlation; NaN when none are defined."""
        vals = [v for v in self.per_station_spearman.values() if v is not None]
        return float(np.mean(vals)) if vals else math.nan

    def station_score(self, station_id: str) -> float:
        v = self.per_station_spearman[station_id]
        return -math.inf if v is None else v

    def to_dict(self) -> dict:
        return {
            "per_station_spearman": dict(self.per_station_spearman),
            "undefined": dict(self.undefined),
            "mean_spearman": None if math.isnan(self.mean_spearman) else self.mean_spearman,
            "knn_errors": {s: self.knn_errors[s] for s in SCENARIOS},
            "n_ues": self.n_ues,
            "n_stations": self.n_stations,
            "split_seed": self.split_seed,
            "k": self.k,
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FidelityReport":
        return cls(
            per_station_spearman={str(k): (None if v is None else float(v))
                                  for k, v in d["per_station_spearman"].items()},
            knn_errors={k: float(v) for k, v in d["knn_errors"].items()},
            n_ues=int(d["n_ues"]),
            n_stations=int(d["n_stations"]),
            split_seed=int(d["split_seed"]),
            k=int(d.get("k", DEFAULT_K)),
            undefined=dict(d.get("undefined", {})),
            meta=dict(d.get("meta", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path: str | os.PathLike) -> "FidelityReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _check_aligned(real: RssiMatrix, sim: RssiMatrix) -> None:
    if real.stations != sim.stations:
        raise ValueError(f"station order differs: {real.stations} vs {sim.stations}")
    if real.ues != sim.ues:
        raise ValueError("UE order differs between matrices")


def align(real: RssiMatrix, sim: RssiMatrix) -> tuple[RssiMatrix, RssiMatrix]:
    """Restrict both matrices to common stations/UEs in the REAL ordering."""
    stations = [s for s in real.stations if s in set(sim.stations)]
    ues = [u for u in real.ues if u in set(sim.ues)]
    if not stations or not ues:
        raise ValueError("matrices share no stations or no UEs")
    return real.select(stations, ues), sim.select(stations, ues)


def evaluate(real: RssiMatrix, sim: RssiMatrix, split: Split, ue_xy: Mapping[str, Sequence[float]],
             k: int = DEFAULT_K, floor_dbm: float = DEFAULT_FLOOR_DBM, metric: str = "euclidean") -> FidelityReport:
    """Score ``sim`` against ``real``.

    Spearman uses every UE; the kNN scenarios train on ``split.train_ids`` from
    the first source and query ``split.test_ids`` from the second.  Ground
    truth is ``ue_xy`` (ENU metres).
    """
    _check_aligned(real, sim)
    ue_set = set(real.ues)
    if set(split.train_ids) | set(split.test_ids) != ue_set:
        raise ValueError("split does not partition the matrix UEs")
    missing_xy = [u for u in real.ues if u not in ue_xy]
    if missing_xy:
        raise ValueError(f"no location for UEs {missing_xy[:5]}")

    rho: dict[str, float | None] = {}
    undefined: dict[str, str] = {}
    for i, s in enumerate(real.stations):
        try:
            rho[s] = spearman(real.values[i], sim.values[i])
        except UndefinedCorrelation as exc:
            rho[s] = None
            undefined[s] = exc.reason

    fp = {
        "R": np.where(np.isnan(real.values), floor_dbm, real.values).T,
        "S": np.where(np.isnan(sim.values), floor_dbm, sim.values).T,
    }
    col = {u: j for j, u in enumerate(real.ues)}
    tr = np.array([col[u] for u in split.train_ids])
    te = np.array([col[u] for u in split.test_ids])
    xy_tr = np.array([ue_xy[u][:2] for u in split.train_ids], dtype=float)
    xy_te = np.array([ue_xy[u][:2] for u in split.test_ids], dtype=float)
    errors = {}
    for sc in SCENARIOS:
        pred = knn_localize(fp[sc[0]][tr], xy_tr, fp[sc[1]][te], k=k,
                            train_ids=split.train_ids, metric=metric)
        errors[sc] = float(np.mean(np.hypot(*(pred - xy_te).T)))
    return FidelityReport(rho, errors, len(real.ues), len(real.stations), split.seed, k, undefined)
