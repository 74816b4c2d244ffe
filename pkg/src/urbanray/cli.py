"""``urbanray`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import RunConfig
from .dataset import (DataError, apply_corrections, load_measurements, load_overrides, load_stations, load_ues)
from .devices import StationConfig, UeConfig
from .evaluation import FidelityReport, align, evaluate, make_split
from .geodesy import GeoPoint, bbox_centroid
from .optimizer import Candidate, Experiment, SweepAxis, greedy_optimize, sweep
from .plots import knn_curves, spearman_bars, table_csv
from .propagation.rssi import REAL, SIM, RssiMatrix, simulate_rssi
from .scene import FootprintError, Scene, build_scene, export_obj, load_footprints

log = logging.getLogger("urbanray")


class CliError(Exception):
    pass


def write_atomic(path: str | os.PathLike, text: str) -> Path:
    """Write ``text`` to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def provenance(rc: RunConfig, command: str) -> dict:
    return {"tool": f"urbanray {__version__}", "command": command, "seed": rc.seed, "config_sha256": rc.sha256()}


def _comments(prov: dict) -> list[str]:
    return [f"{k}={v}" for k, v in prov.items()]


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- inputs


@dataclass
class Inputs:
    stations: list[StationConfig]
    ues: list[UeConfig]
    real: RssiMatrix | None
    origin: GeoPoint

    def ue_xy(self) -> dict[str, tuple[float, float]]:
        return {u.id: tuple(u.enu(self.origin)[:2]) for u in self.ues}


def _require(rc: RunConfig, name: str) -> Path:
    p = rc.path(name)
    if p is None:
        raise CliError(f"config field '{name}' (or --{name}) is required for this command")
    if not p.exists():
        raise CliError(f"{name}: file not found: {p}")
    return p


def load_inputs(rc: RunConfig, need_real: bool = False) -> Inputs:
    stations = load_stations(_require(rc, "stations"))
    real = None
    if rc.measurements is not None:
        m = load_measurements(_require(rc, "measurements"), stations, ue_antenna=rc.ue_antenna)
        ues, real = m.ues, m.matrix
    elif rc.ues is not None:
        if need_real:
            raise CliError("this command needs real measurements ('measurements')")
        ues = load_ues(_require(rc, "ues"), rc.ue_antenna)
    else:
        raise CliError("either 'measurements' or 'ues' must be configured")
    if rc.overrides is not None:
        stations = apply_corrections(stations, load_overrides(_require(rc, "overrides")))
        if real is not None:
            real = real.select(stations=[s.id for s in stations])
    if not stations:
        raise CliError("no stations left after corrections")
    origin = rc.origin or bbox_centroid([u.position for u in ues])
    return Inputs(stations, ues, real, origin)


def make_scene(rc: RunConfig, origin: GeoPoint, cover: Sequence[GeoPoint]) -> Scene:
    fps = load_footprints(_require(rc, "footprints")) if rc.footprints is not None else []
    return build_scene(fps, origin, cover=list(cover), ground=rc.ground)


def _scene_for(rc: RunConfig, inp: Inputs) -> Scene:
    return make_scene(rc, inp.origin, [u.position for u in inp.ues] + [s.position for s in inp.stations])


def _out(rc: RunConfig, explicit: str | None, default: str) -> Path:
    return Path(explicit) if explicit else rc.path("output_dir") / default


# -------------------------------------------------------------- commands


def _write_obj(scene: Scene, path: Path, prov: dict) -> Path:
    with tempfile.TemporaryDirectory() as d:
        export_obj(scene, Path(d) / "scene.obj")
        body = (Path(d) / "scene.obj").read_text()
    return write_atomic(path, "".join(f"# {c}\n" for c in _comments(prov)) + body)


def cmd_scene(rc: RunConfig, args) -> int:
    fps = load_footprints(_require(rc, "footprints"))
    origin = rc.origin
    cover: list[GeoPoint] = []
    if rc.stations is not None and (rc.measurements is not None or rc.ues is not None):
        inp = load_inputs(rc)
        origin = inp.origin
        cover = [u.position for u in inp.ues] + [s.position for s in inp.stations]
    if origin is None:
        origin = bbox_centroid([p for fp in fps for p in fp.polygon])
    scene = build_scene(fps, origin, cover=cover, ground=rc.ground)
    prov = provenance(rc, f"scene {args.action}")
    if args.action == "export-obj":
        path = _write_obj(scene, _out(rc, args.out, "scene.obj"), prov)
    else:
        path = _out(rc, args.out, "scene.json")
        write_atomic(path, _dump({"provenance": prov, "summary": scene.summary()}))
        if args.obj:
            _write_obj(scene, Path(args.obj), prov)
    print(f"{len(scene.prisms)} prisms, {scene.n_faces} faces -> {path}")
    return 0


def cmd_simulate(rc: RunConfig, args) -> int:
    inp = load_inputs(rc)
    scene = _scene_for(rc, inp)
    sim = simulate_rssi(scene, inp.stations, inp.ues, rc.solver, rc.seed, workers=args.workers)
    path = _out(rc, args.out, "sim_rssi.csv")
    write_atomic(path, sim.to_csv_text(_comments(provenance(rc, "simulate"))))
    print(f"{sim.shape[0]}x{sim.shape[1]} SIM matrix ({sim.n_missing} missing) -> {path}")
    return 0


def _report(rc: RunConfig, inp: Inputs, real: RssiMatrix, sim: RssiMatrix) -> FidelityReport:
    real, sim = align(real, sim)
    split = make_split(list(real.ues), rc.seed, rc.train_ratio)
    xy = inp.ue_xy()
    return evaluate(real, sim, split, xy, k=rc.k, floor_dbm=rc.floor_dbm, metric=rc.metric)


def cmd_evaluate(rc: RunConfig, args) -> int:
    inp = load_inputs(rc)
    if args.real:
        real = RssiMatrix.from_csv(args.real, REAL)
    elif inp.real is not None:
        real = inp.real
    else:
        raise CliError("no real data: configure 'measurements' or pass --real")
    sim_path = Path(args.sim) if args.sim else rc.path("output_dir") / "sim_rssi.csv"
    if not sim_path.exists():
        raise CliError(f"sim: file not found: {sim_path}")
    sim = RssiMatrix.from_csv(sim_path, SIM)
    rep = _report(rc, inp, real, sim)
    rep.meta.update(provenance(rc, "evaluate"))
    path = _out(rc, args.out, "report.json")
    write_atomic(path, rep.to_json())
    rho = ", ".join(f"{s}={'UNDEFINED' if v is None else f'{v:.3f}'}" for s, v in rep.per_station_spearman.items())
    print(f"spearman: {rho}")
    print("knn: " + ", ".join(f"{s}={e:.2f}m" for s, e in rep.knn_errors.items()))
    return 0


def _experiment(rc: RunConfig, args) -> tuple[Experiment, Candidate]:
    inp = load_inputs(rc, need_real=True)
    scene = _scene_for(rc, inp)
    split = make_split(list(inp.real.ues), rc.seed, rc.train_ratio)
    exp = Experiment(scene, inp.real, split, inp.ue_xy(), rc.seed, rc.k, rc.floor_dbm, rc.metric,
                     workers=args.workers)
    return exp, Candidate(tuple(inp.stations), tuple(inp.ues), rc.solver)


def cmd_sweep(rc: RunConfig, args) -> int:
    if rc.sweep is None:
        raise CliError("config has no 'sweep' axis")
    exp, base = _experiment(rc, args)
    rows = sweep(rc.sweep, base, exp)
    doc = {
        "provenance": provenance(rc, "sweep"),
        "axis": rc.sweep.to_dict(),
        "rows": [{"value": rc.sweep.to_dict()["values"][i], "report": r.report.to_dict()} for i, r in enumerate(rows)],
    }
    path = _out(rc, args.out, "sweep.json")
    write_atomic(path, _dump(doc))
    for i, r in enumerate(rows):
        print(f"{rc.sweep.label}={doc['rows'][i]['value']}: mean spearman {r.report.mean_spearman:.4f}")
    return 0


def cmd_optimize(rc: RunConfig, args) -> int:
    if rc.optimize is None:
        raise CliError("config has no 'optimize' section")
    exp, base = _experiment(rc, args)
    res = greedy_optimize(list(rc.optimize.axes), base, exp, rc.optimize.objective, rc.optimize.passes)
    prov = provenance(rc, "optimize")
    out_dir = Path(args.out_dir) if args.out_dir else rc.path("output_dir")
    final = res.best_report
    final.meta.update(prov)
    write_atomic(out_dir / "trace.csv", res.trace_csv(_comments(prov)))
    write_atomic(out_dir / "optimized_stations.json", _dump([s.to_dict() for s in res.best.stations]))
    write_atomic(out_dir / "optimize.json", _dump({
        "provenance": prov,
        "objective": res.objective.value,
        "base_score": res.base_score,
        "best_score": res.best_score,
        "choices": res.choices,
        "base_report": res.base_report.to_dict(),
        "best_report": final.to_dict(),
        "best_stations": [s.to_dict() for s in res.best.stations],
    }))
    write_atomic(out_dir / "report.json", final.to_json())
    print(f"{res.objective.value}: {res.base_score:.4f} -> {res.best_score:.4f} ({len(res.trace)} evaluations)")
    return 0


def cmd_report(rc: RunConfig, args) -> int:
    out_dir = Path(args.out_dir) if args.out_dir else rc.path("output_dir")
    rows: list[tuple[str, FidelityReport]] = []
    extra: list[tuple[str, dict]] = []
    written = []
    comments = _comments(provenance(rc, "report"))
    for n, inp in enumerate(args.inputs):
        p = Path(inp)
        doc = json.loads(p.read_text())
        stem = p.stem if len(args.inputs) == 1 else f"{p.stem}{n}"
        if "rows" in doc and "axis" in doc:
            axis = SweepAxis.from_dict(doc["axis"])
            values = [r["value"] for r in doc["rows"]]
            reps = [FidelityReport.from_dict(r["report"]) for r in doc["rows"]]
            rows += [(f"{axis.label}={v}", r) for v, r in zip(values, reps)]
            for name, text in (
                (f"{stem}_spearman.svg", spearman_bars(values, reps, f"Spearman by {axis.label}", axis.label, comments)),
                (f"{stem}_knn.svg", knn_curves(values, reps, f"kNN error by {axis.label}", axis.label, comments)),
            ):
                written.append(write_atomic(out_dir / name, text))
        elif "best_report" in doc:
            rows.append(("initial configuration", FidelityReport.from_dict(doc["base_report"])))
            rows.append(("optimized configuration", FidelityReport.from_dict(doc["best_report"])))
            best = {s["id"]: s for s in doc.get("best_stations", [])}
            if best:
                extra.append(("altitude in the optimized configuration",
                              {k: f"{v['altitude']:g}m" for k, v in best.items()}))
                extra.append(("azimuth in the optimized configuration",
                              {k: f"{v['azimuth']:g}deg" for k, v in best.items()}))
        else:
            rows.append((p.stem, FidelityReport.from_dict(doc)))
    if not rows:
        raise CliError("no reports given")
    written.insert(0, write_atomic(out_dir / "table.csv", table_csv(rows, extra=extra, comments=comments)))
    for w in written:
        print(w)
    return 0


# ------------------------------------------------------------------ parser


def _kv(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k.strip(), json.loads(v)
    except json.JSONDecodeError:
        return k.strip(), v


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration (flags override config fields)")
    g.add_argument("--config", "-c", help="run config JSON")
    for name in ("footprints", "measurements", "stations", "overrides", "ues"):
        g.add_argument(f"--{name}", help=f"{name} file")
    g.add_argument("--output-dir", dest="output_dir")
    g.add_argument("--seed", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--floor-dbm", dest="floor_dbm", type=float)
    g.add_argument("--train-ratio", dest="train_ratio", type=float)
    g.add_argument("--metric", choices=("euclidean", "manhattan"))
    g.add_argument("--solver", action="append", type=_kv, default=[], metavar="NAME=VALUE",
                   help="override one solver field (repeatable)")
    g.add_argument("--workers", type=int, help="worker processes (default: $URBANRAY_WORKERS or CPU count)")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="urbanray", description="Urban radio ray tracing and fingerprint fidelity.")
    ap.add_argument("--version", action="version", version=f"urbanray {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("scene", help="build or export the 3-D scene")
    sc_sub = sc.add_subparsers(dest="action", required=True)
    b = sc_sub.add_parser("build", help="extrude footprints and write a summary")
    _common(b)
    b.add_argument("--out", help="summary JSON path")
    b.add_argument("--obj", help="also write a Wavefront OBJ")
    e = sc_sub.add_parser("export-obj", help="write the scene as Wavefront OBJ")
    _common(e)
    e.add_argument("--out", help="OBJ path")

    s = sub.add_parser("simulate", help="simulate the SIM RSSI matrix")
    _common(s)
    s.add_argument("--out", help="CSV path")

    ev = sub.add_parser("evaluate", help="score a SIM matrix against real data")
    _common(ev)
    ev.add_argument("--sim", help="SIM RSSI CSV (default: <output_dir>/sim_rssi.csv)")
    ev.add_argument("--real", help="REAL RSSI CSV in the same long format (default: measurements)")
    ev.add_argument("--out", help="report JSON path")

    sw = sub.add_parser("sweep", help="evaluate every value of the configured axis")
    _common(sw)
    sw.add_argument("--out", help="sweep JSON path")

    op = sub.add_parser("optimize", help="greedy coordinate ascent over the configured axes")
    _common(op)
    op.add_argument("--out-dir", dest="out_dir")

    rp = sub.add_parser("report", help="render reports as a table CSV and SVG charts")
    _common(rp)
    rp.add_argument("inputs", nargs="+", help="report, sweep or optimize JSON files")
    rp.add_argument("--out-dir", dest="out_dir")
    return ap


def resolve_config(args) -> RunConfig:
    rc = RunConfig.load(args.config) if args.config else RunConfig()
    over = {}
    for name in ("footprints", "measurements", "stations", "overrides", "ues", "output_dir"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = str(Path(v).resolve())
    for name in ("seed", "k", "floor_dbm", "train_ratio", "metric"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    solver = rc.solver
    for k, v in args.solver:
        solver = solver.with_field(k, v)
    over["solver"] = solver
    return rc.with_overrides(**over)


COMMANDS = {
    "scene": cmd_scene,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        rc = resolve_config(args)
        return COMMANDS[args.command](rc, args)
    except FootprintError as exc:
        print(f"error: footprint {exc.footprint_id}: {exc.reason}", file=sys.stderr)
    except (CliError, DataError, ValueError, KeyError, OSError, RuntimeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
