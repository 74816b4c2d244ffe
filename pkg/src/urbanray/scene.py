"""Extruded-prism city model and ray queries against it.

Every footprint becomes a right prism standing on a finite ground
rectangle.  Walls, roofs and the ground are planar faces; each face is
triangulated into a shared :class:`~urbanray.bvh.TriangleIndex`.

Ray queries ignore intersections closer than ``scene.epsilon`` to the ray
origin.  A ray lying exactly in a face's plane never hits that face, so a
ray grazing along a roof edge passes unobstructed.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import polygon as poly
from .bvh import TriangleIndex
from .geodesy import EnuPoint, GeoPoint, to_enu

GROUND = "GROUND"
DEFAULT_HEIGHT = 10.0
FLOOR_HEIGHT = 3.0
DEFAULT_EPSILON = 1e-4
DEFAULT_GROUND_MARGIN = 500.0


class FootprintError(ValueError):
    def __init__(self, footprint_id: str, reason: str):
        super().__init__(f"footprint {footprint_id!r}: {reason}")
        self.footprint_id = footprint_id
        self.reason = reason


@dataclass(frozen=True)
class Material:
    """Homogeneous dielectric; conductivity follows ``a * (f / 1 GHz) ** b``."""

    name: str
    relative_permittivity: float
    conductivity_a: float
    conductivity_b: float = 0.0

    def __post_init__(self) -> None:
        if self.relative_permittivity < 1.0:
            raise ValueError("relative permittivity must be >= 1")
        if self.conductivity_a < 0.0:
            raise ValueError("conductivity must be >= 0")

    def conductivity(self, frequency: float) -> float:
        return self.conductivity_a * (frequency / 1e9) ** self.conductivity_b

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "relative_permittivity": self.relative_permittivity,
            "conductivity_a": self.conductivity_a,
            "conductivity_b": self.conductivity_b,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Material":
        return cls(d["name"], float(d["relative_permittivity"]), float(d["conductivity_a"]),
                   float(d.get("conductivity_b", 0.0)))


# ITU-R P.2040 concrete
CONCRETE = Material("concrete", 5.24, 0.0462, 0.7822)


@dataclass(frozen=True)
class Footprint:
    id: str
    polygon: tuple[GeoPoint, ...]
    floors: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "polygon", tuple(self.polygon))
        if self.floors is not None and (int(self.floors) != self.floors or self.floors <= 0):
            raise FootprintError(self.id, f"floors must be a positive integer, got {self.floors!r}")
        if len(self.polygon) < 3:
            raise FootprintError(self.id, "needs at least 3 vertices")

    @property
    def height(self) -> float:
        return DEFAULT_HEIGHT if self.floors is None else FLOOR_HEIGHT * self.floors


@dataclass(frozen=True)
class BuildingPrism:
    id: str
    base: np.ndarray  # open CCW ring, shape (n, 2)
    height: float
    material: str

    @property
    def n_walls(self) -> int:
        return len(self.base)


@dataclass(frozen=True)
class Hit:
    t: float
    point: np.ndarray
    normal: np.ndarray
    material: Material
    prism_id: str
    face: int


@dataclass(frozen=True, eq=False)
class Scene:
    origin: GeoPoint
    prisms: tuple[BuildingPrism, ...]
    material: Material
    ground_bounds: tuple[float, float, float, float] | None  # xmin, ymin, xmax, ymax
    index: TriangleIndex
    tri_face: np.ndarray  # (T,) face row per triangle
    face_normal: np.ndarray  # (F, 3) outward unit normals
    face_point: np.ndarray  # (F, 3) one vertex on each face
    face_prism: np.ndarray  # (F,) prism row, -1 for ground
    face_kind: tuple[str, ...]  # "wall" | "roof" | "ground"
    face_tris: np.ndarray  # (F, K) triangle rows, -1 padded
    epsilon: float = DEFAULT_EPSILON
    key: str = field(default="")

    @property
    def n_faces(self) -> int:
        return len(self.face_normal)

    @property
    def triangles(self) -> np.ndarray:
        return self.index.vertices

    def prism_label(self, face: int) -> str:
        p = int(self.face_prism[face])
        return GROUND if p < 0 else self.prisms[p].id

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box of all geometry (empty scene: a unit box at the origin)."""
        if self.index.n_triangles == 0:
            return np.array([-0.5, -0.5, 0.0]), np.array([0.5, 0.5, 1.0])
        v = self.index.vertices.reshape(-1, 3)
        return v.min(axis=0), v.max(axis=0)

    def summary(self) -> dict:
        lo, hi = self.bounds()
        return {
            "prisms": len(self.prisms),
            "faces": self.n_faces,
            "triangles": self.index.n_triangles,
            "bbox_enu": [lo.tolist(), hi.tolist()],
            "origin": {"lat": self.origin.lat, "lon": self.origin.lon},
            "material": self.material.to_dict(),
            "ground": self.ground_bounds is not None,
        }


def _as_array(p, origin: GeoPoint | None = None) -> np.ndarray:
    if isinstance(p, EnuPoint):
        return p.as_array()
    if isinstance(p, GeoPoint):
        if origin is None:
            raise TypeError("a GeoPoint needs an origin")
        return to_enu(p, origin).as_array()
    return np.asarray(p, dtype=float).reshape(3)


def build_scene(
    footprints: Sequence[Footprint],
    origin: GeoPoint,
    cover: Iterable[EnuPoint | GeoPoint] | None = None,
    *,
    ground: bool = True,
    material: Material = CONCRETE,
    ground_margin: float = DEFAULT_GROUND_MARGIN,
    epsilon: float = DEFAULT_EPSILON,
    backend: str | None = None,
) -> Scene:
    """Extrude ``footprints`` into prisms and index all faces.

    The ground rectangle spans the footprints and the ``cover`` points
    (typically every station and UE) plus ``ground_margin`` on each side.
    """
    prisms: list[BuildingPrism] = []
    seen: set[str] = set()
    for fp in footprints:
        if fp.id in seen:
            raise FootprintError(fp.id, "duplicate footprint id")
        seen.add(fp.id)
        ring = np.array([[q.x, q.y] for q in (to_enu(g, origin) for g in fp.polygon)])
        try:
            ring = poly.normalize_ring(ring)
        except ValueError as exc:
            raise FootprintError(fp.id, str(exc)) from None
        if not poly.is_simple(ring):
            raise FootprintError(fp.id, "polygon is self-intersecting")
        prisms.append(BuildingPrism(fp.id, ring, fp.height, material.name))

    tris: list[np.ndarray] = []
    tri_face: list[int] = []
    normals: list[np.ndarray] = []
    points: list[np.ndarray] = []
    face_prism: list[int] = []
    kinds: list[str] = []
    face_tris: list[list[int]] = []

    def add_face(kind, prism_row, normal, corners, triangles):
        f = len(normals)
        normals.append(np.asarray(normal, dtype=float))
        points.append(np.asarray(corners[0], dtype=float))
        face_prism.append(prism_row)
        kinds.append(kind)
        rows = []
        for a, b, c in triangles:
            rows.append(len(tris))
            tris.append(np.array([corners[a], corners[b], corners[c]], dtype=float))
            tri_face.append(f)
        face_tris.append(rows)

    for row, pr in enumerate(prisms):
        ring, h = pr.base, pr.height
        n = len(ring)
        for i in range(n):
            a, b = ring[i], ring[(i + 1) % n]
            dx, dy = b - a
            length = math.hypot(dx, dy)
            corners = [(a[0], a[1], 0.0), (b[0], b[1], 0.0), (b[0], b[1], h), (a[0], a[1], h)]
            add_face("wall", row, (dy / length, -dx / length, 0.0), corners, [(0, 1, 2), (0, 2, 3)])
        roof = [(x, y, h) for x, y in ring]
        add_face("roof", row, (0.0, 0.0, 1.0), roof, poly.ear_clip(ring))

    bounds = None
    if ground:
        xy = [pr.base for pr in prisms]
        if cover is not None:
            pts = np.array([_as_array(p, origin) for p in cover]).reshape(-1, 3)
            if len(pts):
                xy.append(pts[:, :2])
        if xy:
            allxy = np.vstack(xy)
            lo, hi = allxy.min(axis=0), allxy.max(axis=0)
        else:
            lo, hi = np.zeros(2), np.zeros(2)
        x0, y0 = lo - ground_margin
        x1, y1 = hi + ground_margin
        bounds = (float(x0), float(y0), float(x1), float(y1))
        corners = [(x0, y0, 0.0), (x1, y0, 0.0), (x1, y1, 0.0), (x0, y1, 0.0)]
        add_face("ground", -1, (0.0, 0.0, 1.0), corners, [(0, 1, 2), (0, 2, 3)])

    vertices = np.array(tris, dtype=float).reshape(-1, 3, 3)
    width = max((len(r) for r in face_tris), default=1)
    padded = np.full((len(face_tris), width), -1, dtype=np.int64)
    for f, rows in enumerate(face_tris):
        padded[f, : len(rows)] = rows

    scene = Scene(
        origin=origin,
        prisms=tuple(prisms),
        material=material,
        ground_bounds=bounds,
        index=TriangleIndex(vertices, backend=backend),
        tri_face=np.array(tri_face, dtype=np.int64),
        face_normal=np.array(normals, dtype=float).reshape(-1, 3),
        face_point=np.array(points, dtype=float).reshape(-1, 3),
        face_prism=np.array(face_prism, dtype=np.int64),
        face_kind=tuple(kinds),
        face_tris=padded,
        epsilon=epsilon,
    )
    object.__setattr__(scene, "key", _scene_key(scene))
    return scene


def _scene_key(scene: Scene) -> str:
    import hashlib

    h = hashlib.sha256()
    h.update(np.ascontiguousarray(scene.index.vertices).tobytes())
    h.update(json.dumps(scene.material.to_dict(), sort_keys=True).encode())
    h.update(repr(scene.epsilon).encode())
    return h.hexdigest()[:16]


def first_hit(scene: Scene, ray_origin, ray_dir, t_max: float = math.inf) -> Hit | None:
    """Nearest surface along a ray, ignoring the first ``scene.epsilon`` meters."""
    o = _as_array(ray_origin)
    d = _as_array(ray_dir)
    if abs(float(np.linalg.norm(d)) - 1.0) > 1e-9:
        raise ValueError("ray direction must be a unit vector")
    t, tri = scene.index.first_hits(o[None], d[None], np.array([t_max]), scene.epsilon)
    if tri[0] < 0:
        return None
    face = int(scene.tri_face[tri[0]])
    return Hit(
        t=float(t[0]),
        point=o + t[0] * d,
        normal=scene.face_normal[face].copy(),
        material=scene.material,
        prism_id=scene.prism_label(face),
        face=face,
    )


def is_los(scene: Scene, a, b) -> bool:
    """True when nothing blocks the open segment between ``a`` and ``b``.

    Symmetric by construction: the segment is always cast from the
    lexicographically smaller endpoint.
    """
    pa, pb = _as_array(a), _as_array(b)
    if tuple(pb) < tuple(pa):
        pa, pb = pb, pa
    return bool(visible(scene, pa[None], pb[None])[0])


def visible(scene: Scene, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorised segment visibility between rows of ``a`` and ``b``.

    Both endpoints are excluded by ``scene.epsilon``.  Segments shorter than
    ``2 * epsilon`` count as visible.
    """
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.broadcast_to(np.asarray(b, dtype=float).reshape(-1, 3), a.shape)
    d = b - a
    length = np.linalg.norm(d, axis=1)
    out = np.ones(len(a), dtype=bool)
    ok = length > 2 * scene.epsilon
    if ok.any():
        dirs = d[ok] / length[ok, None]
        out[ok] = ~scene.index.occluded(a[ok], dirs, length[ok] - scene.epsilon, scene.epsilon)
    return out


def crossings(scene: Scene, a, b) -> list[tuple[int, np.ndarray]]:
    """``(face, point)`` for every face crossed by the open segment ``a -> b``, in order."""
    pa, pb = _as_array(a), _as_array(b)
    d = pb - pa
    length = float(np.linalg.norm(d))
    if length <= 2 * scene.epsilon:
        return []
    d = d / length
    out: list[tuple[int, np.ndarray]] = []
    start = 0.0
    origin = pa
    # each planar face is crossed at most once by a straight segment
    for _ in range(scene.n_faces + 1):
        t, tri = scene.index.first_hits(origin[None], d[None], np.array([length - start - scene.epsilon]),
                                        scene.epsilon)
        if tri[0] < 0:
            break
        start += float(t[0])
        origin = pa + start * d
        f = int(scene.tri_face[tri[0]])
        if not out or out[-1][0] != f:
            out.append((f, origin.copy()))
    return out


# --------------------------------------------------------------------- I/O


def _parse_levels(value) -> int | None:
    if value is None:
        return None
    try:
        levels = float(str(value).strip())
    except ValueError:
        return None
    if levels <= 0 or levels != int(levels):
        return None
    return int(levels)


def load_footprints(path: str | os.PathLike) -> list[Footprint]:
    """Read a GeoJSON FeatureCollection of building polygons.

    ``building:levels`` becomes ``floors``.  Polygons with holes and
    multi-part geometries are rejected.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise ValueError(f"{path}: expected a GeoJSON FeatureCollection")
    out = []
    for i, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        fid = feat.get("id", props.get("id", props.get("@id", f"feature-{i}")))
        fid = str(fid)
        geom = feat.get("geometry") or {}
        kind = geom.get("type")
        coords = geom.get("coordinates")
        if kind == "MultiPolygon" and coords is not None and len(coords) == 1:
            kind, coords = "Polygon", coords[0]
        if kind != "Polygon":
            raise FootprintError(fid, f"unsupported geometry type {kind!r}")
        if len(coords) != 1:
            raise FootprintError(fid, "polygons with holes are not supported")
        try:
            ring = tuple(GeoPoint(float(c[1]), float(c[0])) for c in coords[0])
        except ValueError as exc:
            raise FootprintError(fid, str(exc)) from None
        out.append(Footprint(fid, ring, _parse_levels(props.get("building:levels"))))
    return out


def export_obj(scene: Scene, path: str | os.PathLike) -> None:
    """Write one OBJ object per prism plus the ground."""
    lines = [f"# urbanray scene {scene.key}"]
    groups: dict[int, list[int]] = {}
    for f in range(scene.n_faces):
        groups.setdefault(int(scene.face_prism[f]), []).append(f)
    vcount = 0
    for prow in sorted(groups, key=lambda p: (p < 0, p)):
        name = GROUND if prow < 0 else scene.prisms[prow].id
        lines.append(f"o {name}")
        for f in groups[prow]:
            for tri in scene.face_tris[f]:
                if tri < 0:
                    continue
                for v in scene.index.vertices[tri]:
                    lines.append(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
                lines.append(f"f {vcount + 1} {vcount + 2} {vcount + 3}")
                vcount += 3
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Triangles per object from an OBJ file written by :func:`export_obj`."""
    verts: list[tuple[float, float, float]] = []
    objects: dict[str, list] = {}
    current = "default"
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "o":
            current = " ".join(parts[1:])
            objects.setdefault(current, [])
        elif parts[0] == "v":
            verts.append(tuple(float(x) for x in parts[1:4]))
        elif parts[0] == "f":
            ids = [int(p.split("/")[0]) - 1 for p in parts[1:]]
            for k in range(1, len(ids) - 1):
                objects.setdefault(current, []).append([verts[ids[0]], verts[ids[k]], verts[ids[k + 1]]])
    return {k: np.array(v, dtype=float).reshape(-1, 3, 3) for k, v in objects.items()}
