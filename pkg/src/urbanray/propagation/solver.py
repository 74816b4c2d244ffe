"""Path enumeration between one transmitter and one receiver.

Specular paths of order 1 and 2 come from the image method over every
face (order 2 over every ordered face pair), so they are exact and do not
depend on the random stream.  Deeper specular paths are found by shooting
``samples_per_src`` rays from the transmitter, recording the face sequence
each ray reflects off, and validating every distinct sequence with the
same image-method routine.

Diffuse paths are single-bounce.  The first surface hit of every shot ray
deposits ``|Gamma|^2 * S^2 / N`` of the transmit power; hits are pooled
into ``diffuse_cell_size`` tiles per face and each tile re-radiates as a
Lambertian scatterer toward the receiver.

With refraction enabled, a blocked line of sight yields one transmitted
path straight through every face on the segment.

Any interaction requires ``max_depth >= 1``.
"""

from __future__ import annotations

import enum
import hashlib
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..scene import Scene, crossings, visible
from .config import SolverConfig
from .physics import (
    diffuse_loss_db,
    fspl_db,
    reflection_power,
    specular_split,
    transmission_loss_db,
)

_SIDE_TOL = 1e-9
_INSIDE_TOL = 1e-9
_RAY_CHUNK = 1 << 16
_PAIR_CHUNK = 1 << 16


class PathKind(str, enum.Enum):
    LOS = "LOS"
    SPECULAR = "SPECULAR"
    DIFFUSE = "DIFFUSE"
    TRANSMITTED = "TRANSMITTED"
    MIXED = "MIXED"


_KIND_CODES = {PathKind.LOS: 0, PathKind.SPECULAR: 1, PathKind.DIFFUSE: 2, PathKind.TRANSMITTED: 3, PathKind.MIXED: 4}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


@dataclass(frozen=True)
class PathRecord:
    """One propagation path.

    ``departure_dir`` points from the transmitter toward the first vertex;
    ``arrival_dir`` points from the receiver back toward the last vertex,
    i.e. the direction the receive antenna must look.
    """

    kind: PathKind
    vertices: np.ndarray
    total_length: float
    departure_dir: np.ndarray
    arrival_dir: np.ndarray
    path_gain_db: float
    faces: tuple[int, ...] = ()


@dataclass
class SourceTrace:
    """Everything shot from one transmitter, reusable for every receiver."""

    tx: np.ndarray
    n_rays: int
    cell_pos: np.ndarray  # (C, 3)
    cell_normal: np.ndarray  # (C, 3)
    cell_power: np.ndarray  # (C,) share of isotropic tx power re-radiated
    deep_sequences: dict  # depth -> (S, depth) face sequences found by shooting


@dataclass
class LinkPaths:
    """Per-link path arrays, strongest first."""

    kind: np.ndarray
    gain_db: np.ndarray
    length: np.ndarray
    departure: np.ndarray
    arrival: np.ndarray
    vertices: list | None = None
    faces: list | None = None

    def __len__(self) -> int:
        return len(self.gain_db)


# ---------------------------------------------------------------- sampling


def derive_seed(root: int, *labels) -> int:
    """Stable 63-bit seed from a root seed and any labels."""
    h = hashlib.sha256(repr((int(root),) + tuple(str(x) for x in labels)).encode())
    return int.from_bytes(h.digest()[:8], "little") >> 1


def sphere_directions(n: int, seed: int) -> np.ndarray:
    """Fibonacci lattice on the unit sphere under a seeded random rotation."""
    rng = np.random.default_rng(seed)
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * (np.pi * (3.0 - np.sqrt(5.0))) + rng.uniform(0.0, 2.0 * np.pi)
    dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, zq = q
    rot = np.array([
        [1 - 2 * (y * y + zq * zq), 2 * (x * y - zq * w), 2 * (x * zq + y * w)],
        [2 * (x * y + zq * w), 1 - 2 * (x * x + zq * zq), 2 * (y * zq - x * w)],
        [2 * (x * zq - y * w), 2 * (y * zq + x * w), 1 - 2 * (x * x + y * y)],
    ])
    dirs = dirs @ rot.T
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


# ---------------------------------------------------------------- shooting


def _face_basis(normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    up = np.array([0.0, 0.0, 1.0])
    u = np.cross(up, normals)
    norm = np.linalg.norm(u, axis=1)
    horiz = norm < 1e-9
    u[horiz] = [1.0, 0.0, 0.0]
    u[~horiz] /= norm[~horiz, None]
    v = np.cross(normals, u)
    return u, v


def trace_source(scene: Scene, tx, cfg: SolverConfig, seed: int) -> SourceTrace:
    tx = np.asarray(tx, dtype=float).reshape(3)
    n = cfg.samples_per_src
    want_diffuse = cfg.diffuse_reflection and cfg.max_depth >= 1 and scene.n_faces > 0
    want_deep = cfg.specular_reflection and cfg.max_depth >= 3 and scene.n_faces > 0
    empty = SourceTrace(tx, n, np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), {})
    if not (want_diffuse or want_deep):
        return empty

    dirs_all = sphere_directions(n, seed)
    eps = scene.epsilon
    hit_face_parts, hit_pos_parts, hit_w_parts = [], [], []
    seq_parts: dict[int, list] = {}
    s2 = cfg.scattering_coefficient ** 2

    for c0 in range(0, n, _RAY_CHUNK):
        d = dirs_all[c0:c0 + _RAY_CHUNK]
        o = np.broadcast_to(tx, d.shape).copy()
        alive = np.ones(len(d), dtype=bool)
        seq = np.full((len(d), max(cfg.max_depth, 1)), -1, dtype=np.int64)
        depth_limit = cfg.max_depth if want_deep else 1
        for depth in range(depth_limit):
            idx = np.flatnonzero(alive)
            if len(idx) == 0:
                break
            t, tri = scene.index.first_hits(o[idx], d[idx], np.inf, eps)
            hit = tri >= 0
            alive[idx[~hit]] = False
            idx, t, tri = idx[hit], t[hit], tri[hit]
            faces = scene.tri_face[tri]
            nrm = scene.face_normal[faces]
            cos_in = -np.einsum("ij,ij->i", d[idx], nrm)
            front = cos_in > 0
            alive[idx[~front]] = False
            idx, t, faces, nrm, cos_in = idx[front], t[front], faces[front], nrm[front], cos_in[front]
            pos = o[idx] + t[:, None] * d[idx]
            seq[idx, depth] = faces
            if depth == 0 and want_diffuse:
                w = reflection_power(scene.material, cfg.frequency, cos_in) * s2 / n
                hit_face_parts.append(faces)
                hit_pos_parts.append(pos)
                hit_w_parts.append(w)
            # specular continuation, offset along the normal
            d[idx] = d[idx] + 2.0 * cos_in[:, None] * nrm
            d[idx] /= np.linalg.norm(d[idx], axis=1, keepdims=True)
            o[idx] = pos + eps * nrm
        if want_deep:
            for depth in range(3, cfg.max_depth + 1):
                rows = seq[:, :depth]
                rows = rows[(rows >= 0).all(axis=1)]
                if len(rows):
                    seq_parts.setdefault(depth, []).append(rows)

    deep = {}
    for depth, parts in seq_parts.items():
        rows = np.unique(np.vstack(parts), axis=0)
        ok = (rows[:, 1:] != rows[:, :-1]).all(axis=1)
        deep[depth] = rows[ok]

    if hit_face_parts:
        faces = np.concatenate(hit_face_parts)
        pos = np.vstack(hit_pos_parts)
        w = np.concatenate(hit_w_parts)
        cell_pos, cell_normal, cell_power = _pool_cells(scene, faces, pos, w, cfg.diffuse_cell_size)
    else:
        cell_pos, cell_normal, cell_power = empty.cell_pos, empty.cell_normal, empty.cell_power
    return SourceTrace(tx, n, cell_pos, cell_normal, cell_power, deep)


def _pool_cells(scene: Scene, faces, pos, w, cell_size):
    if len(faces) == 0:
        return np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0)
    if cell_size <= 0:
        return pos, scene.face_normal[faces], w
    u, v = _face_basis(scene.face_normal)
    cu = np.floor(np.einsum("ij,ij->i", pos, u[faces]) / cell_size).astype(np.int64)
    cv = np.floor(np.einsum("ij,ij->i", pos, v[faces]) / cell_size).astype(np.int64)
    keys = np.stack([faces, cu, cv], axis=1)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    power = np.bincount(inv, weights=w, minlength=len(uniq))
    centroid = np.stack([np.bincount(inv, weights=w * pos[:, k], minlength=len(uniq)) for k in range(3)], axis=1)
    keep = power > 0
    centroid = centroid[keep] / power[keep, None]
    return centroid, scene.face_normal[uniq[keep, 0]], power[keep]


_TRACE_CACHE: "OrderedDict[tuple, SourceTrace]" = OrderedDict()
_TRACE_LOCK = threading.Lock()
_TRACE_CACHE_SIZE = 32


def cached_trace(scene: Scene, tx, cfg: SolverConfig, seed: int) -> SourceTrace:
    tx = np.asarray(tx, dtype=float).reshape(3)
    key = (scene.key, tuple(tx.tolist()), cfg.key(), int(seed))
    with _TRACE_LOCK:
        hit = _TRACE_CACHE.get(key)
        if hit is not None:
            _TRACE_CACHE.move_to_end(key)
            return hit
    tr = trace_source(scene, tx, cfg, seed)
    with _TRACE_LOCK:
        _TRACE_CACHE[key] = tr
        while len(_TRACE_CACHE) > _TRACE_CACHE_SIZE:
            _TRACE_CACHE.popitem(last=False)
    return tr


# ---------------------------------------------------------- image method


def _contains(scene: Scene, faces: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Whether each point (already on its face's plane) lies inside that face."""
    rows = scene.face_tris[faces]  # (C, K)
    valid = rows >= 0
    tri = scene.index.vertices[np.where(valid, rows, 0)]  # (C, K, 3, 3)
    a = tri[:, :, 0]
    e0 = tri[:, :, 1] - a
    e1 = tri[:, :, 2] - a
    e2 = pts[:, None, :] - a
    d00 = np.einsum("ckj,ckj->ck", e0, e0)
    d01 = np.einsum("ckj,ckj->ck", e0, e1)
    d11 = np.einsum("ckj,ckj->ck", e1, e1)
    d20 = np.einsum("ckj,ckj->ck", e2, e0)
    d21 = np.einsum("ckj,ckj->ck", e2, e1)
    denom = d00 * d11 - d01 * d01
    bv = (d11 * d20 - d01 * d21) / denom
    bw = (d00 * d21 - d01 * d20) / denom
    bu = 1.0 - bv - bw
    inside = (bu >= -_INSIDE_TOL) & (bv >= -_INSIDE_TOL) & (bw >= -_INSIDE_TOL) & valid
    return inside.any(axis=1)


def validate_sequences(scene: Scene, tx, rx, seqs: np.ndarray):
    """Exact specular paths for candidate face sequences.

    Returns ``(seqs, points)`` for the sequences that produce a valid,
    unobstructed path; ``points`` has shape ``(S, depth, 3)``.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    seqs = np.asarray(seqs, dtype=np.int64)
    if seqs.ndim != 2 or len(seqs) == 0:
        depth = seqs.shape[1] if seqs.ndim == 2 else 0
        return seqs.reshape(0, depth), np.zeros((0, depth, 3))
    c, depth = seqs.shape
    nrm = scene.face_normal[seqs]
    p0 = scene.face_point[seqs]
    ok = np.ones(c, dtype=bool)

    images = np.empty((c, depth + 1, 3))
    images[:, 0] = tx
    for j in range(depth):
        s = np.einsum("ij,ij->i", images[:, j] - p0[:, j], nrm[:, j])
        ok &= s > _SIDE_TOL
        images[:, j + 1] = images[:, j] - 2.0 * s[:, None] * nrm[:, j]

    pts = np.empty((c, depth, 3))
    target = np.broadcast_to(rx, (c, 3)).copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(depth - 1, -1, -1):
            st = np.einsum("ij,ij->i", target - p0[:, j], nrm[:, j])
            si = np.einsum("ij,ij->i", images[:, j + 1] - p0[:, j], nrm[:, j])
            ok &= (st > _SIDE_TOL) & (si < -_SIDE_TOL)
            lam = si / (si - st)
            q = images[:, j + 1] + lam[:, None] * (target - images[:, j + 1])
            # snap onto the plane to stop drift across bounces
            q -= np.einsum("ij,ij->i", q - p0[:, j], nrm[:, j])[:, None] * nrm[:, j]
            pts[:, j] = q
            target = q
    ok &= np.isfinite(pts).all(axis=(1, 2))
    if not ok.any():
        return seqs[:0], pts[:0]
    seqs, pts, nrm, p0 = seqs[ok], pts[ok], nrm[ok], p0[ok]

    verts = np.concatenate([np.broadcast_to(tx, (len(seqs), 1, 3)), pts, np.broadcast_to(rx, (len(seqs), 1, 3))], axis=1)
    keep = np.ones(len(seqs), dtype=bool)
    for j in range(depth):
        keep &= _contains(scene, seqs[:, j], pts[:, j])
        before = np.einsum("ij,ij->i", verts[:, j] - p0[:, j], nrm[:, j])
        after = np.einsum("ij,ij->i", verts[:, j + 2] - p0[:, j], nrm[:, j])
        keep &= (before > _SIDE_TOL) & (after > _SIDE_TOL)
    seqs, pts, verts = seqs[keep], pts[keep], verts[keep]
    if len(seqs) == 0:
        return seqs, pts
    vis = np.ones(len(seqs), dtype=bool)
    for j in range(depth + 1):
        idx = np.flatnonzero(vis)
        if len(idx) == 0:
            break
        vis[idx] = visible(scene, verts[idx, j], verts[idx, j + 1])
    return seqs[vis], pts[vis]


def _depth1(scene: Scene, tx, rx):
    n = scene.face_normal
    s_tx = np.einsum("ij,ij->i", tx - scene.face_point, n)
    s_rx = np.einsum("ij,ij->i", rx - scene.face_point, n)
    faces = np.flatnonzero((s_tx > _SIDE_TOL) & (s_rx > _SIDE_TOL))
    return validate_sequences(scene, tx, rx, faces[:, None])


def _depth2(scene: Scene, tx, rx):
    n = scene.face_normal
    p = scene.face_point
    s_tx = np.einsum("ij,ij->i", tx - p, n)
    s_rx = np.einsum("ij,ij->i", rx - p, n)
    first = np.flatnonzero(s_tx > _SIDE_TOL)
    second = np.flatnonzero(s_rx > _SIDE_TOL)
    if len(first) == 0 or len(second) == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros((0, 2, 3))
    img = tx - 2.0 * s_tx[first, None] * n[first]  # (A, 3)
    # image must sit in front of the second face
    s_img = img @ n[second].T - np.einsum("ij,ij->i", p[second], n[second])[None, :]
    a_idx, b_idx = np.nonzero(s_img > _SIDE_TOL)
    pairs = np.stack([first[a_idx], second[b_idx]], axis=1)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    out_s, out_p = [], []
    for c0 in range(0, len(pairs), _PAIR_CHUNK):
        s, q = validate_sequences(scene, tx, rx, pairs[c0:c0 + _PAIR_CHUNK])
        out_s.append(s)
        out_p.append(q)
    if not out_s:
        return np.zeros((0, 2), dtype=np.int64), np.zeros((0, 2, 3))
    return np.vstack(out_s), np.vstack(out_p)


# -------------------------------------------------------------- per link


def _specular_paths(scene, tx, rx, seqs, pts, cfg):
    c, depth = seqs.shape
    verts = np.concatenate([np.broadcast_to(tx, (c, 1, 3)), pts, np.broadcast_to(rx, (c, 1, 3))], axis=1)
    legs = np.diff(verts, axis=1)
    leg_len = np.linalg.norm(legs, axis=2)
    length = leg_len.sum(axis=1)
    gain = -fspl_db(length, cfg.frequency)
    split = specular_split(cfg)
    for j in range(depth):
        cos_in = np.abs(np.einsum("ij,ij->i", legs[:, j] / leg_len[:, j, None], scene.face_normal[seqs[:, j]]))
        with np.errstate(divide="ignore"):
            gain = gain + 10.0 * np.log10(reflection_power(scene.material, cfg.frequency, cos_in) * split)
    dep = legs[:, 0] / leg_len[:, 0, None]
    arr = -legs[:, -1] / leg_len[:, -1, None]
    return verts, length, gain, dep, arr


def link_paths(scene: Scene, trace: SourceTrace, rx, cfg: SolverConfig, records: bool = False) -> LinkPaths:
    tx = trace.tx
    rx = np.asarray(rx, dtype=float).reshape(3)
    kinds, gains, lengths, deps, arrs = [], [], [], [], []
    verts_out: list = []
    faces_out: list = []

    d = rx - tx
    dist = float(np.linalg.norm(d))
    if dist <= 0:
        raise ValueError("transmitter and receiver coincide")
    los = bool(visible(scene, tx[None], rx[None])[0])
    if los:
        kinds.append(np.array([_KIND_CODES[PathKind.LOS]]))
        gains.append(-fspl_db(np.array([dist]), cfg.frequency))
        lengths.append(np.array([dist]))
        deps.append((d / dist)[None])
        arrs.append((-d / dist)[None])
        if records:
            verts_out.append(np.array([tx, rx]))
            faces_out.append(())

    if cfg.max_depth >= 1 and scene.n_faces > 0:
        if cfg.specular_reflection:
            found = [_depth1(scene, tx, rx)]
            if cfg.max_depth >= 2:
                found.append(_depth2(scene, tx, rx))
            for depth in range(3, cfg.max_depth + 1):
                cand = trace.deep_sequences.get(depth)
                if cand is not None and len(cand):
                    found.append(validate_sequences(scene, tx, rx, cand))
            for seqs, pts in found:
                if len(seqs) == 0:
                    continue
                v, length, gain, dep, arr = _specular_paths(scene, tx, rx, seqs, pts, cfg)
                kinds.append(np.full(len(seqs), _KIND_CODES[PathKind.SPECULAR]))
                gains.append(gain)
                lengths.append(length)
                deps.append(dep)
                arrs.append(arr)
                if records:
                    verts_out.extend(list(v))
                    faces_out.extend(tuple(int(f) for f in s) for s in seqs)

        if cfg.diffuse_reflection and len(trace.cell_power):
            p = trace.cell_pos
            nrm = trace.cell_normal
            out = rx - p
            r_out = np.linalg.norm(out, axis=1)
            cos_s = np.einsum("ij,ij->i", out, nrm) / np.maximum(r_out, 1e-300)
            cand = np.flatnonzero((cos_s > 0) & (r_out > 2 * scene.epsilon))
            if len(cand):
                start = p[cand] + scene.epsilon * nrm[cand]
                vis = visible(scene, start, np.broadcast_to(rx, start.shape))
                cand = cand[vis]
            if len(cand):
                inc = p[cand] - tx
                r_in = np.linalg.norm(inc, axis=1)
                length = r_in + r_out[cand]
                loss = diffuse_loss_db(trace.cell_power[cand], cos_s[cand], r_in, r_out[cand], cfg.frequency)
                gain = -fspl_db(length, cfg.frequency) + loss
                kinds.append(np.full(len(cand), _KIND_CODES[PathKind.DIFFUSE]))
                gains.append(gain)
                lengths.append(length)
                deps.append(inc / r_in[:, None])
                arrs.append(-out[cand] / r_out[cand, None])
                if records:
                    verts_out.extend(np.array([tx, q, rx]) for q in p[cand])
                    faces_out.extend(() for _ in cand)

        if cfg.refraction and not los:
            hits = crossings(scene, tx, rx)
            if hits:
                loss = transmission_loss_db(scene.material, cfg) * len(hits)
                kinds.append(np.array([_KIND_CODES[PathKind.TRANSMITTED]]))
                gains.append(-fspl_db(np.array([dist]), cfg.frequency) + loss)
                lengths.append(np.array([dist]))
                deps.append((d / dist)[None])
                arrs.append((-d / dist)[None])
                if records:
                    verts_out.append(np.vstack([tx] + [q for _, q in hits] + [rx]))
                    faces_out.append(tuple(f for f, _ in hits))

    if not gains:
        z = np.zeros(0)
        return LinkPaths(np.zeros(0, dtype=np.int64), z, z, np.zeros((0, 3)), np.zeros((0, 3)),
                         [] if records else None, [] if records else None)

    kind = np.concatenate(kinds).astype(np.int64)
    gain = np.concatenate(gains)
    length = np.concatenate(lengths)
    dep = np.vstack(deps)
    arr = np.vstack(arrs)
    # strongest first; equal gains keep enumeration order
    order = np.argsort(-gain, kind="stable")[: cfg.max_num_paths_per_src]
    lp = LinkPaths(kind[order], gain[order], length[order], dep[order], arr[order])
    if records:
        lp.vertices = [verts_out[i] for i in order]
        lp.faces = [faces_out[i] for i in order]
    return lp


def solve_paths(scene: Scene, tx, rx, cfg: SolverConfig, seed: int) -> list[PathRecord]:
    """All paths from ``tx`` to ``rx`` (ENU), strongest first, capped at ``max_num_paths_per_src``."""
    tx = np.asarray(tx.as_array() if hasattr(tx, "as_array") else tx, dtype=float)
    rx = np.asarray(rx.as_array() if hasattr(rx, "as_array") else rx, dtype=float)
    trace = cached_trace(scene, tx, cfg, seed)
    lp = link_paths(scene, trace, rx, cfg, records=True)
    return [
        PathRecord(
            kind=_CODE_KINDS[int(lp.kind[i])],
            vertices=lp.vertices[i],
            total_length=float(lp.length[i]),
            departure_dir=lp.departure[i],
            arrival_dir=lp.arrival[i],
            path_gain_db=float(lp.gain_db[i]),
            faces=lp.faces[i],
        )
        for i in range(len(lp))
    ]
