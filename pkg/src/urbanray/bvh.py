"""Bounding-volume hierarchy over triangles, plus a brute-force reference."""

from __future__ import annotations

import numpy as np

from . import kernels

LEAF_SIZE = 4
BOX_PAD = 1e-7


class TriangleIndex:
    """Nearest-hit queries over a fixed triangle soup.

    Triangles are identified by their row in ``vertices``; ties in hit
    distance go to the lower row so results never depend on the tree layout.
    """

    def __init__(self, vertices: np.ndarray, backend: str | None = None):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3, 3)
        self.vertices = vertices
        self.v0 = np.ascontiguousarray(vertices[:, 0])
        self.e1 = np.ascontiguousarray(vertices[:, 1] - vertices[:, 0])
        self.e2 = np.ascontiguousarray(vertices[:, 2] - vertices[:, 0])
        n = np.cross(self.e1, self.e2)
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        if np.any(norm == 0):
            raise ValueError("degenerate triangle in index")
        self.normals = np.ascontiguousarray(n / norm)
        self._nodes = _build(vertices)
        self._backend = backend

    @property
    def n_triangles(self) -> int:
        return len(self.vertices)

    @property
    def n_nodes(self) -> int:
        return len(self._nodes[0])

    def _arrays(self):
        lo, hi, left, right, start, count, prim = self._nodes
        return (self.v0, self.e1, self.e2, self.normals, lo, hi, left, right, start, count, prim)

    def first_hits(self, origins, dirs, tmax, tmin: float):
        """Nearest hit distance and triangle row per ray (``inf``/``-1`` on miss)."""
        origins, dirs, tmax = _prep(origins, dirs, tmax)
        return kernels.get_backend(self._backend).first_hits(self._arrays(), origins, dirs, tmin, tmax)

    def occluded(self, origins, dirs, tmax, tmin: float) -> np.ndarray:
        origins, dirs, tmax = _prep(origins, dirs, tmax)
        return kernels.get_backend(self._backend).any_hits(self._arrays(), origins, dirs, tmin, tmax)

    def with_backend(self, backend: str | None) -> "TriangleIndex":
        clone = object.__new__(TriangleIndex)
        clone.__dict__.update(self.__dict__)
        clone._backend = backend
        return clone


def _prep(origins, dirs, tmax):
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    tmax = np.ascontiguousarray(np.broadcast_to(np.asarray(tmax, dtype=np.float64), (len(origins),)))
    return origins, dirs, tmax


def _build(vertices: np.ndarray):
    n = len(vertices)
    if n == 0:
        empty_f = np.zeros((0, 3))
        empty_i = np.zeros(0, dtype=np.int64)
        return empty_f, empty_f.copy(), empty_i, empty_i.copy(), empty_i.copy(), empty_i.copy(), empty_i.copy()
    tri_lo = vertices.min(axis=1)
    tri_hi = vertices.max(axis=1)
    centroids = vertices.mean(axis=1)

    lo, hi, left, right, start, count = [], [], [], [], [], []
    prim = np.arange(n, dtype=np.int64)

    def new_node():
        lo.append(None)
        hi.append(None)
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(lo) - 1

    root = new_node()
    work = [(root, 0, n)]
    while work:
        node, s, e = work.pop()
        ids = prim[s:e]
        lo[node] = tri_lo[ids].min(axis=0) - BOX_PAD
        hi[node] = tri_hi[ids].max(axis=0) + BOX_PAD
        if e - s <= LEAF_SIZE:
            start[node], count[node] = s, e - s
            continue
        c = centroids[ids]
        extent = c.max(axis=0) - c.min(axis=0)
        axis = int(np.argmax(extent))
        if extent[axis] == 0.0:
            start[node], count[node] = s, e - s
            continue
        # stable median split keeps the layout deterministic
        order = np.argsort(c[:, axis], kind="stable")
        prim[s:e] = ids[order]
        mid = s + (e - s) // 2
        l_node, r_node = new_node(), new_node()
        left[node], right[node] = l_node, r_node
        work.append((r_node, mid, e))
        work.append((l_node, s, mid))

    return (
        np.ascontiguousarray(np.array(lo, dtype=np.float64)),
        np.ascontiguousarray(np.array(hi, dtype=np.float64)),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(start, dtype=np.int64),
        np.array(count, dtype=np.int64),
        prim,
    )


def brute_force_first_hits(vertices, origins, dirs, tmax, tmin: float):
    """Test every triangle against every ray; reference for the indexed path.

    Uses the same Moller-Trumbore arithmetic as the kernels, vectorised
    over triangles.
    """
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3, 3)
    origins, dirs, tmax = _prep(origins, dirs, tmax)
    v0 = vertices[:, 0]
    e1 = vertices[:, 1] - v0
    e2 = vertices[:, 2] - v0
    nrm = np.cross(e1, e2)
    nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
    out_t = np.full(len(origins), np.inf)
    out_i = np.full(len(origins), -1, dtype=np.int64)
    if len(vertices) == 0:
        return out_t, out_i
    with np.errstate(divide="ignore", invalid="ignore"):
        for r in range(len(origins)):
            o, d = origins[r], dirs[r]
            par = np.abs(d[0] * nrm[:, 0] + d[1] * nrm[:, 1] + d[2] * nrm[:, 2]) < kernels.python_backend.PARALLEL_TOL
            px = d[1] * e2[:, 2] - d[2] * e2[:, 1]
            py = d[2] * e2[:, 0] - d[0] * e2[:, 2]
            pz = d[0] * e2[:, 1] - d[1] * e2[:, 0]
            det = e1[:, 0] * px + e1[:, 1] * py + e1[:, 2] * pz
            inv = 1.0 / det
            sx, sy, sz = o[0] - v0[:, 0], o[1] - v0[:, 1], o[2] - v0[:, 2]
            u = (sx * px + sy * py + sz * pz) * inv
            qx = sy * e1[:, 2] - sz * e1[:, 1]
            qy = sz * e1[:, 0] - sx * e1[:, 2]
            qz = sx * e1[:, 1] - sy * e1[:, 0]
            v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
            t = (e2[:, 0] * qx + e2[:, 1] * qy + e2[:, 2] * qz) * inv
            ok = (~par) & (det != 0.0) & (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0) & (t > tmin) & (t < tmax[r])
            if ok.any():
                cand = np.flatnonzero(ok)
                tc = t[cand]
                best = cand[tc == tc.min()].min()
                out_t[r], out_i[r] = t[best], best
    return out_t, out_i
