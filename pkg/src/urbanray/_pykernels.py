"""Pure-Python ray/BVH kernels.

Same signatures and arithmetic as the compiled ``_ckernels`` module.  Used
when the extension is not built, or when ``URBANRAY_PURE=1`` is set.
"""

from __future__ import annotations

import numpy as np

PARALLEL_TOL = 1e-12


def _slab(o, inv, zero, lo, hi, tmin, tmax):
    t0, t1 = tmin, tmax
    for a in range(3):
        if zero[a]:
            if o[a] < lo[a] or o[a] > hi[a]:
                return None
            continue
        ta = (lo[a] - o[a]) * inv[a]
        tb = (hi[a] - o[a]) * inv[a]
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
        if t0 > t1:
            return None
    return t0


def _tri_t(o, d, v0, e1, e2, n, tmin, tmax):
    if abs(d[0] * n[0] + d[1] * n[1] + d[2] * n[2]) < PARALLEL_TOL:
        return None
    px = d[1] * e2[2] - d[2] * e2[1]
    py = d[2] * e2[0] - d[0] * e2[2]
    pz = d[0] * e2[1] - d[1] * e2[0]
    det = e1[0] * px + e1[1] * py + e1[2] * pz
    if det == 0.0:
        return None
    inv = 1.0 / det
    sx, sy, sz = o[0] - v0[0], o[1] - v0[1], o[2] - v0[2]
    u = (sx * px + sy * py + sz * pz) * inv
    if u < 0.0 or u > 1.0:
        return None
    qx = sy * e1[2] - sz * e1[1]
    qy = sz * e1[0] - sx * e1[2]
    qz = sx * e1[1] - sy * e1[0]
    v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return None
    t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
    if t <= tmin or t > tmax:
        return None
    return t


def _trace(arrays, origins, dirs, tmin, tmax, any_hit):
    v0s, e1s, e2s, ns, lo, hi, left, right, start, count, prim = arrays
    nrays = len(origins)
    out_t = np.full(nrays, np.inf)
    out_i = np.full(nrays, -1, dtype=np.int64)
    if len(lo) == 0:
        return out_t, out_i
    for r in range(nrays):
        o = origins[r]
        d = dirs[r]
        zero = [d[0] == 0.0, d[1] == 0.0, d[2] == 0.0]
        inv = [0.0 if zero[a] else 1.0 / d[a] for a in range(3)]
        best_t = tmax[r]
        best_i = -1
        stack = [0]
        while stack:
            node = stack.pop()
            tn = _slab(o, inv, zero, lo[node], hi[node], tmin, best_t)
            if tn is None:
                continue
            c = count[node]
            if c > 0:
                s = start[node]
                for k in range(s, s + c):
                    tri = prim[k]
                    t = _tri_t(o, d, v0s[tri], e1s[tri], e2s[tri], ns[tri], tmin, best_t)
                    if t is None:
                        continue
                    if t < best_t or (t == best_t and best_i >= 0 and tri < best_i):
                        best_t, best_i = t, tri
                        if any_hit:
                            break
                if any_hit and best_i >= 0:
                    break
            else:
                l, rr = left[node], right[node]
                tl = _slab(o, inv, zero, lo[l], hi[l], tmin, best_t)
                tr = _slab(o, inv, zero, lo[rr], hi[rr], tmin, best_t)
                if tl is not None and tr is not None:
                    if tl <= tr:
                        stack.append(rr)
                        stack.append(l)
                    else:
                        stack.append(l)
                        stack.append(rr)
                elif tl is not None:
                    stack.append(l)
                elif tr is not None:
                    stack.append(rr)
        if best_i >= 0:
            out_t[r] = best_t
            out_i[r] = best_i
    return out_t, out_i


def _as_lists(arrays):
    return tuple(a.tolist() for a in arrays)


def first_hits(arrays, origins, dirs, tmin, tmax):
    """Nearest hit per ray: ``(t, triangle)``, ``(inf, -1)`` when none."""
    return _trace(_as_lists(arrays), origins.tolist(), dirs.tolist(), float(tmin), tmax.tolist(), False)


def any_hits(arrays, origins, dirs, tmin, tmax):
    """Boolean occlusion per ray."""
    _, idx = _trace(_as_lists(arrays), origins.tolist(), dirs.tolist(), float(tmin), tmax.tolist(), True)
    return idx >= 0
