# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ray/BVH kernels.

Mirrors ``_pykernels`` operation for operation so both backends produce
bit-identical hit distances.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

cdef double PARALLEL_TOL = 1e-12
cdef enum:
    STACK_SIZE = 256


cdef inline bint _slab(const double* o, const double* inv, const bint* zero,
                       const double* lo, const double* hi,
                       double tmin, double tmax, double* tnear) noexcept nogil:
    cdef double t0 = tmin, t1 = tmax, ta, tb, tmp
    cdef int a
    for a in range(3):
        if zero[a]:
            if o[a] < lo[a] or o[a] > hi[a]:
                return False
            continue
        ta = (lo[a] - o[a]) * inv[a]
        tb = (hi[a] - o[a]) * inv[a]
        if ta > tb:
            tmp = ta
            ta = tb
            tb = tmp
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
        if t0 > t1:
            return False
    tnear[0] = t0
    return True


cdef inline bint _tri_t(const double* o, const double* d, const double* v0,
                        const double* e1, const double* e2, const double* n,
                        double tmin, double tmax, double* tout) noexcept nogil:
    cdef double px, py, pz, det, inv, sx, sy, sz, u, v, qx, qy, qz, t
    if fabs(d[0] * n[0] + d[1] * n[1] + d[2] * n[2]) < PARALLEL_TOL:
        return False
    px = d[1] * e2[2] - d[2] * e2[1]
    py = d[2] * e2[0] - d[0] * e2[2]
    pz = d[0] * e2[1] - d[1] * e2[0]
    det = e1[0] * px + e1[1] * py + e1[2] * pz
    if det == 0.0:
        return False
    inv = 1.0 / det
    sx = o[0] - v0[0]
    sy = o[1] - v0[1]
    sz = o[2] - v0[2]
    u = (sx * px + sy * py + sz * pz) * inv
    if u < 0.0 or u > 1.0:
        return False
    qx = sy * e1[2] - sz * e1[1]
    qy = sz * e1[0] - sx * e1[2]
    qz = sx * e1[1] - sy * e1[0]
    v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return False
    t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
    if t <= tmin or t > tmax:
        return False
    tout[0] = t
    return True


cdef void _trace(const double[:, ::1] v0s, const double[:, ::1] e1s,
                 const double[:, ::1] e2s, const double[:, ::1] ns,
                 const double[:, ::1] lo, const double[:, ::1] hi,
                 const cnp.int64_t[::1] left, const cnp.int64_t[::1] right,
                 const cnp.int64_t[::1] start, const cnp.int64_t[::1] count,
                 const cnp.int64_t[::1] prim,
                 const double[:, ::1] origins, const double[:, ::1] dirs,
                 double tmin, const double[::1] tmax, bint any_hit,
                 double[::1] out_t, cnp.int64_t[::1] out_i) noexcept nogil:
    cdef Py_ssize_t nrays = origins.shape[0]
    cdef Py_ssize_t r, k, s, c
    cdef cnp.int64_t node, l, rr, tri, best_i
    cdef cnp.int64_t stack[STACK_SIZE]
    cdef int sp, a
    cdef double o[3]
    cdef double d[3]
    cdef double inv[3]
    cdef bint zero[3]
    cdef double best_t, t, tn, tl, tr
    cdef bint hl, hr, done
    for r in range(nrays):
        for a in range(3):
            o[a] = origins[r, a]
            d[a] = dirs[r, a]
            zero[a] = d[a] == 0.0
            inv[a] = 0.0 if zero[a] else 1.0 / d[a]
        best_t = tmax[r]
        best_i = -1
        sp = 0
        stack[sp] = 0
        sp += 1
        done = False
        while sp > 0 and not done:
            sp -= 1
            node = stack[sp]
            if not _slab(o, inv, zero, &lo[node, 0], &hi[node, 0], tmin, best_t, &tn):
                continue
            c = count[node]
            if c > 0:
                s = start[node]
                for k in range(s, s + c):
                    tri = prim[k]
                    if not _tri_t(o, d, &v0s[tri, 0], &e1s[tri, 0], &e2s[tri, 0], &ns[tri, 0], tmin, best_t, &t):
                        continue
                    if t < best_t or (t == best_t and best_i >= 0 and tri < best_i):
                        best_t = t
                        best_i = tri
                        if any_hit:
                            done = True
                            break
            else:
                l = left[node]
                rr = right[node]
                hl = _slab(o, inv, zero, &lo[l, 0], &hi[l, 0], tmin, best_t, &tl)
                hr = _slab(o, inv, zero, &lo[rr, 0], &hi[rr, 0], tmin, best_t, &tr)
                if sp + 2 > STACK_SIZE:
                    # builder keeps depth far below STACK_SIZE
                    continue
                if hl and hr:
                    if tl <= tr:
                        stack[sp] = rr
                        stack[sp + 1] = l
                    else:
                        stack[sp] = l
                        stack[sp + 1] = rr
                    sp += 2
                elif hl:
                    stack[sp] = l
                    sp += 1
                elif hr:
                    stack[sp] = rr
                    sp += 1
        if best_i >= 0:
            out_t[r] = best_t
            out_i[r] = best_i
        else:
            out_t[r] = INFINITY
            out_i[r] = -1


def _run(arrays, origins, dirs, double tmin, tmax, bint any_hit):
    v0s, e1s, e2s, ns, lo, hi, left, right, start, count, prim = arrays
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    tmax = np.ascontiguousarray(tmax, dtype=np.float64)
    n = origins.shape[0]
    out_t = np.full(n, np.inf)
    out_i = np.full(n, -1, dtype=np.int64)
    if lo.shape[0] == 0 or n == 0:
        return out_t, out_i
    cdef double[::1] ot = out_t
    cdef cnp.int64_t[::1] oi = out_i
    cdef const double[:, ::1] v0v = v0s
    cdef const double[:, ::1] e1v = e1s
    cdef const double[:, ::1] e2v = e2s
    cdef const double[:, ::1] nv = ns
    cdef const double[:, ::1] lov = lo
    cdef const double[:, ::1] hiv = hi
    cdef const cnp.int64_t[::1] lv = left
    cdef const cnp.int64_t[::1] rv = right
    cdef const cnp.int64_t[::1] sv = start
    cdef const cnp.int64_t[::1] cv = count
    cdef const cnp.int64_t[::1] pv = prim
    cdef const double[:, ::1] ov = origins
    cdef const double[:, ::1] dv = dirs
    cdef const double[::1] tv = tmax
    with nogil:
        _trace(v0v, e1v, e2v, nv, lov, hiv, lv, rv, sv, cv, pv, ov, dv, tmin, tv, any_hit, ot, oi)
    return out_t, out_i


def first_hits(arrays, origins, dirs, tmin, tmax):
    """Nearest hit per ray: ``(t, triangle)``, ``(inf, -1)`` when none."""
    return _run(arrays, origins, dirs, tmin, tmax, False)


def any_hits(arrays, origins, dirs, tmin, tmax):
    """Boolean occlusion per ray."""
    _, idx = _run(arrays, origins, dirs, tmin, tmax, True)
    return idx >= 0
