"""Planar polygon helpers used when extruding footprints."""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


def signed_area(ring: np.ndarray) -> float:
    """Shoelace area of an open ring (positive when counter-clockwise)."""
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def normalize_ring(ring) -> np.ndarray:
    """Open, counter-clockwise ring with duplicate and collinear vertices removed.

    Accepts closed or open input.  Raises ``ValueError`` for rings that
    collapse to fewer than three distinct corners.
    """
    pts = np.asarray(ring, dtype=float)[:, :2]
    if len(pts) > 1 and np.allclose(pts[0], pts[-1], atol=1e-9, rtol=0.0):
        pts = pts[:-1]
    keep = [p for i, p in enumerate(pts) if i == 0 or not np.allclose(p, pts[i - 1], atol=1e-9, rtol=0.0)]
    pts = np.array(keep).reshape(-1, 2)
    if len(pts) > 1 and np.allclose(pts[0], pts[-1], atol=1e-9, rtol=0.0):
        pts = pts[:-1]

    changed = True
    while changed and len(pts) >= 3:
        changed = False
        n = len(pts)
        for i in range(n):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n]
            cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            scale = max(np.linalg.norm(b - a) * np.linalg.norm(c - b), _EPS)
            if abs(cross) / scale < 1e-10:
                pts = np.delete(pts, i, axis=0)
                changed = True
                break
    if len(pts) < 3:
        raise ValueError("polygon is degenerate (fewer than 3 distinct corners)")
    area = signed_area(pts)
    if abs(area) < 1e-9:
        raise ValueError("polygon has zero area")
    if area < 0:
        pts = pts[::-1].copy()
    return pts


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p) -> bool:
    return (min(a[0], b[0]) - 1e-12 <= p[0] <= max(a[0], b[0]) + 1e-12
            and min(a[1], b[1]) - 1e-12 <= p[1] <= max(a[1], b[1]) + 1e-12)


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and _on_segment(q1, q2, p1):
        return True
    if d2 == 0 and _on_segment(q1, q2, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, q1):
        return True
    if d4 == 0 and _on_segment(p1, p2, q2):
        return True
    return False


def is_simple(ring: np.ndarray) -> bool:
    """True when no two non-adjacent edges of the open ring touch."""
    n = len(ring)
    for i in range(n):
        a1, a2 = ring[i], ring[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a1, a2, ring[j], ring[(j + 1) % n]):
                return False
    return True


def _point_in_triangle(p, a, b, c) -> bool:
    return _orient(a, b, p) >= 0 and _orient(b, c, p) >= 0 and _orient(c, a, p) >= 0


def ear_clip(ring: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple counter-clockwise ring.

    Returns index triples into ``ring``, each counter-clockwise.  The ring
    must already have passed :func:`normalize_ring` and :func:`is_simple`.
    """
    idx = list(range(len(ring)))
    tris: list[tuple[int, int, int]] = []
    guard = 0
    while len(idx) > 3:
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = ring[i0], ring[i1], ring[i2]
            if _orient(a, b, c) <= 0:
                continue
            if any(_point_in_triangle(ring[j], a, b, c) for j in idx if j not in (i0, i1, i2)):
                continue
            tris.append((i0, i1, i2))
            del idx[k]
            break
        else:
            guard += 1
            if guard > 1:
                raise ValueError("ear clipping failed; polygon is not simple")
            continue
    tris.append((idx[0], idx[1], idx[2]))
    return tris


def point_in_ring(p, ring: np.ndarray) -> bool:
    """Even-odd test for a 2-D point against an open ring."""
    x, y = p[0], p[1]
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside
