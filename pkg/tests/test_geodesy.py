import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urbanray.geodesy import (EARTH_RADIUS, EnuPoint, GeoPoint, bbox_centroid, enu_array, ground_distance, to_enu,
                              to_geo)

ONE_DEGREE = 2 * math.pi * 6_371_000.0 / 360.0  # 111 194.93 m


def test_origin_maps_to_zero_keeping_altitude():
    o = GeoPoint(41.9, 12.5, 7.0)
    p = to_enu(o, o)
    assert (p.x, p.y, p.z) == (0.0, 0.0, 7.0)


def test_one_degree_north():
    o = GeoPoint(10.0, 20.0)
    p = to_enu(GeoPoint(11.0, 20.0), o)
    # orthographic projection of a 1 degree arc is R*sin(1 deg)
    assert p.y == pytest.approx(ONE_DEGREE, rel=1e-3)
    assert abs(p.x) < 1e-6


def test_inverse_of_origin():
    o = GeoPoint(-33.0, 151.0, 12.0)
    g = to_geo(EnuPoint(0.0, 0.0, 0.0), o)
    assert (g.lat, g.lon, g.alt) == pytest.approx((o.lat, o.lon, 0.0), abs=1e-12)


def test_one_km_east_at_equator():
    g = to_geo(EnuPoint(1000.0, 0.0, 0.0), GeoPoint(0.0, 0.0))
    assert g.lon == pytest.approx(1000.0 / ONE_DEGREE, rel=1e-6)
    assert abs(g.lat) < 1e-12


def test_distance_one_degree_and_zero():
    a = GeoPoint(45.0, 7.0)
    assert ground_distance(a, a) == 0.0
    assert ground_distance(a, GeoPoint(46.0, 7.0)) == pytest.approx(ONE_DEGREE, rel=1e-9)


def test_out_of_range_rejected():
    with pytest.raises(ValueError):
        to_enu(GeoPoint(0.0, 10.0), GeoPoint(0.0, 0.0))
    with pytest.raises(ValueError):
        GeoPoint(91.0, 0.0)
    with pytest.raises(ValueError):
        GeoPoint(0.0, 0.0, -1.0)


lat = st.floats(-80, 80)
lon = st.floats(-179, 179)
offset = st.floats(-10_000, 10_000)


@settings(max_examples=200, deadline=None)
@given(lat, lon, offset, offset)
def test_roundtrip_within_10km(olat, olon, dx, dy):
    if math.hypot(dx, dy) > 10_000:
        dx, dy = dx / 2, dy / 2
    o = GeoPoint(olat, olon)
    g = to_geo(EnuPoint(dx, dy, 3.0), o)
    back = to_enu(g, o)
    assert math.hypot(back.x - dx, back.y - dy) < 1e-3
    g2 = to_geo(back, o)
    assert abs(g2.lat - g.lat) < 1e-9 and abs(g2.lon - g.lon) < 1e-9


@settings(max_examples=200, deadline=None)
@given(lat, lon, lat, lon)
def test_distance_symmetric_exactly(a1, o1, a2, o2):
    a, b = GeoPoint(a1, o1), GeoPoint(a2, o2)
    assert ground_distance(a, b) == ground_distance(b, a)


@settings(max_examples=100, deadline=None)
@given(offset, offset, offset, offset)
def test_planar_and_great_circle_agree_below_5km(x1, y1, x2, y2):
    o = GeoPoint(41.9, 12.5)
    p, q = np.array([x1, y1]) / 2, np.array([x2, y2]) / 2
    if np.linalg.norm(p - q) < 1.0:
        return
    a, b = to_geo(EnuPoint(*p), o), to_geo(EnuPoint(*q), o)
    assert ground_distance(a, b) == pytest.approx(float(np.linalg.norm(p - q)), rel=1e-3)


def test_bbox_centroid_and_enu_array():
    pts = [GeoPoint(1.0, 2.0), GeoPoint(3.0, 6.0), GeoPoint(2.0, 3.0)]
    c = bbox_centroid(pts)
    assert (c.lat, c.lon) == (2.0, 4.0)
    arr = enu_array(pts, c)
    assert arr.shape == (3, 3)
    with pytest.raises(ValueError):
        bbox_centroid([])
    assert EARTH_RADIUS == 6_371_000.0
