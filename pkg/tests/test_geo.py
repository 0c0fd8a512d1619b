import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aodcal.errors import InputError
from aodcal.geo import EARTH_RADIUS_KM, distance_matrix_km, haversine_km
from aodcal.types import SiteId


def test_identical_points_zero():
    a = SiteId("a", -84.5, 33.7)
    assert haversine_km(a, a) == 0.0


def test_quarter_meridian():
    # pole-to-equator along a meridian: R * pi / 2
    d = haversine_km(SiteId("a", 0.0, 0.0), SiteId("b", 0.0, 90.0))
    assert d == pytest.approx(EARTH_RADIUS_KM * math.pi / 2, abs=0.01)
    assert d == pytest.approx(10007.54, abs=0.01)


def test_one_degree_longitude_at_equator():
    d = haversine_km(SiteId("a", 0.0, 0.0), SiteId("b", 1.0, 0.0))
    assert d == pytest.approx(EARTH_RADIUS_KM * math.pi / 180, abs=0.01)
    assert d == pytest.approx(111.19, abs=0.01)


def test_symmetry_and_nonnegativity():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = SiteId("a", float(rng.uniform(-180, 180)), float(rng.uniform(-90, 90)))
        b = SiteId("b", float(rng.uniform(-180, 180)), float(rng.uniform(-90, 90)))
        ab = haversine_km(a, b)
        assert ab >= 0.0
        assert ab == pytest.approx(haversine_km(b, a), abs=1e-12)


coord = st.tuples(st.floats(-180, 180), st.floats(-90, 90))


@settings(max_examples=200, deadline=None)
@given(coord, coord, coord)
def test_triangle_inequality(p1, p2, p3):
    a = SiteId("a", *p1)
    b = SiteId("b", *p2)
    c = SiteId("c", *p3)
    assert haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + 1e-9


def test_nonfinite_coordinates_rejected():
    with pytest.raises(InputError):
        SiteId("bad", math.nan, 10.0)
    with pytest.raises(InputError):
        distance_matrix_km(np.array([0.0, math.inf]), np.array([0.0, 0.0]))


def test_distance_matrix_diagonal_exact_zero():
    rng = np.random.default_rng(1)
    d = distance_matrix_km(rng.uniform(-100, -90, 8), rng.uniform(30, 40, 8))
    assert np.all(np.diag(d) == 0.0)
    assert np.allclose(d, d.T)
