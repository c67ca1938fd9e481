import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annotrack.errors import UndefinedDirectionError, ValidationError
from annotrack.geo import (
    EARTH_RADIUS_M,
    GeoPoint,
    LocalFrame,
    TrackPoint,
    angular_distance_mod180,
    bearing_deg,
    from_enu,
    haversine_distance_m,
    to_enu,
    vertical_rate_mps,
)

ORIGIN = GeoPoint(0.0, 0.0, 0.0)
FRAME = LocalFrame(origin=ORIGIN)

finite_lat = st.floats(min_value=-89.0, max_value=89.0)
finite_lon = st.floats(min_value=-179.9, max_value=179.9)


class TestToEnu:
    def test_origin_maps_to_zero(self):
        assert to_enu(ORIGIN, FRAME) == (0.0, 0.0, 0.0)

    def test_north_displacement(self):
        # oracle: north = R * dlat_rad = 6371000 * radians(0.001) = 111.1949 m
        p = GeoPoint(0.001, 0.0, 0.0)
        east, north, up = to_enu(p, FRAME)
        assert north == pytest.approx(111.19, abs=0.01)
        assert east == pytest.approx(0.0, abs=1e-9)
        assert up == 0.0

    def test_east_displacement_at_lat60(self):
        # oracle: east = R * cos(60 deg) * dlon_rad = 55.5975 m
        frame = LocalFrame(origin=GeoPoint(60.0, 0.0, 0.0))
        p = GeoPoint(60.0, 0.001, 0.0)
        east, north, _ = to_enu(p, frame)
        assert east == pytest.approx(55.60, abs=0.01)
        assert north == pytest.approx(0.0, abs=1e-9)

    def test_up_is_altitude_difference(self):
        frame = LocalFrame(origin=GeoPoint(10.0, 20.0, 150.0))
        p = GeoPoint(10.0, 20.0, 410.0)
        assert to_enu(p, frame)[2] == pytest.approx(260.0)

    @given(e=st.floats(-9000, 9000), n=st.floats(-9000, 9000),
           u=st.floats(-500, 500))
    @settings(max_examples=200)
    def test_round_trip_within_10km(self, e, n, u):
        frame = LocalFrame(origin=GeoPoint(42.0, -83.0, 250.0))
        p = from_enu(e, n, u, frame)
        e2, n2, u2 = to_enu(p, frame)
        assert e2 == pytest.approx(e, abs=1e-6)
        assert n2 == pytest.approx(n, abs=1e-6)
        assert u2 == pytest.approx(u, abs=1e-6)


class TestHaversine:
    def test_identity(self):
        p = GeoPoint(12.3, 45.6, 0.0)
        assert haversine_distance_m(p, p) == 0.0

    def test_one_degree_meridian(self):
        # oracle: R * radians(1) = 111194.93 m
        d = haversine_distance_m(GeoPoint(0, 0), GeoPoint(1.0, 0))
        assert d == pytest.approx(111194.9, abs=1.0)

    def test_antipodal(self):
        d = haversine_distance_m(GeoPoint(0, 0), GeoPoint(0, -180.0))
        assert d == pytest.approx(math.pi * EARTH_RADIUS_M, abs=1.0)

    @given(lat1=finite_lat, lon1=finite_lon, lat2=finite_lat, lon2=finite_lon)
    @settings(max_examples=200)
    def test_symmetric_nonnegative(self, lat1, lon1, lat2, lon2):
        a, b = GeoPoint(lat1, lon1), GeoPoint(lat2, lon2)
        d = haversine_distance_m(a, b)
        assert d >= 0.0
        assert d == pytest.approx(haversine_distance_m(b, a), abs=1e-9)
        if d == 0.0:
            # zero only between horizontally identical points
            assert abs(lat1 - lat2) < 1e-7 and abs(lon1 - lon2) < 1e-7

    @given(lat1=finite_lat, lon1=finite_lon, lat2=finite_lat, lon2=finite_lon,
           lat3=finite_lat, lon3=finite_lon)
    @settings(max_examples=200)
    def test_triangle_inequality(self, lat1, lon1, lat2, lon2, lat3, lon3):
        a, b, c = GeoPoint(lat1, lon1), GeoPoint(lat2, lon2), GeoPoint(lat3, lon3)
        ab = haversine_distance_m(a, b)
        bc = haversine_distance_m(b, c)
        ac = haversine_distance_m(a, c)
        assert ac <= ab + bc + 1e-6


class TestBearing:
    def test_due_north(self):
        assert bearing_deg(GeoPoint(0, 0), GeoPoint(1, 0)) == pytest.approx(0.0)

    def test_due_east_at_equator(self):
        assert bearing_deg(GeoPoint(0, 0), GeoPoint(0, 1)) == pytest.approx(90.0)

    def test_diagonal(self):
        # oracle: spherical initial-bearing formula gives 44.9956 deg
        assert bearing_deg(GeoPoint(0, 0), GeoPoint(1, 1)) == pytest.approx(
            44.996, abs=0.01
        )

    def test_coincident_points_raise(self):
        with pytest.raises(UndefinedDirectionError):
            bearing_deg(GeoPoint(5, 5, 0), GeoPoint(5, 5, 1000))


class TestAngularDistanceMod180:
    def test_bidirectional_identity(self):
        assert angular_distance_mod180(10, 190) == pytest.approx(0.0)

    def test_perpendicular_max(self):
        assert angular_distance_mod180(0, 90) == pytest.approx(90.0)

    def test_wraparound(self):
        # |350 - 10| = 340; mod 180 = 160; min(160, 20) = 20
        assert angular_distance_mod180(350, 10) == pytest.approx(20.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            angular_distance_mod180(float("nan"), 0.0)

    @given(a=st.floats(-720, 720), b=st.floats(-720, 720))
    @settings(max_examples=300)
    def test_symmetry_and_range(self, a, b):
        d = angular_distance_mod180(a, b)
        assert 0.0 <= d <= 90.0
        assert d == pytest.approx(angular_distance_mod180(b, a), abs=1e-9)
        assert d == pytest.approx(angular_distance_mod180(a + 180.0, b), abs=1e-6)


class TestVerticalRate:
    def _point(self, t, alt):
        return TrackPoint(GeoPoint(0, 0, alt), t, "t")

    def test_level(self):
        assert vertical_rate_mps(self._point(0, 100), self._point(10, 100)) == 0.0

    def test_descent(self):
        assert vertical_rate_mps(self._point(0, 100), self._point(10, 90)) == -1.0

    def test_climb(self):
        assert vertical_rate_mps(self._point(0, 0), self._point(12, 30)) == 2.5

    def test_non_increasing_time_rejected(self):
        with pytest.raises(ValidationError):
            vertical_rate_mps(self._point(10, 0), self._point(10, 5))

    @given(t1=st.floats(0, 1e6), dt=st.floats(0.001, 1e4),
           a1=st.floats(-100, 10000), a2=st.floats(-100, 10000))
    @settings(max_examples=200)
    def test_antisymmetric_under_reversal(self, t1, dt, a1, a2):
        p1, p2 = self._point(t1, a1), self._point(t1 + dt, a2)
        r = vertical_rate_mps(p1, p2)
        p1r, p2r = self._point(t1, a2), self._point(t1 + dt, a1)
        assert vertical_rate_mps(p1r, p2r) == pytest.approx(-r, abs=1e-9)


class TestGeoPointValidation:
    def test_latitude_range(self):
        with pytest.raises(ValidationError):
            GeoPoint(91.0, 0.0)

    def test_longitude_range(self):
        with pytest.raises(ValidationError):
            GeoPoint(0.0, 180.0)

    def test_altitude_finite(self):
        with pytest.raises(ValidationError):
            GeoPoint(0.0, 0.0, float("inf"))
