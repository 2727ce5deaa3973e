"""Satellite geometry, path loss, and placement sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrfhss_lab import geometry as geo

GEO = geo.SatelliteGeometry()
FREQ = 905.4385


class TestSlantDistance:
    def test_zenith_equals_orbit_height(self):
        assert geo.slant_distance_km(90.0, GEO) == pytest.approx(780.0)

    def test_horizon_value(self):
        # frozen from the closed-form evaluation at 0 deg elevation
        assert geo.slant_distance_km(0.0, GEO) == pytest.approx(
            3249.319928846648, rel=1e-12)

    def test_mid_elevation_value(self):
        assert geo.slant_distance_km(30.0, GEO) == pytest.approx(
            1363.7794807128519, rel=1e-12)

    def test_monotone_decreasing_in_elevation(self):
        angles = np.linspace(0.0, 90.0, 181)
        dists = [geo.slant_distance_km(a, GEO) for a in angles]
        assert all(d0 > d1 for d0, d1 in zip(dists, dists[1:]))

    def test_range_validation(self):
        with pytest.raises(ValueError):
            geo.slant_distance_km(-1.0, GEO)
        with pytest.raises(ValueError):
            geo.slant_distance_km(90.5, GEO)


class TestElevationConversions:
    def test_subsatellite_point_is_zenith(self):
        assert geo.elevation_from_ground_distance(0.0, GEO) == 90.0

    def test_footprint_edge_elevation(self):
        assert geo.elevation_from_ground_distance(2209.0, GEO) == pytest.approx(
            8.310854241516365, rel=1e-12)

    @given(st.floats(1.0, 2209.0))
    @settings(max_examples=100)
    def test_slant_roundtrip(self, arc_km):
        elev = geo.elevation_from_ground_distance(arc_km, GEO)
        slant = geo.slant_distance_km(elev, GEO)
        assert geo.elevation_from_slant_distance(slant, GEO) == pytest.approx(
            elev, abs=1e-9)

    def test_slant_inverse_bounds(self):
        with pytest.raises(ValueError):
            geo.elevation_from_slant_distance(700.0, GEO)
        with pytest.raises(ValueError):
            geo.elevation_from_slant_distance(4000.0, GEO)


class TestPathLoss:
    def test_zenith_total(self):
        assert geo.path_loss_db(90.0, FREQ, GEO) == pytest.approx(
            156.167433149115, rel=1e-12)

    def test_footprint_edge_total(self):
        elev = geo.elevation_from_ground_distance(2209.0, GEO)
        assert geo.path_loss_db(elev, FREQ, GEO) == pytest.approx(
            186.1489114921496, rel=1e-12)

    def test_tree_loss_endpoints(self):
        assert geo.tree_loss_db(90.0, FREQ) == pytest.approx(
            3.548361952998406, rel=1e-12)
        assert geo.tree_loss_db(0.0, FREQ) == pytest.approx(
            27.382359683745303, rel=1e-12)

    def test_monotone_decreasing_in_elevation(self):
        losses = [geo.path_loss_db(a, FREQ, GEO) for a in range(0, 91, 5)]
        assert all(l0 > l1 for l0, l1 in zip(losses, losses[1:]))

    def test_gain_is_inverse_loss(self):
        gain = geo.path_gain_linear(45.0, FREQ, GEO)
        assert -10.0 * math.log10(gain) == pytest.approx(
            geo.path_loss_db(45.0, FREQ, GEO))


class TestFootprintRegion:
    def test_swept_area(self):
        assert geo.footprint_area_km2(GEO, 291.1) == pytest.approx(
            24846960.5014617, rel=1e-12)

    def test_zero_slot_is_disk(self):
        assert geo.footprint_area_km2(GEO, 0.0) == pytest.approx(
            math.pi * 2209.0 ** 2)

    def test_samples_inside_region(self):
        rng = np.random.default_rng(0)
        positions = geo.sample_positions(rng, 2000, GEO, 291.1)
        assert len(positions) == 2000
        assert all(geo.in_region(p, GEO, 291.1) for p in positions)

    def test_samples_cover_caps_and_rectangle(self):
        rng = np.random.default_rng(1)
        track = GEO.ground_speed_km_s * 291.1
        xs = [p.along_track_km for p in geo.sample_positions(rng, 4000, GEO, 291.1)]
        assert min(xs) < 0.0 < track < max(xs)

    def test_uniformity_along_track(self):
        # rectangle section: along-track coordinate should be uniform
        rng = np.random.default_rng(2)
        track = GEO.ground_speed_km_s * 291.1
        xs = np.array([p.along_track_km
                       for p in geo.sample_positions(rng, 8000, GEO, 291.1)])
        inside = xs[(xs > 0.0) & (xs < track)]
        assert abs(inside.mean() / track - 0.5) < 0.02

    def test_ground_distance_tracks_satellite(self):
        pos = geo.DevicePosition(along_track_km=74.0, cross_track_km=0.0)
        assert geo.satellite_ground_distance_at(10.0, pos, GEO) == pytest.approx(0.0)
        assert geo.satellite_ground_distance_at(0.0, pos, GEO) == pytest.approx(74.0)


class TestValidation:
    def test_geometry_fields_positive(self):
        with pytest.raises(ValueError):
            geo.SatelliteGeometry(orbital_height_km=0.0)

    def test_footprint_bounded_by_quarter_arc(self):
        with pytest.raises(ValueError):
            geo.SatelliteGeometry(footprint_radius_km=11000.0)

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            geo.sample_positions(np.random.default_rng(0), -1, GEO, 1.0)
