import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import healpix_oracle as oracle
from frostgrid import healpix as hp
from frostgrid.healpix import PixelId, Scheme, UnitSphereCoord

# Fig. 1 site coordinates (degrees north, degrees east)
SITES = {
    "A": (64.550, 315.907),
    "B": (58.236, 89.607),
    "C": (63.738, 11.035),
    "D": (42.572, 67.332),
    "E": (56.847, 350.401),
    "F": (59.839, 135.999),
    "G": (64.829, 209.406),
}

# frozen from tests/healpix_oracle.py at nside=8
SITE_PIXELS_RING = {"A": 57, "B": 65, "C": 24, "D": 89, "E": 59, "F": 47, "G": 33}
SITE_PIXELS_NESTED = {"A": 243, "B": 29, "C": 58, "D": 28, "E": 223, "F": 115, "G": 185}


@pytest.mark.parametrize("nside, expected", [(1, 12), (8, 768), (4, 192), (2, 48)])
def test_npix(nside, expected):
    assert hp.npix(nside) == expected


@pytest.mark.parametrize("bad", [0, 3, -2, 6, 2.5, True])
def test_invalid_nside(bad):
    with pytest.raises(ValueError):
        hp.npix(bad)


def test_near_north_pole_is_pixel_zero():
    assert hp.ang2pix(1, 0.01, 0.1) == 0
    assert oracle.ang2pix_ring(1, 0.01, 0.1) == 0


@pytest.mark.parametrize("site", sorted(SITES))
def test_site_regression_vectors(site):
    lat, lon = SITES[site]
    assert hp.latlon_to_pixel(8, lat, lon) == SITE_PIXELS_RING[site]
    assert hp.latlon_to_pixel(8, lat, lon, "nested") == SITE_PIXELS_NESTED[site]
    assert hp.ring2nest(8, SITE_PIXELS_RING[site]) == SITE_PIXELS_NESTED[site]


def test_base_pixel_centers_are_fixed_points():
    theta, phi = hp.pix2ang(1, np.arange(12))
    np.testing.assert_array_equal(hp.ang2pix(1, theta, phi), np.arange(12))


def test_equatorial_ring_at_nside_one():
    theta, _ = hp.pix2ang(1, 4)
    assert theta == pytest.approx(math.pi / 2, abs=1e-15)


def test_pix2ang_round_trip_nside8_pixel0():
    theta, phi = hp.pix2ang(8, 0)
    assert hp.ang2pix(8, theta, phi) == 0


def test_nside2_ring_structure():
    theta, phi = hp.pix2ang(2, np.arange(48))
    assert len(set(zip(theta.tolist(), phi.tolist()))) == 48
    assert len(np.unique(theta)) == 7


@pytest.mark.parametrize("nside", [1, 2, 4, 8, 16])
def test_isolatitude_ring_count(nside):
    theta, _ = hp.pix2ang(nside, np.arange(hp.npix(nside)))
    assert len(np.unique(theta)) == 4 * nside - 1


@pytest.mark.parametrize("nside", [1, 2, 4, 8])
def test_scheme_conversion_bijection(nside):
    ids = np.arange(hp.npix(nside))
    nested = hp.ring2nest(nside, ids)
    assert sorted(nested.tolist()) == ids.tolist()
    np.testing.assert_array_equal(hp.nest2ring(nside, nested), ids)
    np.testing.assert_array_equal(hp.ring2nest(nside, hp.nest2ring(nside, ids)), ids)


def test_nside1_conversion_is_identity():
    ids = np.arange(12)
    np.testing.assert_array_equal(hp.ring2nest(1, ids), ids)


@pytest.mark.parametrize("nside", [2, 8])
def test_cross_scheme_centers_equal(nside):
    nested = np.arange(hp.npix(nside))
    t_ring, p_ring = hp.pix2ang(nside, hp.nest2ring(nside, nested))
    t_nest, p_nest = hp.pix2ang(nside, nested, "nested")
    np.testing.assert_array_equal(t_ring, t_nest)
    np.testing.assert_array_equal(p_ring, p_nest)


@pytest.mark.parametrize("nside", [1, 2, 4, 8])
def test_centers_match_oracle(nside):
    ids = np.arange(hp.npix(nside))
    theta, phi = hp.pix2ang(nside, ids)
    expected = np.array([oracle.pix2ang_ring(nside, p) for p in ids.tolist()])
    np.testing.assert_allclose(theta, expected[:, 0], rtol=0, atol=1e-12)
    dphi = np.mod(phi - expected[:, 1] + math.pi, 2 * math.pi) - math.pi
    np.testing.assert_allclose(dphi, 0, atol=1e-12)


@pytest.mark.parametrize("nside", [1, 2, 4, 8, 32])
def test_random_points_match_oracle(nside):
    rng = np.random.default_rng(nside)
    theta = np.arccos(rng.uniform(-1, 1, 2000))
    phi = rng.uniform(0, 2 * math.pi, 2000)
    ring = hp.ang2pix(nside, theta, phi)
    nested = hp.ang2pix(nside, theta, phi, Scheme.NESTED)
    expected_ring = [oracle.ang2pix_ring(nside, t, p) for t, p in zip(theta, phi)]
    expected_nest = [oracle.ang2pix_nest(nside, t, p) for t, p in zip(theta, phi)]
    assert ring.tolist() == expected_ring
    assert nested.tolist() == expected_nest


def test_partition_and_fixed_point_on_random_points():
    rng = np.random.default_rng(7)
    theta = np.arccos(rng.uniform(-1, 1, 100_000))
    phi = rng.uniform(0, 2 * math.pi, 100_000)
    pix = hp.ang2pix(8, theta, phi)
    assert pix.min() >= 0 and pix.max() < 768
    ct, cp = hp.pix2ang(8, pix)
    np.testing.assert_array_equal(hp.ang2pix(8, ct, cp), pix)


def test_monotone_refinement():
    rng = np.random.default_rng(11)
    theta = np.arccos(rng.uniform(-1, 1, 20_000))
    phi = rng.uniform(0, 2 * math.pi, 20_000)
    fine = hp.ang2pix(8, theta, phi, "nested")
    coarse = hp.ang2pix(1, theta, phi, "nested")
    np.testing.assert_array_equal(fine >> 6, coarse)


def test_poles():
    north = hp.latlon_to_pixel(1, 90.0, 123.0)
    assert 0 <= north <= 3
    for lon in (0.0, 45.0, 100.0, 300.0):
        n = hp.latlon_to_pixel(1, 90.0, lon)
        s = hp.latlon_to_pixel(1, -90.0, lon)
        # south cap pixel index mirrors the north one
        assert s == hp.npix(1) - 4 + n


def test_longitude_normalization():
    assert hp.latlon_to_pixel(8, 60.0, -44.093) == hp.latlon_to_pixel(8, 60.0, 315.907)
    assert hp.latlon_to_pixel(8, 60.0, 720.0 + 10.0) == hp.latlon_to_pixel(8, 60.0, 10.0)


@pytest.mark.parametrize(
    "theta, phi", [(float("nan"), 0.0), (0.5, float("inf")), (-0.1, 0.0), (math.pi + 1e-6, 0.0)]
)
def test_rejects_bad_angles(theta, phi):
    with pytest.raises(ValueError):
        hp.ang2pix(8, theta, phi)


def test_theta_clamped_within_tolerance():
    assert hp.ang2pix(8, -1e-13, 0.0) == hp.ang2pix(8, 0.0, 0.0)
    assert hp.ang2pix(8, math.pi + 1e-13, 0.0) == hp.ang2pix(8, math.pi, 0.0)


def test_rejects_bad_latlon():
    with pytest.raises(ValueError):
        hp.latlon_to_pixel(8, 91.0, 0.0)
    with pytest.raises(ValueError):
        hp.latlon_to_pixel(8, float("nan"), 0.0)


@pytest.mark.parametrize("bad", [-1, 768, 10_000])
def test_out_of_range_pixels(bad):
    with pytest.raises(ValueError):
        hp.pix2ang(8, bad)
    with pytest.raises(ValueError):
        hp.ring2nest(8, bad)
    with pytest.raises(ValueError):
        PixelId(bad, 8)


def test_pixel_id_conversion():
    p = PixelId(57, 8)
    assert p.to("nested") == PixelId(243, 8, Scheme.NESTED)
    assert p.to("nested").to("ring") == p


def test_unit_sphere_coord():
    c = UnitSphereCoord.from_latlon(64.55, -44.093)
    assert c.phi == pytest.approx(math.radians(315.907))
    assert c.lat_deg == pytest.approx(64.55)
    with pytest.raises(ValueError):
        UnitSphereCoord(4.0, 0.0)


def test_nearby_sites_share_pixel():
    a = hp.latlon_to_pixel(8, 64.55, 315.907)
    b = hp.latlon_to_pixel(8, 64.60, 315.95)
    assert a == b


@settings(max_examples=300, deadline=None)
@given(
    lat=st.floats(-90, 90, allow_nan=False),
    lon=st.floats(-720, 720, allow_nan=False),
    nside=st.sampled_from([1, 2, 4, 8, 16]),
)
def test_ring_nested_agree(lat, lon, nside):
    ring = hp.latlon_to_pixel(nside, lat, lon)
    nested = hp.latlon_to_pixel(nside, lat, lon, "nested")
    assert hp.ring2nest(nside, ring) == nested
