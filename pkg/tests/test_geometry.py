"""Geometry layer: layouts, steering vectors, spherical coordinates."""

import numpy as np
import pytest

from risloc import (
    RisGeometry,
    SphericalCoords,
    far_field_steering,
    fresnel_bounds,
    near_field_steering,
    normalize_azimuth,
    planar_array,
    position_to_spherical,
    spherical_to_position,
    unit_direction,
    wavevector,
)
from risloc.geometry import far_field_steering_batch, near_field_steering_batch

WAVELENGTH = 299792458.0 / 28e9  # 28 GHz carrier


def test_planar_array_layout():
    """Row-major indexing, half-wavelength default spacing, centered on `center`."""
    s = WAVELENGTH / 2
    g = planar_array(2, 3, wavelength=WAVELENGTH, center=(1.0, -2.0, 0.5))
    assert g.n_elements == 6
    # element m = row * n_cols + col; x runs along columns, y along rows
    np.testing.assert_allclose(g.elements[0], [1.0 - s, -2.0 - s / 2, 0.5])
    np.testing.assert_allclose(g.elements[1], [1.0, -2.0 - s / 2, 0.5])
    np.testing.assert_allclose(g.elements[5], [1.0 + s, -2.0 + s / 2, 0.5])
    np.testing.assert_allclose(g.elements.mean(axis=0), [1.0, -2.0, 0.5], atol=1e-15)
    assert np.all(g.elements[:, 2] == 0.5)


def test_planar_array_aperture_exact():
    s = 0.01
    g = planar_array(3, 5, wavelength=WAVELENGTH, spacing=s)
    assert g.aperture == pytest.approx(np.hypot(4 * s, 2 * s), rel=1e-12)


def test_element_polar_coordinates():
    g = planar_array(1, 2, wavelength=WAVELENGTH, spacing=0.02)
    np.testing.assert_allclose(g.element_radii, [0.01, 0.01])
    np.testing.assert_allclose(g.element_azimuths, [np.pi, 0.0], atol=1e-12)


def test_near_field_steering_matches_path_length_definition():
    rng = np.random.default_rng(7)
    g = planar_array(4, 4, wavelength=WAVELENGTH)
    for _ in range(5):
        p = rng.uniform(-3, 3, 3)
        p[2] = rng.uniform(0.5, 5.0)
        a = near_field_steering(g, p)
        expected = np.array(
            [
                np.exp(
                    -1j
                    * g.wavenumber
                    * (np.linalg.norm(p - pm) - np.linalg.norm(p - g.center))
                )
                for pm in g.elements
            ]
        )
        np.testing.assert_allclose(a, expected, atol=1e-14)
        np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-14)


def test_near_field_steering_center_element_is_one():
    g = planar_array(3, 3, wavelength=WAVELENGTH)  # odd grid: element 4 at the center
    a = near_field_steering(g, [0.3, -0.2, 2.0])
    assert a[4] == pytest.approx(1.0, abs=1e-14)


def test_far_field_limit_of_near_field_steering():
    """At distances far beyond the Fresnel region the two vectors coincide."""
    g = planar_array(4, 4, wavelength=WAVELENGTH)
    coords = SphericalCoords(d=1e4, elevation=0.7, azimuth=2.1)
    p = spherical_to_position(g, coords)
    near = near_field_steering(g, p)
    far = far_field_steering(g, coords.elevation, coords.azimuth)
    np.testing.assert_allclose(near, far, atol=1e-4)


def test_far_field_steering_wavevector_form():
    """Explicit exp(-j (p_m - center)^T k) oracle, plus the batch helper."""
    g = planar_array(5, 3, wavelength=WAVELENGTH, center=(0.2, 0.1, -0.4))
    el, az = 0.44, 5.1
    k = wavevector(WAVELENGTH, el, az)
    expected = np.exp(-1j * (g.elements - g.center) @ k)
    np.testing.assert_allclose(far_field_steering(g, el, az), expected, atol=1e-13)
    batch = far_field_steering_batch(g, [el, 0.1], [az, 1.0])
    np.testing.assert_allclose(batch[0], expected, atol=1e-13)
    np.testing.assert_allclose(batch[1], far_field_steering(g, 0.1, 1.0), atol=1e-13)


def test_near_field_steering_batch_matches_scalar():
    rng = np.random.default_rng(3)
    g = planar_array(4, 4, wavelength=WAVELENGTH)
    pts = rng.uniform(-2, 2, (6, 3))
    pts[:, 2] = rng.uniform(1.0, 4.0, 6)
    batch = near_field_steering_batch(g, pts)
    for i, p in enumerate(pts):
        np.testing.assert_allclose(batch[i], near_field_steering(g, p), atol=1e-14)


def test_wavevector_norm_and_direction():
    k = wavevector(WAVELENGTH, 0.0, 0.0)
    np.testing.assert_allclose(k, [0.0, 0.0, -2 * np.pi / WAVELENGTH], atol=1e-12)
    k = wavevector(WAVELENGTH, 1.1, 4.0)
    assert np.linalg.norm(k) == pytest.approx(2 * np.pi / WAVELENGTH, rel=1e-14)
    # arriving direction has positive z for elevation < pi/2, so k points down
    assert k[2] < 0


def test_spherical_round_trip():
    rng = np.random.default_rng(11)
    g = planar_array(2, 2, wavelength=WAVELENGTH, center=(0.5, -0.3, 0.0))
    for _ in range(20):
        p = g.center + rng.uniform(-4, 4, 3)
        p[2] = g.center[2] + rng.uniform(0.1, 6.0)
        coords = position_to_spherical(g, p)
        assert coords.d > 0
        assert 0.0 <= coords.elevation <= np.pi / 2
        assert 0.0 <= coords.azimuth < 2 * np.pi
        np.testing.assert_allclose(spherical_to_position(g, coords), p, atol=1e-10)


def test_unit_direction_is_unit():
    rng = np.random.default_rng(2)
    el = rng.uniform(0, np.pi / 2, 10)
    az = rng.uniform(0, 2 * np.pi, 10)
    u = unit_direction(el, az)
    np.testing.assert_allclose(np.linalg.norm(u, axis=-1), 1.0, atol=1e-14)
    np.testing.assert_allclose(u[:, 2], np.cos(el), atol=1e-14)


def test_normalize_azimuth():
    np.testing.assert_allclose(normalize_azimuth(-0.1), 2 * np.pi - 0.1, atol=1e-14)
    assert normalize_azimuth(2 * np.pi) == 0.0
    assert normalize_azimuth(0.0) == 0.0
    vals = np.array([7.0, -7.0, 100.0])
    wrapped = normalize_azimuth(vals)
    assert np.all((wrapped >= 0) & (wrapped < 2 * np.pi))
    np.testing.assert_allclose(np.exp(1j * wrapped), np.exp(1j * vals), atol=1e-12)


def test_fresnel_bounds_formula():
    """0.62 sqrt(D^3/lambda) and 2 D^2/lambda with D the exact max element distance."""
    g = planar_array(50, 50, wavelength=WAVELENGTH)
    d_lo, d_hi = fresnel_bounds(g)
    diag = 49 * np.sqrt(2) * WAVELENGTH / 2
    assert g.aperture == pytest.approx(diag, rel=1e-12)
    assert d_lo == pytest.approx(0.62 * np.sqrt(diag**3 / WAVELENGTH), rel=1e-12)
    assert d_hi == pytest.approx(2 * diag**2 / WAVELENGTH, rel=1e-12)
    assert d_lo < d_hi


def test_invalid_inputs_raise():
    g = planar_array(2, 2, wavelength=WAVELENGTH)
    with pytest.raises(ValueError):
        near_field_steering(g, g.elements[0])  # on an element
    with pytest.raises(ValueError):
        near_field_steering(g, g.center)
    with pytest.raises(ValueError):
        planar_array(0, 2, wavelength=WAVELENGTH)
    with pytest.raises(ValueError):
        RisGeometry(center=np.zeros(3), elements=np.array([[0.0, 0.0, 0.1]]), wavelength=WAVELENGTH)
    with pytest.raises(ValueError):
        RisGeometry(center=np.zeros(3), elements=np.zeros((1, 3)), wavelength=-1.0)
    with pytest.raises(ValueError):
        SphericalCoords(d=-1.0, elevation=0.1, azimuth=0.0)
    with pytest.raises(ValueError):
        SphericalCoords(d=1.0, elevation=2.0, azimuth=0.0)
    with pytest.raises(ValueError):
        fresnel_bounds(RisGeometry(np.zeros(3), np.zeros((1, 3)), WAVELENGTH))
    with pytest.raises(ValueError):
        far_field_steering(g, -0.2, 0.0)
    with pytest.raises(ValueError):
        wavevector(0.0, 0.1, 0.1)


def test_spherical_coords_wraps_azimuth():
    c = SphericalCoords(d=1.0, elevation=0.2, azimuth=-1.0)
    assert c.azimuth == pytest.approx(2 * np.pi - 1.0, abs=1e-14)
