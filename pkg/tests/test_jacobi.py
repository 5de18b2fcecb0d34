import numpy as np
import pytest
from scipy.special import jv

from risloc import far_field_steering_batch, planar_array
from risloc.jacobi import (
    bessel_orders,
    h_vector,
    jacobi_basis,
    jacobi_far_field,
    min_expansion_order,
)

WAVELENGTH = 0.0107


@pytest.fixture(scope="module")
def small_geom():
    return planar_array(16, 16, WAVELENGTH)


def test_min_expansion_order_is_strictly_above_bound(small_geom):
    for elevation in (0.1, 0.7, np.pi / 2):
        n = min_expansion_order(small_geom, elevation)
        bound = (
            small_geom.wavenumber
            * small_geom.element_radii.max()
            * np.sin(elevation)
        )
        assert n > bound
        assert n - 1 <= bound


def test_min_expansion_order_default_is_worst_case(small_geom):
    assert min_expansion_order(small_geom) == min_expansion_order(
        small_geom, np.pi / 2
    )
    assert min_expansion_order(small_geom, 0.2) <= min_expansion_order(small_geom)


def test_min_expansion_order_rejects_bad_elevation(small_geom):
    with pytest.raises(ValueError):
        min_expansion_order(small_geom, -0.3)


def test_bessel_orders_layout():
    n = bessel_orders(3)
    assert n.tolist() == [-3, -2, -1, 0, 1, 2, 3]
    with pytest.raises(ValueError):
        bessel_orders(-1)


def test_h_vector_unit_modulus_and_symmetry():
    h = h_vector(1.234, 5)
    assert np.allclose(np.abs(h), 1.0)
    assert np.allclose(h, np.conj(h[::-1]))


def test_jacobi_basis_matches_direct_bessel_evaluation(small_geom):
    # oracle: evaluate every entry from scipy.special.jv with signed orders
    order = 7
    elevation = 0.6
    g = jacobi_basis(small_geom, elevation, order)
    z = small_geom.wavenumber * small_geom.element_radii * np.sin(elevation)
    for row, n in enumerate(bessel_orders(order)):
        expected = (
            (1j**int(n))
            * jv(n, z)
            * np.exp(-1j * n * small_geom.element_azimuths)
        )
        np.testing.assert_allclose(g[row], expected, atol=1e-14)


def test_expansion_converges_to_exact_steering(small_geom):
    elevation, azimuth = 0.9, 2.3
    exact = far_field_steering_batch(small_geom, elevation, azimuth)[0]
    errs = []
    for order in (8, 16, 32, 56):
        approx = jacobi_far_field(small_geom, elevation, azimuth, order)
        errs.append(np.abs(approx - exact).max())
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] < 1e-10


def test_margin_above_formula_order_reaches_tight_error(small_geom):
    # past the turning point the tail collapses within ~20 extra orders
    order = min_expansion_order(small_geom) + 20
    elevation = 0.96
    azimuths = np.linspace(0.0, 2.0 * np.pi, 24, endpoint=False)
    exact = far_field_steering_batch(small_geom, np.full(24, elevation), azimuths)
    basis = jacobi_basis(small_geom, elevation, order)
    for i, az in enumerate(azimuths):
        approx = basis.T @ h_vector(az, order)
        assert np.abs(approx - exact[i]).max() < 1e-8


def test_zero_order_basis_is_bessel_j0(small_geom):
    g = jacobi_basis(small_geom, 0.5, 0)
    z = small_geom.wavenumber * small_geom.element_radii * np.sin(0.5)
    np.testing.assert_allclose(g[0], jv(0, z), atol=1e-14)


def test_basis_handles_zero_elevation(small_geom):
    # sin(0) = 0 collapses every entry to J_n(0) = delta_n0
    order = 3
    g = jacobi_basis(small_geom, 0.0, order)
    expected = np.zeros_like(g)
    expected[order] = 1.0
    np.testing.assert_allclose(g, expected, atol=1e-14)
