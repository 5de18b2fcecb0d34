"""Analytic mean derivatives against central finite differences."""

import numpy as np
import pytest

from risloc import ParamVector, RisAmplitudeParams, noiseless_mean, planar_array, profile_matrix, random_phase_schedule
from risloc.derivatives import amplitude_param_derivatives, mean_derivatives

WAVELENGTH = 299792458.0 / 28e9
P_BS = np.array([-1.5, 1.0, 1.2])
ES = 1.3


def _setup(seed=0, t=5):
    g = planar_array(4, 4, wavelength=WAVELENGTH)
    phases = random_phase_schedule(16, t, seed=seed)
    params = RisAmplitudeParams(beta_min=0.5, kappa=1.5, phi=0.8)
    return g, phases, profile_matrix(phases, params), params


def _random_param_vector(rng, zeta=None):
    pos = rng.uniform(-2, 2, 3)
    pos[2] = rng.uniform(1.0, 4.0)
    gain = rng.normal() + 1j * rng.normal()
    return ParamVector(gain=gain, position=pos, zeta=zeta)


def _mean_of_array5(arr5, weights, geom):
    return noiseless_mean(ParamVector.from_array5(arr5), weights, geom, P_BS, symbol_energy=ES)


def _fd_columns(f, x, h_list):
    cols = []
    for i, h in enumerate(h_list):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def test_value_matches_mean():
    g, _, W, _ = _setup()
    pv = _random_param_vector(np.random.default_rng(1))
    d = mean_derivatives(pv, W, g, P_BS, symbol_energy=ES)
    np.testing.assert_allclose(d.value, noiseless_mean(pv, W, g, P_BS, symbol_energy=ES), atol=1e-13)


def test_first_derivatives_match_finite_differences():
    g, _, W, _ = _setup()
    rng = np.random.default_rng(42)
    # position steps sized so FD truncation and the path-length cancellation
    # noise both sit well below the threshold
    h = [1e-6, 1e-6, 1e-5, 1e-5, 1e-5]
    for _ in range(10):
        pv = _random_param_vector(rng)
        x = pv.as_array5()
        fd = _fd_columns(lambda v: _mean_of_array5(v, W, g), x, h)
        analytic = mean_derivatives(pv, W, g, P_BS, symbol_energy=ES).first
        for i in range(5):
            err = np.linalg.norm(fd[:, i] - analytic[:, i]) / np.linalg.norm(analytic[:, i])
            assert err < 1e-6, f"param {i}: rel err {err:.2e}"


def test_second_derivatives_match_finite_differences():
    """FD of the analytic gradient reproduces the analytic Hessian stack."""
    g, _, W, _ = _setup()
    rng = np.random.default_rng(7)
    h = [1e-5, 1e-5, 1e-7, 1e-7, 1e-7]
    for _ in range(5):
        pv = _random_param_vector(rng)
        x = pv.as_array5()

        def grad(v):
            return mean_derivatives(
                ParamVector.from_array5(v), W, g, P_BS, symbol_energy=ES, order=1
            ).first

        fd = _fd_columns(grad, x, h)  # (T, 5, 5): fd[..., j] = d grad / d eta_j
        analytic = mean_derivatives(pv, W, g, P_BS, symbol_energy=ES).second
        scale = np.abs(analytic).max()
        np.testing.assert_allclose(fd, analytic, atol=2e-5 * scale)


def test_second_derivative_structure():
    g, _, W, _ = _setup()
    pv = _random_param_vector(np.random.default_rng(3))
    d = mean_derivatives(pv, W, g, P_BS, symbol_energy=ES)
    # symmetric in the parameter indices, zero in the pure-gain block
    np.testing.assert_allclose(d.second, d.second.transpose(0, 2, 1), atol=1e-12)
    np.testing.assert_array_equal(d.second[:, :2, :2], 0.0)
    # gain-position cross terms are the position gradient divided by the gain
    np.testing.assert_allclose(d.second[:, 0, 2:], d.first[:, 2:] / pv.gain, atol=1e-10)


def test_order_one_skips_hessian():
    g, _, W, _ = _setup()
    pv = _random_param_vector(np.random.default_rng(5))
    d = mean_derivatives(pv, W, g, P_BS, symbol_energy=ES, order=1)
    assert d.second is None
    with pytest.raises(ValueError):
        mean_derivatives(pv, W, g, P_BS, symbol_energy=ES, order=3)


def test_amplitude_derivatives_match_finite_differences():
    g, phases, _, zeta = _setup()
    rng = np.random.default_rng(11)
    for _ in range(5):
        pv = _random_param_vector(rng, zeta=zeta)
        analytic = amplitude_param_derivatives(pv, phases, g, P_BS, symbol_energy=ES)

        def mean_of_zeta(z):
            W = profile_matrix(phases, RisAmplitudeParams.from_array(z))
            return noiseless_mean(pv, W, g, P_BS, symbol_energy=ES)

        fd = _fd_columns(mean_of_zeta, zeta.as_array(), [1e-6, 1e-6, 1e-6])
        for i in range(3):
            err = np.linalg.norm(fd[:, i] - analytic[:, i]) / np.linalg.norm(analytic[:, i])
            assert err < 1e-6, f"zeta param {i}: rel err {err:.2e}"


def test_amplitude_derivatives_at_the_dip():
    """A phase exactly at the amplitude minimum must not produce NaNs."""
    g = planar_array(2, 2, wavelength=WAVELENGTH)
    zeta = RisAmplitudeParams(beta_min=0.4, kappa=1.5, phi=0.8)
    dip = zeta.phi - np.pi / 2
    phases = np.array([[dip], [dip], [0.3], [1.0]])
    pv = ParamVector(gain=1.0 + 0.5j, position=[0.5, 0.2, 2.0], zeta=zeta)
    out = amplitude_param_derivatives(pv, phases, g, P_BS)
    assert np.all(np.isfinite(out))


def test_amplitude_derivatives_kappa_zero():
    """kappa = 0: amplitude is constant in phi, and the beta_min column vanishes."""
    g = planar_array(2, 2, wavelength=WAVELENGTH)
    zeta = RisAmplitudeParams(beta_min=0.4, kappa=0.0, phi=0.8)
    phases = random_phase_schedule(4, 6, seed=0)
    pv = ParamVector(gain=1.0, position=[0.5, 0.2, 2.0], zeta=zeta)
    out = amplitude_param_derivatives(pv, phases, g, P_BS)
    np.testing.assert_array_equal(out[:, 2], 0.0)
    # x**0 = 1 makes d beta/d beta_min = 0: the model is insensitive to beta_min here
    np.testing.assert_allclose(out[:, 0], 0.0, atol=1e-14)
