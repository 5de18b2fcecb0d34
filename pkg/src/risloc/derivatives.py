"""Closed-form derivatives of the model mean.

Everything downstream (misspecified and matched bounds) consumes derivatives
of mu_t(eta) = alpha * sqrt(E_s) * sum_m b_m(p) W_mt with respect to the real
parameter vector. The 5-parameter block [Re(alpha), Im(alpha), x, y, z] treats
the weight matrix as fixed; the 3-parameter amplitude block differentiates the
weights through beta(theta) instead.

Writing u = (p - center)/||p - center||, u_m = (p - p_m)/||p - p_m|| and
g_m = u_m - u, the steering product obeys d b_m / d p = -j k g_m b_m, and the
second position derivative adds the curvature term h_m = (I - u_m u_m^T)/d_m -
(I - u u^T)/d. All arrays are returned transmission-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import RisGeometry
from .ris import gamma_split
from .signal import ParamVector, b_vector


@dataclass(frozen=True)
class MeanDerivatives:
    """Mean values plus first (T, 5) and optional second (T, 5, 5) derivatives."""

    value: np.ndarray
    first: np.ndarray
    second: np.ndarray | None = None


def _position_factors(geom: RisGeometry, position: np.ndarray):
    """g (M, 3) first-order and h (M, 3, 3) curvature factors of the phase."""
    diffs = position - geom.elements
    dists = np.linalg.norm(diffs, axis=1)
    offset = position - geom.center
    d = np.linalg.norm(offset)
    u_m = diffs / dists[:, None]
    u = offset / d
    g = u_m - u
    eye = np.eye(3)
    h_m = (eye[None, :, :] - u_m[:, :, None] * u_m[:, None, :]) / dists[:, None, None]
    h_c = (eye - np.outer(u, u)) / d
    return g, h_m - h_c[None, :, :]


def mean_derivatives(params: ParamVector, weights: np.ndarray, geom: RisGeometry, p_bs,
                     symbol_energy: float = 1.0, order: int = 2) -> MeanDerivatives:
    """Derivatives of the mean w.r.t. [Re(alpha), Im(alpha), x, y, z].

    The weight matrix is held fixed, so the same routine serves the
    unit-amplitude model assumed by the estimator and the true model (pass the
    corresponding weights). order=1 skips the (T, 5, 5) second-derivative
    stack, which only the misspecified bound needs.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    alpha = params.gain
    b = b_vector(geom, p_bs, params.position)
    g, h = _position_factors(geom, params.position)
    k = geom.wavenumber
    root_e = np.sqrt(symbol_energy)
    wt = weights.T  # (T, M)
    n_t = wt.shape[0]

    c = root_e * (wt @ b)
    value = alpha * c
    first = np.empty((n_t, 5), dtype=complex)
    first[:, 0] = c
    first[:, 1] = 1j * c
    # d mu / d p_nu = alpha sqrt(E_s) sum_m (-j k g_nu) b_m W_mt
    db = -1j * k * g * b[:, None]  # (M, 3)
    c_pos = root_e * (wt @ db)  # (T, 3)
    first[:, 2:] = alpha * c_pos

    if order == 1:
        return MeanDerivatives(value=value, first=first)

    second = np.zeros((n_t, 5, 5), dtype=complex)
    second[:, 0, 2:] = c_pos
    second[:, 2:, 0] = c_pos
    second[:, 1, 2:] = 1j * c_pos
    second[:, 2:, 1] = 1j * c_pos
    # d^2 b_m / d p_nu d p_nu' = (-k^2 g_nu g_nu' - j k h_nunu') b_m
    for nu in range(3):
        for nup in range(nu, 3):
            fac = (-(k**2) * g[:, nu] * g[:, nup] - 1j * k * h[:, nu, nup]) * b
            block = alpha * root_e * (wt @ fac)
            second[:, 2 + nu, 2 + nup] = block
            second[:, 2 + nup, 2 + nu] = block
    return MeanDerivatives(value=value, first=first, second=second)


def amplitude_param_derivatives(params: ParamVector, phases: np.ndarray, geom: RisGeometry,
                                p_bs, symbol_energy: float = 1.0) -> np.ndarray:
    """First derivatives (T, 3) of the true-model mean w.r.t. (beta_min, kappa, phi).

    Under the true model the weights are beta(Theta) * exp(j Theta), so only
    the amplitude differentiates. With x = (sin(Theta - phi) + 1)/2:

        d beta / d beta_min = 1 - x**kappa
        d beta / d kappa    = (1 - beta_min) * x**kappa * log(x)
        d beta / d phi      = -(1 - beta_min) * kappa * x**(kappa-1) * cos(Theta - phi)/2

    x = 0 is handled by continuity: x**kappa * log(x) -> 0 for kappa > 0, and
    the phi term is set to 0 there (for kappa >= 1 that is the true limit; for
    smaller kappa the derivative does not exist at the isolated dip point).
    For kappa = 0 the amplitude is constant, so the kappa and phi columns are
    the formal limits with x**0 = 1.
    """
    zeta = params.zeta
    if zeta is None:
        raise ValueError("params must carry amplitude parameters")
    phases = np.atleast_2d(np.asarray(phases, dtype=float))
    x = 0.5 * (np.sin(phases - zeta.phi) + 1.0)
    pos_mask = x > 0.0

    x_k = np.power(x, zeta.kappa)
    d_bmin = 1.0 - x_k
    logx = np.where(pos_mask, np.log(np.where(pos_mask, x, 1.0)), 0.0)
    d_kappa = (1.0 - zeta.beta_min) * x_k * logx
    if zeta.kappa == 0.0:
        d_phi = np.zeros_like(x)
    else:
        x_km1 = np.where(pos_mask, np.power(np.where(pos_mask, x, 1.0), zeta.kappa - 1.0), 0.0)
        d_phi = -(1.0 - zeta.beta_min) * zeta.kappa * x_km1 * 0.5 * np.cos(phases - zeta.phi)

    b = b_vector(geom, p_bs, params.position)
    phase_b = np.exp(1j * phases) * b[:, None]  # (M, T)
    pre = params.gain * np.sqrt(symbol_energy)
    out = np.empty((phases.shape[1], 3), dtype=complex)
    out[:, 0] = pre * np.sum(d_bmin * phase_b, axis=0)
    out[:, 1] = pre * np.sum(d_kappa * phase_b, axis=0)
    out[:, 2] = pre * np.sum(d_phi * phase_b, axis=0)
    return out
