"""Truncated cylindrical-harmonic expansion of the in-plane far-field steering vector.

For a planar array, each far-field steering entry has the form
``exp(j k q sin(el) cos(az - psi))`` and separates into a product of a
Bessel-weighted basis (depending on elevation and element layout only) and a
pure azimuth harmonic vector.  Truncating the harmonic order at N decouples
the two angles: steering ~= G(el)^T h(az) with G of shape (2N+1, M).  The
truncation is accurate once N exceeds the largest phase argument
``k * q_max * sin(el)``; convergence beyond that point is superexponential.
"""

from __future__ import annotations

import numpy as np
from scipy.special import jv

from .geometry import RisGeometry

__all__ = [
    "bessel_orders",
    "h_vector",
    "jacobi_basis",
    "jacobi_far_field",
    "min_expansion_order",
]

# i^n for n mod 4; exact complex units, no exp/log roundoff
_QUARTER_TURNS = np.array([1.0 + 0.0j, 0.0 + 1.0j, -1.0 + 0.0j, 0.0 - 1.0j])


def min_expansion_order(geom: RisGeometry, elevation: float | None = None) -> int:
    """Smallest order N strictly above k * q_max * sin(elevation).

    With ``elevation=None`` the worst case (sin = 1) is assumed, making the
    returned order valid for every direction.
    """
    sin_el = 1.0 if elevation is None else float(np.sin(elevation))
    if not 0.0 <= sin_el <= 1.0:
        raise ValueError("elevation must lie in [0, pi/2]")
    bound = geom.wavenumber * float(geom.element_radii.max()) * sin_el
    return int(np.floor(bound)) + 1


def bessel_orders(order: int) -> np.ndarray:
    """Harmonic orders -N..N as an integer array."""
    if order < 0:
        raise ValueError("order must be non-negative")
    return np.arange(-order, order + 1)


def jacobi_basis(geom: RisGeometry, elevation: float, order: int) -> np.ndarray:
    """Elevation-dependent basis G of shape (2N+1, M).

    Row n holds ``i^n J_n(k q_m sin(el)) exp(-j n psi_m)`` where (q_m, psi_m)
    are the in-plane polar coordinates of element m.
    """
    orders = bessel_orders(order)
    z = geom.wavenumber * geom.element_radii * np.sin(elevation)
    # square layouts repeat radii heavily; evaluate each Bessel argument once
    z_unique, inverse = np.unique(z, return_inverse=True)
    j_pos = jv(np.arange(order + 1)[:, None], z_unique[None, :])[:, inverse]
    if order > 0:
        # J_{-n} = (-1)^n J_n
        signs = (-1.0) ** np.arange(order, 0, -1)
        j_all = np.vstack([signs[:, None] * j_pos[order:0:-1], j_pos])
    else:
        j_all = j_pos
    phase = np.exp(-1j * np.outer(orders, geom.element_azimuths))
    return _QUARTER_TURNS[np.mod(orders, 4)][:, None] * j_all * phase


def h_vector(azimuth: float, order: int) -> np.ndarray:
    """Azimuth harmonics exp(j n az) for n = -N..N."""
    return np.exp(1j * bessel_orders(order) * azimuth)


def jacobi_far_field(geom: RisGeometry, elevation: float, azimuth: float,
                     order: int) -> np.ndarray:
    """Truncated-series approximation of the far-field steering vector."""
    return jacobi_basis(geom, elevation, order).T @ h_vector(azimuth, order)
