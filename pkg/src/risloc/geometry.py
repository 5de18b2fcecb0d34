"""Array geometry: element layouts, steering vectors, spherical parameterization.

Conventions used throughout the package:

* the reflecting surface lies in a plane parallel to the X-Y plane through its
  center, with element positions known exactly;
* elevation is measured from the +z axis, in [0, pi/2];
* azimuth is measured from the +x axis counter-clockwise, normalized to [0, 2*pi)
  at every return point;
* steering-vector entries are pure phase terms referenced to the surface center.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial.distance import pdist

TWO_PI = 2.0 * np.pi

# Positions closer than this to an element (or the center) are rejected as
# degenerate: the path-length difference and its derivatives blow up there.
_MIN_SEPARATION = 1e-9


def normalize_azimuth(azimuth):
    """Wrap azimuth angle(s) to the half-open interval [0, 2*pi)."""
    return np.mod(azimuth, TWO_PI)


@dataclass(frozen=True)
class RisGeometry:
    """Reflecting surface geometry.

    Parameters
    ----------
    center : (3,) array
        Reference point of the surface (phase center).
    elements : (M, 3) array
        Element positions, fixed ordering shared by all modules.
    wavelength : float
        Carrier wavelength in meters.
    """

    center: np.ndarray
    elements: np.ndarray
    wavelength: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(3)
        elements = np.atleast_2d(np.asarray(self.elements, dtype=float))
        if elements.ndim != 2 or elements.shape[1] != 3:
            raise ValueError("elements must be an (M, 3) array")
        if elements.shape[0] < 1:
            raise ValueError("need at least one element")
        if not (np.isfinite(center).all() and np.isfinite(elements).all()):
            raise ValueError("positions must be finite")
        if not np.isfinite(self.wavelength) or self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        # surface plane is parallel to X-Y through the center
        if np.any(np.abs(elements[:, 2] - center[2]) > 1e-9):
            raise ValueError("elements must lie in the X-Y plane through the center")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "wavelength", float(self.wavelength))

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def wavenumber(self) -> float:
        return TWO_PI / self.wavelength

    @cached_property
    def element_radii(self) -> np.ndarray:
        """In-plane distances q_m of each element from the center."""
        offsets = self.elements - self.center
        return np.hypot(offsets[:, 0], offsets[:, 1])

    @cached_property
    def element_azimuths(self) -> np.ndarray:
        """In-plane angles psi_m of each element from the +x axis, in [0, 2*pi)."""
        offsets = self.elements - self.center
        return normalize_azimuth(np.arctan2(offsets[:, 1], offsets[:, 0]))

    @cached_property
    def aperture(self) -> float:
        """Largest distance between any two elements (exact, not approximated)."""
        if self.n_elements < 2:
            return 0.0
        pts = self.elements
        if self.n_elements > 1500:
            # hull vertices suffice for the exact max pairwise distance
            from scipy.spatial import ConvexHull

            xy = pts[:, :2]
            try:
                pts = pts[ConvexHull(xy).vertices]
            except Exception:
                pass
        return float(pdist(pts).max())


def planar_array(n_rows: int, n_cols: int, wavelength: float, spacing: float | None = None,
                 center=(0.0, 0.0, 0.0)) -> RisGeometry:
    """Uniform planar array centered on `center`, row-major element indexing.

    Rows run along the y axis and columns along the x axis; element m =
    row * n_cols + col. Default spacing is half a wavelength.
    """
    if n_rows < 1 or n_cols < 1:
        raise ValueError("grid dimensions must be at least 1")
    if spacing is None:
        spacing = wavelength / 2.0
    center = np.asarray(center, dtype=float).reshape(3)
    cols = (np.arange(n_cols) - (n_cols - 1) / 2.0) * spacing
    rows = (np.arange(n_rows) - (n_rows - 1) / 2.0) * spacing
    yy, xx = np.meshgrid(rows, cols, indexing="ij")
    elements = np.column_stack(
        [xx.ravel() + center[0], yy.ravel() + center[1], np.full(n_rows * n_cols, center[2])]
    )
    return RisGeometry(center=center, elements=elements, wavelength=wavelength)


@dataclass(frozen=True)
class SphericalCoords:
    """Position relative to the surface center: distance, elevation, azimuth.

    Azimuth is wrapped to [0, 2*pi) on construction; distance and elevation are
    validated strictly.
    """

    d: float
    elevation: float
    azimuth: float

    def __post_init__(self):
        if not np.isfinite(self.d) or self.d <= 0:
            raise ValueError("distance must be positive")
        if not (0.0 <= self.elevation <= np.pi / 2):
            raise ValueError("elevation must lie in [0, pi/2]")
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "elevation", float(self.elevation))
        object.__setattr__(self, "azimuth", float(normalize_azimuth(self.azimuth)))


def unit_direction(elevation, azimuth) -> np.ndarray:
    """Unit vector(s) for given elevation (from +z) and azimuth (from +x)."""
    st, ct = np.sin(elevation), np.cos(elevation)
    x = st * np.cos(azimuth)
    y = st * np.sin(azimuth)
    return np.stack([x, y, ct * np.ones_like(x)], axis=-1)


def wavevector(wavelength: float, elevation: float, azimuth: float) -> np.ndarray:
    """Propagation wavevector of a plane wave arriving from (elevation, azimuth)."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    return -(TWO_PI / wavelength) * unit_direction(elevation, azimuth)


def spherical_to_position(geom: RisGeometry, coords: SphericalCoords) -> np.ndarray:
    """Cartesian position of a point given its spherical coordinates w.r.t. the center."""
    return geom.center + coords.d * unit_direction(coords.elevation, coords.azimuth)


def position_to_spherical(geom: RisGeometry, p) -> SphericalCoords:
    """Inverse of spherical_to_position (azimuth returned in [0, 2*pi))."""
    offset = np.asarray(p, dtype=float).reshape(3) - geom.center
    d = float(np.linalg.norm(offset))
    if d <= 0:
        raise ValueError("point coincides with the surface center")
    elevation = float(np.arccos(np.clip(offset[2] / d, -1.0, 1.0)))
    azimuth = float(normalize_azimuth(np.arctan2(offset[1], offset[0])))
    return SphericalCoords(d=d, elevation=elevation, azimuth=azimuth)


def _check_position(geom: RisGeometry, p: np.ndarray, dists: np.ndarray, d_center: float):
    if d_center < _MIN_SEPARATION or dists.min() < _MIN_SEPARATION:
        raise ValueError(f"position {p} coincides with an element or the surface center")


def near_field_steering(geom: RisGeometry, p) -> np.ndarray:
    """Near-field (spherical wavefront) steering vector toward position p.

    Entry m is exp(-j * k * (||p - p_m|| - ||p - center||)); the common
    center-referenced path is removed so every entry has unit modulus and the
    vector is 1 for an element sitting at the center.
    """
    p = np.asarray(p, dtype=float).reshape(3)
    dists = np.linalg.norm(p - geom.elements, axis=1)
    d_center = float(np.linalg.norm(p - geom.center))
    _check_position(geom, p, dists, d_center)
    return np.exp(-1j * geom.wavenumber * (dists - d_center))


def near_field_steering_batch(geom: RisGeometry, points: np.ndarray) -> np.ndarray:
    """Near-field steering vectors for an (n, 3) batch of positions; returns (n, M)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    diffs = points[:, None, :] - geom.elements[None, :, :]
    dists = np.sqrt(np.einsum("nmk,nmk->nm", diffs, diffs))
    d_center = np.linalg.norm(points - geom.center, axis=1)
    if d_center.min() < _MIN_SEPARATION or dists.min() < _MIN_SEPARATION:
        raise ValueError("a position coincides with an element or the surface center")
    phase = dists - d_center[:, None]
    return np.exp(-1j * geom.wavenumber * phase)


def far_field_steering(geom: RisGeometry, elevation: float, azimuth: float) -> np.ndarray:
    """Plane-wave steering vector for a source at (elevation, azimuth).

    Entry m is exp(-j * (p_m - center)^T k(elevation, azimuth)), the first-order
    (far-field) limit of the near-field vector.
    """
    if not (0.0 <= elevation <= np.pi / 2):
        raise ValueError("elevation must lie in [0, pi/2]")
    k = wavevector(geom.wavelength, elevation, normalize_azimuth(azimuth))
    return np.exp(-1j * (geom.elements - geom.center) @ k)


def far_field_steering_batch(geom: RisGeometry, elevations, azimuths) -> np.ndarray:
    """Far-field steering vectors on a batch of angle pairs; returns (n, M).

    Uses the in-plane form exp(j * k * q_m * sin(elevation) * cos(azimuth - psi_m)),
    which is algebraically identical to the wavevector form for this geometry but
    avoids building n x M x 3 intermediates.
    """
    elevations = np.atleast_1d(np.asarray(elevations, dtype=float))
    azimuths = np.atleast_1d(np.asarray(azimuths, dtype=float))
    qs = geom.element_radii * np.sin(elevations)[:, None]
    phase = qs * np.cos(azimuths[:, None] - geom.element_azimuths[None, :])
    return np.exp(1j * geom.wavenumber * phase)


def fresnel_bounds(geom: RisGeometry) -> tuple[float, float]:
    """Radiative near-field (Fresnel) interval (d_min, d_max) of the surface.

    d_min = 0.62 * sqrt(D^3 / wavelength) and d_max = 2 * D^2 / wavelength with D
    the exact largest inter-element distance.
    """
    if geom.n_elements < 2:
        raise ValueError("aperture undefined for a single-element surface")
    d = geom.aperture
    lam = geom.wavelength
    return 0.62 * float(np.sqrt(d**3 / lam)), 2.0 * d**2 / lam
