"""Grid-and-refine maximum-likelihood position and calibration estimators.

Two estimators share one measurement model ``y = alpha * sqrt(Es) * Q a(p) + n``
with ``Q`` rows built from the assumed reflection profile and the fixed
BS-side steering:

* a position estimator that decouples the spherical coordinates of the user —
  elevation and azimuth through a truncated cylindrical-harmonic basis when
  the snapshot count allows it, alternating line searches otherwise;
* a joint position/amplitude-model calibrator that alternates closed-form gain
  and amplitude-floor updates with a 2-D grid over the remaining amplitude
  parameters, then re-runs the position estimator under the calibrated
  profile.

Every grid argmin that participates in an alternation keeps the incumbent as
a candidate and compares exact objectives, so recorded traces never increase.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import minimize, minimize_scalar
from scipy.special import jv

from .geometry import (
    RisGeometry,
    far_field_steering_batch,
    fresnel_bounds,
    near_field_steering,
    near_field_steering_batch,
    normalize_azimuth,
    unit_direction,
)
from .jacobi import bessel_orders, h_vector, min_expansion_order
from .ris import RisAmplitudeParams, beta, profile_matrix
from .signal import b_vector

__all__ = [
    "AmlEstimator",
    "AmlResult",
    "AmmlEstimator",
    "EstimateResult",
    "SearchGrids",
    "aml",
    "amml",
    "qtilde_matrix",
]

# chunk size for batched steering builds; keeps (chunk, M, 3) intermediates small
_CHUNK = 1024
# relative objective-change threshold that stops the alternating loops early
_CONVERGENCE_RTOL = 1e-6
# singular columns below this fraction of the leading R diagonal are dropped
_RANK_RTOL = 1e-10


def qtilde_matrix(weights: np.ndarray, geom: RisGeometry, p_bs) -> np.ndarray:
    """Stack (w_t * a(p_bs))^T rows into the (T, M) reduction matrix."""
    a_bs = near_field_steering(geom, p_bs)
    return weights.T * a_bs[None, :]


def _vector_residuals(columns: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Squared residual of y off each row's span; columns has shape (n, T)."""
    y_norm = np.vdot(y, y).real
    num = np.abs(columns.conj() @ y) ** 2
    den = np.einsum("it,it->i", columns.real, columns.real)
    den += np.einsum("it,it->i", columns.imag, columns.imag)
    out = np.full(columns.shape[0], y_norm)
    good = den > 0
    out[good] -= num[good] / den[good]
    return np.maximum(out, 0.0)  # clamp round-off


def _range_basis(a_matrix: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the numerical column space via pivoted QR.

    Rank-deficient inputs (the harmonic basis collapses toward broadside)
    would otherwise contribute arbitrary orthonormal directions that fit
    noise; columns whose pivot falls below a relative threshold are dropped.
    """
    q, r, _ = scipy.linalg.qr(a_matrix, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return q[:, :0]
    rank = int(np.count_nonzero(diag > _RANK_RTOL * diag[0]))
    return q[:, :rank]


def _subspace_residual(a_matrix: np.ndarray, y: np.ndarray) -> float:
    """Squared residual of y off the column space of a_matrix (T, r)."""
    proj = _range_basis(a_matrix).conj().T @ y
    return max(float(np.vdot(y, y).real - np.vdot(proj, proj).real), 0.0)


def _bounded_refine(fun, lo: float, hi: float, xatol: float) -> tuple[float, float]:
    if hi <= lo:
        return lo, fun(lo)
    res = minimize_scalar(fun, bounds=(lo, hi), method="bounded",
                          options={"xatol": xatol})
    return float(res.x), float(res.fun)


@dataclass(frozen=True)
class SearchGrids:
    """Grid sizes and refinement tolerances for the line and plane searches."""

    elevation_points: int = 121
    azimuth_points: int = 240
    distance_points: int = 200
    kappa_points: int = 64
    phi_points: int = 64
    d_min: Optional[float] = None  # None: lower Fresnel bound
    d_max: Optional[float] = None  # None: upper Fresnel bound
    refine: bool = True
    angle_xatol: float = 1e-5
    distance_xatol: float = 1e-5
    warm_cells: int = 8  # half-width, in grid cells, of warm-started scans

    def distance_grid(self, geom: RisGeometry) -> np.ndarray:
        near, far = fresnel_bounds(geom)
        lo = near if self.d_min is None else self.d_min
        hi = far if self.d_max is None else self.d_max
        if not 0 < lo < hi:
            raise ValueError("invalid distance bounds")
        # log spacing: the objective varies on a roughly 1/d scale
        return np.geomspace(lo, hi, self.distance_points)

    def elevation_grid(self) -> np.ndarray:
        return np.linspace(0.0, np.pi / 2, self.elevation_points)

    def azimuth_grid(self) -> np.ndarray:
        return np.linspace(0.0, 2.0 * np.pi, self.azimuth_points, endpoint=False)


@dataclass(frozen=True)
class EstimateResult:
    position: np.ndarray
    gain: complex
    distance: float
    elevation: float
    azimuth: float
    objective: float
    trace: tuple
    iterations: int


class AmmlEstimator:
    """Position estimator for a fixed schedule under an assumed amplitude model.

    Instances precompute schedule-dependent reductions, so reuse one instance
    across noise realizations of the same configuration.  ``assumed=None``
    means the unit-amplitude profile.
    """

    def __init__(self, geom: RisGeometry, p_bs, phases: np.ndarray,
                 assumed: Optional[RisAmplitudeParams] = None,
                 grids: Optional[SearchGrids] = None,
                 order: Optional[int] = None,
                 i_max: int = 5,
                 symbol_energy: float = 1.0):
        self.geom = geom
        self.p_bs = np.asarray(p_bs, dtype=float)
        self.phases = np.asarray(phases, dtype=float)
        self.assumed = assumed
        self.grids = grids if grids is not None else SearchGrids()
        self.order = min_expansion_order(geom) if order is None else int(order)
        self.i_max = int(i_max)
        self.symbol_energy = float(symbol_energy)
        params = RisAmplitudeParams.ideal() if assumed is None else assumed
        weights = profile_matrix(self.phases, params, ideal=assumed is None)
        self.qtilde = qtilde_matrix(weights, geom, self.p_bs)
        self.n_snapshots = self.qtilde.shape[0]
        self._harmonic_cache: Optional[dict] = None
        self._elevation_scan: Optional[dict] = None

    @property
    def t_threshold(self) -> int:
        """Snapshots needed for the unstructured elevation stage (2N + 1)."""
        return 2 * self.order + 1

    @property
    def uses_harmonic_branch(self) -> bool:
        return self.n_snapshots >= self.t_threshold

    def _position(self, d, elevation, azimuth) -> np.ndarray:
        return self.geom.center + np.asarray(d)[..., None] * unit_direction(
            elevation, azimuth)

    # -- schedule-level reductions for the harmonic branch -------------------
    def _harmonics(self) -> dict:
        """Radius-classed reduction C[t, n, r] = sum_{m in r} Q[t, m] e^{-j n psi_m}.

        The harmonic basis matrix at any elevation is then a Bessel-weighted
        contraction over the (few) distinct element radii instead of over all
        M elements.
        """
        if self._harmonic_cache is not None:
            return self._harmonic_cache
        radii = self.geom.element_radii
        z_unique, class_idx = np.unique(radii, return_inverse=True)
        order_cols = np.argsort(class_idx, kind="stable")
        boundaries = np.flatnonzero(np.r_[1, np.diff(class_idx[order_cols])])
        q_sorted = self.qtilde[:, order_cols]
        psi_sorted = self.geom.element_azimuths[order_cols]
        orders = bessel_orders(self.order)
        c = np.empty((self.n_snapshots, orders.size, z_unique.size), dtype=complex)
        for k, n in enumerate(orders):
            weighted = q_sorted * np.exp(-1j * n * psi_sorted)[None, :]
            c[:, k, :] = np.add.reduceat(weighted, boundaries, axis=1)
        self._harmonic_cache = {"radii": z_unique, "c": c, "orders": orders}
        return self._harmonic_cache

    def _basis_matrix(self, elevation: float) -> np.ndarray:
        """Q G(elevation)^T of shape (T, 2N + 1)."""
        cache = self._harmonics()
        orders = cache["orders"]
        z = self.geom.wavenumber * cache["radii"] * np.sin(elevation)
        j_pos = jv(np.arange(self.order + 1)[:, None], z[None, :])
        if self.order > 0:
            signs = (-1.0) ** np.arange(self.order, 0, -1)
            j_all = np.vstack([signs[:, None] * j_pos[self.order:0:-1], j_pos])
        else:
            j_all = j_pos
        quarter = np.array([1.0 + 0.0j, 1j, -1.0 + 0.0j, -1j])
        weights = quarter[np.mod(orders, 4)][:, None] * j_all
        return np.einsum("tnr,nr->tn", cache["c"], weights)

    def _elevation_residuals(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Projection residuals over the elevation grid, QR factors cached."""
        if self._elevation_scan is None:
            grid = self.grids.elevation_grid()
            factors = [_range_basis(self._basis_matrix(el)) for el in grid]
            self._elevation_scan = {"grid": grid, "factors": factors}
        grid = self._elevation_scan["grid"]
        y_norm = np.vdot(y, y).real
        res = np.empty(grid.size)
        for i, q in enumerate(self._elevation_scan["factors"]):
            proj = q.conj().T @ y
            res[i] = max(float(y_norm - np.vdot(proj, proj).real), 0.0)
        return grid, res

    # -- objective helpers ----------------------------------------------------
    def _nearfield_objectives(self, y: np.ndarray, positions: np.ndarray) -> np.ndarray:
        out = np.empty(positions.shape[0])
        for start in range(0, positions.shape[0], _CHUNK):
            block = positions[start:start + _CHUNK]
            a = near_field_steering_batch(self.geom, block)
            out[start:start + _CHUNK] = _vector_residuals(a @ self.qtilde.T, y)
        return out

    def _position_objective(self, y: np.ndarray, position) -> float:
        c = self.qtilde @ near_field_steering(self.geom, position)
        return float(_vector_residuals(c[None, :], y)[0])

    def _spherical_objective(self, y, d, elevation, azimuth) -> float:
        return self._position_objective(y, self._position(d, elevation, azimuth))

    # -- harmonic (large-T) branch --------------------------------------------
    def _estimate_harmonic(self, y: np.ndarray,
                           warm: Optional[tuple] = None) -> tuple[float, float, float]:
        if warm is None:
            grid, res = self._elevation_residuals(y)
            i = int(np.argmin(res))
        else:
            # scan only a window around the hint; skips the full QR cache
            full = self.grids.elevation_grid()
            center = int(np.argmin(np.abs(full - warm[1])))
            w = self.grids.warm_cells
            grid = full[max(center - w, 0):center + w + 1]
            res = np.array([_subspace_residual(self._basis_matrix(el), y)
                            for el in grid])
            i = int(np.argmin(res))
        el_hat = float(grid[i])
        if self.grids.refine:
            step = self.grids.elevation_grid()[1]
            el_hat, _ = _bounded_refine(
                lambda el: _subspace_residual(self._basis_matrix(el), y),
                max(el_hat - step, 0.0), min(el_hat + step, np.pi / 2),
                self.grids.angle_xatol)

        a_el = self._basis_matrix(el_hat)
        az_grid = self.grids.azimuth_grid()
        h_all = np.exp(1j * np.outer(bessel_orders(self.order), az_grid))
        az_res = _vector_residuals((a_el @ h_all).T, y)
        az_hat = float(az_grid[int(np.argmin(az_res))])
        if self.grids.refine:
            step = az_grid[1] - az_grid[0]

            def az_fun(az):
                c = a_el @ h_vector(az, self.order)
                return float(_vector_residuals(c[None, :], y)[0])

            az_hat, _ = _bounded_refine(az_fun, az_hat - step, az_hat + step,
                                        self.grids.angle_xatol)
            az_hat = float(normalize_azimuth(az_hat))

        d_hat = self._distance_update(y, el_hat, az_hat)
        return self._local_polish(y, d_hat, el_hat, az_hat)

    def _local_polish(self, y: np.ndarray, d: float, elevation: float,
                      azimuth: float, rounds: int = 2) -> tuple[float, float, float]:
        """Coordinate-wise refinement on the exact near-field objective.

        The harmonic surrogate displaces the angle minimizers by a fraction of
        a grid cell; polishing against the exact model removes that floor.
        Brackets stay within one grid cell, and moves are only accepted when
        they lower the exact objective.
        """
        el_step = np.pi / 2 / (self.grids.elevation_points - 1)
        az_step = 2.0 * np.pi / self.grids.azimuth_points
        lo, hi = self.grids.distance_grid(self.geom)[[0, -1]]
        ratio = (hi / lo) ** (1.0 / (self.grids.distance_points - 1))
        best = self._spherical_objective(y, d, elevation, azimuth)
        for _ in range(rounds):
            el_ref, f = _bounded_refine(
                lambda el: self._spherical_objective(y, d, el, azimuth),
                max(elevation - el_step, 0.0), min(elevation + el_step, np.pi / 2),
                self.grids.angle_xatol)
            if f <= best:
                elevation, best = el_ref, f
            az_ref, f = _bounded_refine(
                lambda az: self._spherical_objective(y, d, elevation, az),
                azimuth - az_step, azimuth + az_step, self.grids.angle_xatol)
            if f <= best:
                azimuth, best = float(normalize_azimuth(az_ref)), f
            d_ref, f = _bounded_refine(
                lambda dd: self._spherical_objective(y, dd, elevation, azimuth),
                d / ratio, d * ratio, self.grids.distance_xatol)
            if f <= best:
                d, best = d_ref, f
        return d, elevation, azimuth

    def _distance_update(self, y: np.ndarray, elevation: float, azimuth: float,
                         incumbent: Optional[float] = None) -> float:
        d_grid = self.grids.distance_grid(self.geom)
        pts = self._position(d_grid, np.full_like(d_grid, elevation),
                             np.full_like(d_grid, azimuth))
        res = self._nearfield_objectives(y, pts)
        i = int(np.argmin(res))
        d_hat, best = float(d_grid[i]), float(res[i])
        if self.grids.refine:
            d_ref, f_ref = _bounded_refine(
                lambda d: self._spherical_objective(y, d, elevation, azimuth),
                float(d_grid[max(i - 1, 0)]),
                float(d_grid[min(i + 1, d_grid.size - 1)]),
                self.grids.distance_xatol)
            if f_ref <= best:
                d_hat, best = d_ref, f_ref
        if incumbent is not None:
            if self._spherical_objective(y, incumbent, elevation, azimuth) < best:
                d_hat = incumbent
        return d_hat

    # -- alternating (small-T) branch -------------------------------------------
    def _farfield_residuals(self, y: np.ndarray, el_grid, az_grid) -> np.ndarray:
        ee, aa = np.meshgrid(el_grid, az_grid, indexing="ij")
        els, azs = ee.ravel(), aa.ravel()
        out = np.empty(els.size)
        for start in range(0, els.size, _CHUNK):
            a = far_field_steering_batch(self.geom, els[start:start + _CHUNK],
                                         azs[start:start + _CHUNK])
            out[start:start + _CHUNK] = _vector_residuals(a @ self.qtilde.T, y)
        return out.reshape(el_grid.size, az_grid.size)

    def _angles_update(self, y: np.ndarray, d: float, el_inc: float,
                       az_inc: float) -> tuple[float, float]:
        el_grid = self.grids.elevation_grid()
        az_grid = self.grids.azimuth_grid()
        ee, aa = np.meshgrid(el_grid, az_grid, indexing="ij")
        pts = self._position(np.full(ee.size, d), ee.ravel(), aa.ravel())
        res = self._nearfield_objectives(y, pts).reshape(ee.shape)
        i, j = np.unravel_index(int(np.argmin(res)), res.shape)
        el_hat, az_hat, best = float(el_grid[i]), float(az_grid[j]), float(res[i, j])
        if self.grids.refine:
            el_step = el_grid[1] - el_grid[0]
            az_step = az_grid[1] - az_grid[0]
            el_ref, _ = _bounded_refine(
                lambda el: self._spherical_objective(y, d, el, az_hat),
                max(el_hat - el_step, 0.0), min(el_hat + el_step, np.pi / 2),
                self.grids.angle_xatol)
            az_ref, f_ref = _bounded_refine(
                lambda az: self._spherical_objective(y, d, el_ref, az),
                az_hat - az_step, az_hat + az_step, self.grids.angle_xatol)
            if f_ref <= best:
                el_hat, az_hat, best = el_ref, float(normalize_azimuth(az_ref)), f_ref
        if self._spherical_objective(y, d, el_inc, az_inc) < best:
            el_hat, az_hat = el_inc, az_inc
        return el_hat, az_hat

    def _estimate_alternating(self, y: np.ndarray,
                              warm: Optional[tuple] = None) -> tuple[float, float,
                                                                     float, list, int]:
        if warm is None:
            ff = self._farfield_residuals(y, self.grids.elevation_grid(),
                                          self.grids.azimuth_grid())
            i, j = np.unravel_index(int(np.argmin(ff)), ff.shape)
            el_hat = float(self.grids.elevation_grid()[i])
            az_hat = float(self.grids.azimuth_grid()[j])
            d_hat = self._distance_update(y, el_hat, az_hat)
        else:
            d_hat, el_hat, az_hat = warm
            d_hat = self._distance_update(y, el_hat, az_hat, incumbent=d_hat)
        trace = [self._spherical_objective(y, d_hat, el_hat, az_hat)]
        iterations = 0
        for _ in range(self.i_max):
            el_hat, az_hat = self._angles_update(y, d_hat, el_hat, az_hat)
            trace.append(self._spherical_objective(y, d_hat, el_hat, az_hat))
            d_hat = self._distance_update(y, el_hat, az_hat, incumbent=d_hat)
            trace.append(self._spherical_objective(y, d_hat, el_hat, az_hat))
            iterations += 1
            if trace[-3] - trace[-1] <= _CONVERGENCE_RTOL * max(trace[-3], 1.0):
                break
        return d_hat, el_hat, az_hat, trace, iterations

    # -- public API -------------------------------------------------------------
    def estimate(self, y: np.ndarray,
                 warm_start=None) -> EstimateResult:
        """Estimate the position (and nuisance gain) from one observation.

        ``warm_start`` is an optional Cartesian position hint: the elevation
        scan then covers only a window around it and the alternating branch
        skips its plane-wave initialization.  Used by the calibrated refit,
        where a trustworthy initial estimate already exists.
        """
        y = np.asarray(y, dtype=complex)
        if y.shape != (self.n_snapshots,):
            raise ValueError("observation length does not match the schedule")
        warm = None
        if warm_start is not None:
            offset = np.asarray(warm_start, dtype=float).reshape(3) - self.geom.center
            d0 = float(np.linalg.norm(offset))
            el0 = float(np.arccos(np.clip(offset[2] / d0, -1.0, 1.0)))
            az0 = float(normalize_azimuth(np.arctan2(offset[1], offset[0])))
            warm = (d0, el0, az0)
        if self.uses_harmonic_branch:
            d_hat, el_hat, az_hat = self._estimate_harmonic(y, warm)
            trace_list: list = []
            iterations = 1
        else:
            d_hat, el_hat, az_hat, trace_list, iterations = (
                self._estimate_alternating(y, warm))
        position = self._position(d_hat, el_hat, az_hat)
        c = np.sqrt(self.symbol_energy) * (
            self.qtilde @ near_field_steering(self.geom, position))
        c_norm = np.vdot(c, c).real
        gain = complex(np.vdot(c, y) / c_norm) if c_norm > 0 else 0.0 + 0.0j
        objective = self._position_objective(y, position)
        trace_list.append(objective)
        return EstimateResult(
            position=position,
            gain=gain,
            distance=float(d_hat),
            elevation=float(el_hat),
            azimuth=float(az_hat),
            objective=objective,
            trace=tuple(trace_list),
            iterations=iterations,
        )


def amml(y: np.ndarray, geom: RisGeometry, p_bs, phases: np.ndarray,
         **kwargs) -> EstimateResult:
    """One-shot position estimate under the unit-amplitude assumed model."""
    return AmmlEstimator(geom, p_bs, phases, **kwargs).estimate(y)


# ---------------------------------------------------------------------------
# joint localization and amplitude-model calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AmlResult:
    position: np.ndarray
    gain: complex
    zeta: RisAmplitudeParams
    objective: float
    trace: tuple
    initial_position: Optional[np.ndarray]
    calibration_degenerate: bool
    iterations: int
    zeta_path: tuple = ()


class _CalibrationWorkspace:
    """Per-observation reductions for the amplitude-parameter search.

    With the position frozen, the mean splits as
    ``u_t = beta_min * s_t + (1 - beta_min) * p_t(kappa, phi)`` where ``s_t``
    is amplitude-independent and ``p_t`` carries the shaped part.  ``p_t``
    over the whole (kappa, phi) grid is assembled from circular harmonics of
    the schedule, making the grid cost independent of the element count.
    """

    def __init__(self, geom: RisGeometry, p_bs, phases: np.ndarray,
                 symbol_energy: float, position, kappa_grid, phi_grid,
                 n_harmonics: int = 48, fft_size: int = 2048):
        self.phases = phases
        self.symbol_energy = symbol_energy
        v = b_vector(geom, p_bs, position)
        root_e = np.sqrt(symbol_energy)
        e_pos = np.exp(1j * phases)  # (M, T)
        base = v[:, None] * e_pos
        self.s = root_e * base.sum(axis=0)  # (T,)
        k_max = int(n_harmonics)
        r = np.empty((2 * k_max + 1, phases.shape[1]), dtype=complex)
        r[k_max] = base.sum(axis=0)
        cur = base.copy()
        for k in range(1, k_max + 1):
            cur = cur * e_pos
            r[k_max + k] = cur.sum(axis=0)
        cur = base.copy()
        e_neg = np.conj(e_pos)
        for k in range(1, k_max + 1):
            cur = cur * e_neg
            r[k_max - k] = cur.sum(axis=0)
        # circular harmonics of ((1 + sin u) / 2) ** kappa, one row per kappa
        u = 2.0 * np.pi * np.arange(fft_size) / fft_size
        ks = np.arange(-k_max, k_max + 1)
        coeff = np.empty((kappa_grid.size, ks.size), dtype=complex)
        for i, kap in enumerate(kappa_grid):
            spec = np.fft.fft(((1.0 + np.sin(u)) / 2.0) ** kap) / fft_size
            coeff[i] = spec[np.mod(ks, fft_size)]
        shift = np.exp(-1j * np.outer(ks, phi_grid))
        self.p = root_e * np.einsum("ak,kb,kt->abt", coeff, shift, r,
                                    optimize=True)
        self.kappa_grid = kappa_grid
        self.phi_grid = phi_grid
        self._v = v

    def joint_init(self, y: np.ndarray) -> RisAmplitudeParams:
        """Separable-LS start: per (kappa, phi) cell, profile out gain and floor.

        Writing the mean as c1 * s + c2 * p with c1 = alpha * beta_min and
        c2 = alpha * (1 - beta_min), the unconstrained 2-column LS is closed
        form per cell; the implied floor is projected onto [0, 1] and the best
        feasible cell seeds the alternation.  Without this, a start at
        beta_min = 1 leaves the objective flat in (kappa, phi) and the
        coordinate updates cannot move.
        """
        ss = np.vdot(self.s, self.s).real
        sy = np.vdot(self.s, y)
        ps = np.einsum("abt,t->ab", np.conj(self.p), self.s)
        py = np.einsum("abt,t->ab", np.conj(self.p), y)
        pp = np.einsum("abt,abt->ab", np.conj(self.p), self.p).real
        det = ss * pp - np.abs(ps) ** 2
        ok = det > 1e-12 * ss * pp  # collinear cells (e.g. kappa = 0) excluded
        c1 = np.where(ok, (pp * sy - np.conj(ps) * py) / np.where(ok, det, 1.0), 0.0)
        c2 = np.where(ok, (ss * py - ps * sy) / np.where(ok, det, 1.0), 0.0)
        alpha = c1 + c2
        with np.errstate(invalid="ignore", divide="ignore"):
            floor = np.clip(np.real(c1 / np.where(alpha == 0, 1.0, alpha)), 0.0, 1.0)
        u = alpha * floor
        v = alpha * (1.0 - floor)
        obj = (np.vdot(y, y).real
               - 2.0 * np.real(np.conj(u) * sy + np.conj(v) * py)
               + np.abs(u) ** 2 * ss + np.abs(v) ** 2 * pp
               + 2.0 * np.real(np.conj(u) * v * np.conj(ps)))
        obj = np.where(ok, obj, np.inf)
        i, j = np.unravel_index(int(np.argmin(obj)), obj.shape)
        return RisAmplitudeParams(beta_min=float(floor[i, j]),
                                  kappa=float(self.kappa_grid[i]),
                                  phi=float(self.phi_grid[j]))

    def exact_upsilon(self, zeta: RisAmplitudeParams) -> np.ndarray:
        amp = beta(self.phases, zeta)
        w = amp * np.exp(1j * self.phases)
        return np.sqrt(self.symbol_energy) * (w * self._v[:, None]).sum(axis=0)

    def exact_objective(self, y, gain, zeta: RisAmplitudeParams) -> float:
        r = y - gain * self.exact_upsilon(zeta)
        return float(np.vdot(r, r).real)

    def grid_update(self, y, gain, incumbent: RisAmplitudeParams,
                    refine: bool = True) -> RisAmplitudeParams:
        """Grid argmin over (kappa, phi); keeps the incumbent if it stays better.

        One local polish of each parameter within its grid cell follows the
        argmin so the estimate is not quantized to the grid pitch.
        """
        b_min = incumbent.beta_min
        r0 = y - gain * b_min * self.s
        c = gain * (1.0 - b_min)
        cross = np.einsum("abt,t->ab", np.conj(self.p), r0)
        power = np.einsum("abt,abt->ab", np.conj(self.p), self.p).real
        obj = -2.0 * np.real(np.conj(c) * cross) + np.abs(c) ** 2 * power
        i, j = np.unravel_index(int(np.argmin(obj)), obj.shape)
        candidate = RisAmplitudeParams(beta_min=b_min,
                                       kappa=float(self.kappa_grid[i]),
                                       phi=float(self.phi_grid[j]))
        if refine:
            candidate = self._refine_cell(y, gain, candidate)
        if self.exact_objective(y, gain, candidate) <= self.exact_objective(
                y, gain, incumbent):
            return candidate
        return incumbent

    def _refine_cell(self, y, gain,
                     cell: RisAmplitudeParams) -> RisAmplitudeParams:
        b_min = cell.beta_min
        dk = self.kappa_grid[1] - self.kappa_grid[0]
        dp = self.phi_grid[1] - self.phi_grid[0]
        start = self.exact_objective(y, gain, cell)

        def kappa_obj(k):
            return self.exact_objective(y, gain, RisAmplitudeParams(
                beta_min=b_min, kappa=k, phi=cell.phi))

        lo = max(0.0, cell.kappa - dk)
        k_hat, k_obj = _bounded_refine(kappa_obj, lo, cell.kappa + dk, 1e-4)
        if k_obj >= start:
            k_hat, k_obj = cell.kappa, start

        def phi_obj(p):
            return self.exact_objective(y, gain, RisAmplitudeParams(
                beta_min=b_min, kappa=k_hat, phi=p))

        # the profile is periodic in phi, so an unwrapped bracket is safe
        p_hat, p_obj = _bounded_refine(phi_obj, cell.phi - dp,
                                       cell.phi + dp, 1e-4)
        if p_obj >= k_obj:
            p_hat = cell.phi
        return RisAmplitudeParams(beta_min=b_min, kappa=k_hat, phi=p_hat)


class AmlEstimator:
    """Joint localization and online amplitude calibration.

    With ``known`` set the calibration stage is skipped and the position is
    estimated directly under that amplitude model.

    ``rounds`` repeats (calibrate at the current position, refit the
    position) as long as the exact joint objective keeps dropping.  One round
    is enough when snapshots are plentiful, but with short schedules the
    initial position carries the full mismatch bias and the profile fitted
    there is noticeably off; re-calibrating at the refit position recovers
    most of it.

    The alternation couples distance with the shape parameters, so its last
    steps crawl; ``polish`` finishes with a direct simplex descent of the
    joint concentrated objective over (distance, angles, amplitude
    parameters), accepted only when it improves the incumbent.
    """

    def __init__(self, geom: RisGeometry, p_bs, phases: np.ndarray,
                 grids: Optional[SearchGrids] = None,
                 order: Optional[int] = None,
                 i_max: int = 5,
                 j_max: int = 5,
                 kappa_max: float = 5.0,
                 known: Optional[RisAmplitudeParams] = None,
                 symbol_energy: float = 1.0,
                 calibration_harmonics: int = 48,
                 warm_refit: bool = True,
                 rounds: int = 3,
                 polish: bool = True):
        if rounds < 1:
            raise ValueError("rounds must be at least 1")
        self.geom = geom
        self.p_bs = np.asarray(p_bs, dtype=float)
        self.phases = np.asarray(phases, dtype=float)
        self.grids = grids if grids is not None else SearchGrids()
        self.order = order
        self.i_max = i_max
        self.j_max = int(j_max)
        self.kappa_max = float(kappa_max)
        self.known = known
        self.symbol_energy = float(symbol_energy)
        self.calibration_harmonics = int(calibration_harmonics)
        self.warm_refit = bool(warm_refit)
        self.rounds = int(rounds)
        self.polish = bool(polish)
        self._initial = AmmlEstimator(
            geom, p_bs, phases, assumed=known, grids=self.grids,
            order=order, i_max=i_max, symbol_energy=symbol_energy)

    def _calibrate(self, y: np.ndarray, position,
                   start: Optional[RisAmplitudeParams] = None):
        kappa_grid = np.linspace(0.0, self.kappa_max, self.grids.kappa_points,
                                 endpoint=False)
        phi_grid = np.linspace(0.0, 2.0 * np.pi, self.grids.phi_points,
                               endpoint=False)
        ws = _CalibrationWorkspace(
            self.geom, self.p_bs, self.phases, self.symbol_energy, position,
            kappa_grid, phi_grid, n_harmonics=self.calibration_harmonics)
        zeta = ws.joint_init(y) if start is None else start
        degenerate = False
        trace: list = []
        path: list = []
        prev = np.inf
        iterations = 0
        for _ in range(self.j_max):
            # gain: closed-form least squares against the current profile
            ups = ws.exact_upsilon(zeta)
            denom = np.vdot(ups, ups).real
            gain = complex(np.vdot(ups, y) / denom) if denom > 0 else 0.0 + 0.0j
            trace.append(ws.exact_objective(y, gain, zeta))

            # amplitude floor: KKT candidates {0, 1, interior stationary point}
            shaped = ws.exact_upsilon(RisAmplitudeParams(
                beta_min=0.0, kappa=zeta.kappa, phi=zeta.phi))
            z = y - gain * shaped
            omega = gain * (ws.s - shaped)
            omega_norm = np.vdot(omega, omega).real
            if omega_norm > 1e-12 * np.vdot(ws.s, ws.s).real:
                candidates = [0.0, 1.0]
                interior = float(np.real(np.vdot(omega, z)) / omega_norm)
                if 0.0 < interior < 1.0:
                    candidates.append(interior)
                objs = [float(np.vdot(z - b * omega, z - b * omega).real)
                        for b in candidates]
                b_hat = candidates[int(np.argmin(objs))]
            else:
                b_hat = 1.0  # flat direction: fall back to the unit model
                degenerate = True
            zeta = RisAmplitudeParams(beta_min=b_hat, kappa=zeta.kappa,
                                      phi=zeta.phi)
            trace.append(ws.exact_objective(y, gain, zeta))

            # remaining amplitude parameters: 2-D grid with the incumbent kept
            zeta = ws.grid_update(y, gain, zeta, refine=self.grids.refine)
            obj = ws.exact_objective(y, gain, zeta)
            trace.append(obj)
            path.append(zeta)
            iterations += 1
            if prev - obj <= _CONVERGENCE_RTOL * max(prev, 1.0):
                break
            prev = obj
        return zeta, trace, degenerate, iterations, path

    def estimate(self, y: np.ndarray) -> AmlResult:
        y = np.asarray(y, dtype=complex)
        if self.known is not None:
            res = self._initial.estimate(y)
            return AmlResult(
                position=res.position, gain=res.gain, zeta=self.known,
                objective=res.objective, trace=res.trace,
                initial_position=None, calibration_degenerate=False,
                iterations=res.iterations)
        first = self._initial.estimate(y)
        zeta, trace, degenerate, iterations, path = self._calibrate(
            y, first.position)
        refined = self._refit(y, zeta, first.position)
        for _ in range(self.rounds - 1):
            # the trace must stay non-increasing, so a further round is only
            # recorded when the refit actually improved on the calibration
            # incumbent and the new round improves on the refit
            if refined.objective > trace[-1] + 1e-12 * max(trace[-1], 1.0):
                break
            prev = refined.objective
            z_next, tr, deg, it, pth = self._calibrate(
                y, refined.position, start=zeta)
            cand = self._refit(y, z_next, refined.position)
            iterations += it
            if cand.objective >= prev - _CONVERGENCE_RTOL * max(prev, 1.0):
                break
            trace += tr
            path += pth
            zeta, degenerate, refined = z_next, deg, cand
        position, gain, objective = refined.position, refined.gain, refined.objective
        if self.polish:
            update = self._joint_polish(y, position, zeta, objective)
            if update is not None:
                position, gain, zeta, objective = update
                trace.append(objective)
                path.append(zeta)
        return AmlResult(
            position=position, gain=gain, zeta=zeta,
            objective=objective, trace=tuple(trace),
            initial_position=first.position,
            calibration_degenerate=degenerate,
            iterations=iterations, zeta_path=tuple(path))

    def _refit(self, y: np.ndarray, zeta: RisAmplitudeParams,
               position) -> EstimateResult:
        refit = AmmlEstimator(
            self.geom, self.p_bs, self.phases, assumed=zeta, grids=self.grids,
            order=self.order, i_max=self.i_max,
            symbol_energy=self.symbol_energy)
        return refit.estimate(
            y, warm_start=position if self.warm_refit else None)

    def _joint_polish(self, y: np.ndarray, position, zeta: RisAmplitudeParams,
                      incumbent: float):
        """Simplex descent of the joint concentrated objective.

        Works on the six physical parameters at once, which sidesteps the
        slow distance/shape zigzag of the alternation.  Returns the improved
        (position, gain, zeta, objective) or ``None`` when the incumbent
        already sits at the simplex minimum.
        """
        offset = np.asarray(position, dtype=float).reshape(3) - self.geom.center
        d0 = float(np.linalg.norm(offset))
        el0 = float(np.arccos(np.clip(offset[2] / d0, -1.0, 1.0)))
        az0 = float(np.arctan2(offset[1], offset[0]))
        d_lo, d_hi = fresnel_bounds(self.geom)
        if self.grids.d_min is not None:
            d_lo = self.grids.d_min
        if self.grids.d_max is not None:
            d_hi = self.grids.d_max
        e_phase = np.exp(1j * self.phases)
        root_e = np.sqrt(self.symbol_energy)
        y_norm = np.vdot(y, y).real

        def unpack(x):
            pos = self.geom.center + float(np.clip(x[0], d_lo, d_hi)) * (
                unit_direction(float(np.clip(x[1], 0.0, np.pi / 2)), float(x[2])))
            zt = RisAmplitudeParams(
                beta_min=float(np.clip(x[3], 0.0, 1.0)),
                kappa=float(np.clip(x[4], 0.0, self.kappa_max)),
                phi=float(normalize_azimuth(x[5])))
            return pos, zt

        def upsilon(x):
            pos, zt = unpack(x)
            v = b_vector(self.geom, self.p_bs, pos)
            return root_e * ((beta(self.phases, zt) * e_phase)
                             * v[:, None]).sum(axis=0)

        def objective(x):
            ups = upsilon(x)
            den = np.vdot(ups, ups).real
            if den <= 0.0:
                return y_norm
            return y_norm - np.abs(np.vdot(ups, y)) ** 2 / den

        x0 = np.array([d0, el0, az0, zeta.beta_min, zeta.kappa, zeta.phi])
        # simplex edges sized to the residual wobble of the alternation, not
        # to the search volume; mixed units make the default 5% steps useless
        steps = np.array([0.01 * d0, 5e-3, 5e-3, 0.02, 0.1, 0.05])
        simplex = np.vstack([x0, x0 + np.diag(steps)])
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": 1e-5,
                                "fatol": 1e-10 * max(incumbent, 1.0),
                                "maxfev": 4000})
        if not res.fun < incumbent:
            return None
        pos, zt = unpack(res.x)
        ups = upsilon(res.x)
        den = np.vdot(ups, ups).real
        gain = complex(np.vdot(ups, y) / den) if den > 0 else 0.0 + 0.0j
        return pos, gain, zt, float(res.fun)


def aml(y: np.ndarray, geom: RisGeometry, p_bs, phases: np.ndarray,
        **kwargs) -> AmlResult:
    """One-shot joint position and amplitude-model estimate."""
    return AmlEstimator(geom, p_bs, phases, **kwargs).estimate(y)
