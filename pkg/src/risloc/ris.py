"""Phase-dependent element response of the reflecting surface.

A practical reflecting element cannot apply an arbitrary phase shift at unit
gain: its amplitude varies with the programmed phase. The model used here is

    beta(theta) = (1 - beta_min) * ((sin(theta - phi) + 1) / 2) ** kappa + beta_min

so the element weight is w = beta(theta) * exp(j * theta). beta_min is the
lowest achievable amplitude, phi the phase of minimum amplitude shifted by
-pi/2, and kappa controls how sharply the amplitude dips. beta_min = 1 (or
kappa = 0) recovers the ideal unit-amplitude element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import normalize_azimuth


def wrap_phase(theta):
    """Wrap phase(s) to the half-open interval [-pi, pi)."""
    return np.mod(np.asarray(theta) + np.pi, 2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class RisAmplitudeParams:
    """Amplitude-model parameters (beta_min, kappa, phi).

    phi is wrapped to [0, 2*pi) on construction; beta_min must lie in [0, 1]
    and kappa must be non-negative.
    """

    beta_min: float
    kappa: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.beta_min <= 1.0):
            raise ValueError("beta_min must lie in [0, 1]")
        if not (np.isfinite(self.kappa) and self.kappa >= 0.0):
            raise ValueError("kappa must be non-negative")
        if not np.isfinite(self.phi):
            raise ValueError("phi must be finite")
        object.__setattr__(self, "beta_min", float(self.beta_min))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "phi", float(normalize_azimuth(self.phi)))

    @classmethod
    def ideal(cls) -> "RisAmplitudeParams":
        """Parameters under which every element has exactly unit amplitude."""
        return cls(beta_min=1.0, kappa=0.0, phi=0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.beta_min, self.kappa, self.phi])

    @classmethod
    def from_array(cls, arr) -> "RisAmplitudeParams":
        b, k, p = np.asarray(arr, dtype=float).reshape(3)
        return cls(beta_min=b, kappa=k, phi=p)


def beta(theta, params: RisAmplitudeParams):
    """Element amplitude at phase shift(s) theta.

    The base (sin(theta - phi) + 1) / 2 lies in [0, 1]; 0**0 is taken as 1, so
    kappa = 0 gives unit amplitude everywhere.
    """
    base = 0.5 * (np.sin(np.asarray(theta, dtype=float) - params.phi) + 1.0)
    return (1.0 - params.beta_min) * np.power(base, params.kappa) + params.beta_min


def element_response(theta, params: RisAmplitudeParams, ideal: bool = False):
    """Complex element weight(s) beta(theta) * exp(j*theta); ideal drops the amplitude."""
    phase = np.exp(1j * np.asarray(theta, dtype=float))
    if ideal:
        return phase
    return beta(theta, params) * phase


def gamma_split(phases, kappa: float, phi: float):
    """Split the amplitude into its constant and shaped parts.

    Returns (gamma1, gamma2) with gamma2 = ((sin(phases - phi) + 1) / 2) ** kappa
    and gamma1 = 1 - gamma2, so that beta = beta_min * gamma1 + gamma2. The
    split isolates the beta_min dependence, which the calibration updates
    exploit (the weight matrix is linear in beta_min given kappa and phi).
    """
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    base = 0.5 * (np.sin(np.asarray(phases, dtype=float) - phi) + 1.0)
    gamma2 = np.power(base, kappa)
    return 1.0 - gamma2, gamma2


def profile_matrix(phases, params: RisAmplitudeParams, ideal: bool = False) -> np.ndarray:
    """Surface weight matrix W for an (M, T) phase schedule.

    Column t holds the element weights applied during transmission t. With
    ideal=True the amplitude model is ignored (unit-amplitude weights), which
    is the model assumed by the mismatched estimator.
    """
    phases = np.atleast_2d(np.asarray(phases, dtype=float))
    if ideal:
        return np.exp(1j * phases)
    gamma1, gamma2 = gamma_split(phases, params.kappa, params.phi)
    return (params.beta_min * gamma1 + gamma2) * np.exp(1j * phases)


def random_phase_schedule(n_elements: int, n_transmissions: int, seed) -> np.ndarray:
    """(M, T) schedule of i.i.d. uniform phases on [-pi, pi)."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-np.pi, np.pi, size=(n_elements, n_transmissions))


def save_schedule(path, phases) -> None:
    """Persist a phase schedule as CSV, one row per element."""
    np.savetxt(path, np.atleast_2d(phases), delimiter=",")


def load_schedule(path) -> np.ndarray:
    """Load a phase schedule saved by save_schedule."""
    return np.atleast_2d(np.loadtxt(path, delimiter=","))
