"""Received-signal model for the reflected (BS - surface - UE) path.

The direct path is blocked; transmission t of a constant pilot sqrt(E_s)
reaches the receiver as

    y_t = alpha * w_t^T b(p) * sqrt(E_s) + n_t,

where b(p) is the elementwise product of the steering vectors toward the UE
position p and the (known) BS position, w_t is column t of the surface weight
matrix, alpha the cascaded complex channel gain, and n_t circular complex
Gaussian noise with variance N0 (N0/2 per real dimension).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import RisGeometry, near_field_steering
from .ris import RisAmplitudeParams


@dataclass(frozen=True)
class ParamVector:
    """Channel parameters: complex gain, UE position, optional amplitude model.

    The amplitude parameters ride along so that one object can describe either
    the assumed model (gain + position, 5 real parameters) or the true model
    (8 real parameters, amplitude model included).
    """

    gain: complex
    position: np.ndarray
    zeta: RisAmplitudeParams | None = None

    def __post_init__(self):
        position = np.asarray(self.position, dtype=float).reshape(3)
        if not np.isfinite(position).all():
            raise ValueError("position must be finite")
        if not np.isfinite(self.gain):
            raise ValueError("gain must be finite")
        object.__setattr__(self, "gain", complex(self.gain))
        object.__setattr__(self, "position", position)

    def as_array5(self) -> np.ndarray:
        """Real parameter vector [Re(gain), Im(gain), x, y, z]."""
        return np.concatenate([[self.gain.real, self.gain.imag], self.position])

    def as_array8(self) -> np.ndarray:
        """Real parameter vector with the amplitude model appended."""
        if self.zeta is None:
            raise ValueError("no amplitude parameters attached")
        return np.concatenate([self.as_array5(), self.zeta.as_array()])

    @classmethod
    def from_array5(cls, arr, zeta: RisAmplitudeParams | None = None) -> "ParamVector":
        arr = np.asarray(arr, dtype=float).reshape(5)
        return cls(gain=complex(arr[0], arr[1]), position=arr[2:], zeta=zeta)

    def with_gain(self, gain: complex) -> "ParamVector":
        return replace(self, gain=gain)


def b_vector(geom: RisGeometry, p_bs, p) -> np.ndarray:
    """Cascaded steering vector: elementwise product of the UE- and BS-side vectors."""
    return near_field_steering(geom, p) * near_field_steering(geom, p_bs)


def noiseless_mean(params: ParamVector, weights: np.ndarray, geom: RisGeometry, p_bs,
                   symbol_energy: float = 1.0) -> np.ndarray:
    """Mean received vector alpha * W^T b(p) * sqrt(E_s), one entry per transmission."""
    if symbol_energy <= 0:
        raise ValueError("symbol energy must be positive")
    b = b_vector(geom, p_bs, params.position)
    return params.gain * (weights.T @ b) * np.sqrt(symbol_energy)


def observe(mean: np.ndarray, noise_var: float, rng) -> np.ndarray:
    """One noisy snapshot: mean plus circular complex Gaussian noise.

    noise_var is the total per-sample variance N0; each real dimension gets
    N0/2. rng may be a Generator or anything np.random.default_rng accepts.
    """
    if noise_var < 0:
        raise ValueError("noise variance must be non-negative")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    mean = np.asarray(mean)
    scale = np.sqrt(noise_var / 2.0)
    noise = rng.standard_normal(mean.shape) + 1j * rng.standard_normal(mean.shape)
    return mean + scale * noise


def snr(params: ParamVector, weights: np.ndarray, geom: RisGeometry, p_bs,
        symbol_energy: float, noise_var: float) -> tuple[float, float]:
    """Receive SNR averaged over the schedule, as (linear, dB).

    SNR = E_s * |alpha|^2 / (T * N0) * sum_t |b(p)^T w_t|^2.
    """
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    b = b_vector(geom, p_bs, params.position)
    gains = np.abs(weights.T @ b) ** 2
    linear = symbol_energy * abs(params.gain) ** 2 * gains.sum() / (gains.size * noise_var)
    return float(linear), float(10.0 * np.log10(linear))


def solve_noise_for_snr(target_db: float, params: ParamVector, weights: np.ndarray,
                        geom: RisGeometry, p_bs, symbol_energy: float = 1.0) -> float:
    """Noise variance N0 that puts the receive SNR at target_db."""
    b = b_vector(geom, p_bs, params.position)
    gains = np.abs(weights.T @ b) ** 2
    target = 10.0 ** (target_db / 10.0)
    return float(symbol_energy * abs(params.gain) ** 2 * gains.sum() / (gains.size * target))
