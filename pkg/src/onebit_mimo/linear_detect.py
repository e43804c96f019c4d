"""Linear one-bit detectors: Bussgang-based and label-scaled conventional filters.

The Bussgang route linearizes the quantizer around the actual thresholds (gain
plus output bias per antenna); the conventional route treats thresholds as
extra Gaussian noise and restores amplitude through a single scalar label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .system_model import ChannelRealization, ThresholdVector

__all__ = [
    "BussgangDecomposition",
    "bussgang_gain_bias",
    "bussgang_decompose",
    "bmrc_detect",
    "bzf_detect",
    "quantization_label",
    "mrc_detect",
    "zf_detect",
]


@dataclass(frozen=True)
class BussgangDecomposition:
    """Per-antenna linearization of the one-bit quantizer for a fixed channel.

    ``effective_channel`` applies the gain componentwise per I/Q rail:
    its (n, k) entry is Re(g_n) Re(h_nk) + j Im(g_n) Im(h_nk).
    """

    gain: np.ndarray
    bias: np.ndarray
    effective_channel: np.ndarray
    cy_diag: np.ndarray


def bussgang_gain_bias(tau: np.ndarray, cy_diag: np.ndarray):
    """Gain and bias of the quantizer linearization, per antenna.

    ``cy_diag`` is the per-antenna variance of the unquantized observation.
    The gain shrinks exponentially in the squared threshold; the bias is the
    mean sign 2*Phi(-tau/sigma) - 1 on each rail.
    """
    tau = np.asarray(tau)
    cy = np.asarray(cy_diag, dtype=float)
    amp = np.sqrt(4.0 / (np.pi * cy))
    gain = amp * np.exp(-tau.real**2 / cy) + 1j * amp * np.exp(-tau.imag**2 / cy)
    sigma = np.sqrt(cy / 2.0)
    bias = (2.0 * ndtr(-tau.real / sigma) - 1.0) + 1j * (
        2.0 * ndtr(-tau.imag / sigma) - 1.0
    )
    return gain, bias


def bussgang_decompose(
    channel: ChannelRealization, thresholds: ThresholdVector, n0: float
) -> BussgangDecomposition:
    """Linearize the quantized observation model for one channel realization."""
    if n0 <= 0:
        raise ValueError("noise power must be positive")
    h = channel.complex_matrix
    cy_diag = np.sum(np.abs(h) ** 2, axis=1) + n0
    gain, bias = bussgang_gain_bias(thresholds.complex_thresholds, cy_diag)
    h_eff = gain.real[:, None] * h.real + 1j * (gain.imag[:, None] * h.imag)
    return BussgangDecomposition(gain, bias, h_eff, cy_diag)


def _complex_observation(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    n = r.size // 2
    return r[:n] + 1j * r[n:]


def bmrc_detect(r: np.ndarray, decomp: BussgangDecomposition) -> np.ndarray:
    """Matched-filter estimate on the debiased observation, normalized per user."""
    r_e = _complex_observation(r) - decomp.bias
    h_eff = decomp.effective_channel
    lam = 1.0 / np.sum(np.abs(h_eff) ** 2, axis=0)
    return lam * (h_eff.conj().T @ r_e)


def bzf_detect(r: np.ndarray, decomp: BussgangDecomposition) -> np.ndarray:
    """Left-inverse (least-squares) estimate on the debiased observation."""
    r_e = _complex_observation(r) - decomp.bias
    h_eff = decomp.effective_channel
    est, _, rank, _ = np.linalg.lstsq(h_eff, r_e, rcond=None)
    if rank < h_eff.shape[1]:
        raise np.linalg.LinAlgError("effective channel is rank deficient")
    return est


def quantization_label(n_users: int, n0: float, sigma_tau_sq: float = 0.0) -> float:
    """Amplitude label sqrt(pi * (K + N0 + sigma_tau^2) / 4) for sign-only observations."""
    if n_users < 0 or sigma_tau_sq < 0 or n0 <= 0:
        raise ValueError("arguments must be nonnegative with positive noise power")
    return math.sqrt(math.pi * (n_users + n0 + sigma_tau_sq) / 4.0)


def mrc_detect(r: np.ndarray, channel: ChannelRealization, label: float) -> np.ndarray:
    """Label-scaled matched filter applied directly to the sign observations."""
    h = channel.complex_matrix
    lam = 1.0 / np.sum(np.abs(h) ** 2, axis=0)
    return label * (lam * (h.conj().T @ _complex_observation(r)))


def zf_detect(r: np.ndarray, channel: ChannelRealization, label: float) -> np.ndarray:
    """Label-scaled left inverse of the channel applied to the sign observations."""
    h = channel.complex_matrix
    est, _, rank, _ = np.linalg.lstsq(h, _complex_observation(r), rcond=None)
    if rank < h.shape[1]:
        raise np.linalg.LinAlgError("channel is rank deficient")
    return label * est
