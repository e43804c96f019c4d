"""Rayleigh channels, complex/real stacking, one-bit quantization, and threshold laws."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChannelRealization",
    "ThresholdVector",
    "NoisePower",
    "real_vector",
    "complex_vector",
    "real_matrix",
    "draw_rayleigh_channel",
    "transmit",
    "quantize",
    "prq_threshold_snr_db",
    "prq_threshold_variance",
    "generate_thresholds",
    "perturb_csi",
]


def real_vector(z: np.ndarray) -> np.ndarray:
    """Stack a complex vector as [Re; Im]."""
    z = np.asarray(z)
    return np.concatenate([z.real, z.imag])


def complex_vector(a: np.ndarray) -> np.ndarray:
    """Inverse of real_vector."""
    a = np.asarray(a, dtype=float)
    n = a.size // 2
    return a[:n] + 1j * a[n:]


def real_matrix(z: np.ndarray) -> np.ndarray:
    """Real counterpart [[Re, -Im], [Im, Re]] of a complex matrix."""
    z = np.asarray(z)
    return np.block([[z.real, -z.imag], [z.imag, z.real]])


@dataclass(frozen=True)
class ChannelRealization:
    """Complex N x K channel together with its 2N x 2K real counterpart."""

    complex_matrix: np.ndarray
    real_matrix: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "real_matrix", real_matrix(self.complex_matrix))

    @property
    def n_antennas(self) -> int:
        return self.complex_matrix.shape[0]

    @property
    def n_users(self) -> int:
        return self.complex_matrix.shape[1]


@dataclass(frozen=True)
class ThresholdVector:
    """Complex quantization thresholds with their target variance.

    After rescaling, ``norm(complex_thresholds)**2 == n * variance`` holds
    exactly; zero variance means the all-zero vector.
    """

    complex_thresholds: np.ndarray
    variance: float

    @property
    def real_view(self) -> np.ndarray:
        return real_vector(self.complex_thresholds)

    @classmethod
    def zeros(cls, n: int) -> "ThresholdVector":
        return cls(np.zeros(n, dtype=complex), 0.0)


@dataclass(frozen=True)
class NoisePower:
    """Per-complex-dimension noise power N0 and the matching linear SNR (unit symbol energy)."""

    n0: float

    @property
    def rho(self) -> float:
        return 1.0 / self.n0

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "NoisePower":
        return cls(10.0 ** (-snr_db / 10.0))


def draw_rayleigh_channel(n_antennas: int, n_users: int, rng: np.random.Generator) -> ChannelRealization:
    """Draw an i.i.d. unit-variance complex Gaussian channel matrix."""
    if not 1 <= n_users <= n_antennas:
        raise ValueError(f"need n_antennas >= n_users >= 1, got {n_antennas}, {n_users}")
    shape = (n_antennas, n_users)
    h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return ChannelRealization(h)


def transmit(
    channel: ChannelRealization,
    x: np.ndarray,
    n0: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Propagate a complex symbol vector and add circularly symmetric noise of power n0."""
    x = np.asarray(x)
    if x.shape != (channel.n_users,):
        raise ValueError(f"symbol vector shape {x.shape} does not match K={channel.n_users}")
    if n0 <= 0:
        raise ValueError("noise power must be positive")
    n = channel.n_antennas
    w = np.sqrt(n0 / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return channel.complex_matrix @ x + w


def quantize(y: np.ndarray, thresholds: ThresholdVector) -> np.ndarray:
    """One-bit quantize each I/Q component against its threshold.

    Returns the length-2N sign vector [Re; Im] with the convention sign(0) = +1.
    """
    y = np.asarray(y)
    diff = y - thresholds.complex_thresholds
    if diff.shape != y.shape:
        raise ValueError("threshold length does not match observation length")
    re = np.where(diff.real >= 0, 1.0, -1.0)
    im = np.where(diff.imag >= 0, 1.0, -1.0)
    return np.concatenate([re, im])


def prq_threshold_snr_db(n_users: int, n_antennas: int) -> float:
    """Threshold SNR (dB) of the pseudo-random quantization law, 5*log10(100*K/N)."""
    return 5.0 * np.log10(100.0 * n_users / n_antennas)


def prq_threshold_variance(rho_t_db: float, n0: float) -> float:
    """Threshold variance ramp: max(0, 1/rho_t - N0) with rho_t taken linearly."""
    rho_t = 10.0 ** (rho_t_db / 10.0)
    return max(0.0, 1.0 / rho_t - n0)


def generate_thresholds(
    n: int, sigma_tau_sq: float, rng: np.random.Generator
) -> ThresholdVector:
    """Draw complex Gaussian thresholds and rescale to squared norm n * sigma_tau_sq."""
    if sigma_tau_sq < 0:
        raise ValueError("threshold variance must be nonnegative")
    if sigma_tau_sq == 0.0:
        return ThresholdVector.zeros(n)
    tau = np.sqrt(sigma_tau_sq / 2.0) * (
        rng.standard_normal(n) + 1j * rng.standard_normal(n)
    )
    norm_sq = np.vdot(tau, tau).real
    tau = tau * np.sqrt(n * sigma_tau_sq / norm_sq)
    return ThresholdVector(tau, sigma_tau_sq)


def perturb_csi(
    channel: ChannelRealization, sigma_e_sq: float, rng: np.random.Generator
) -> ChannelRealization:
    """Add i.i.d. complex Gaussian estimation error of variance sigma_e_sq per entry."""
    if sigma_e_sq < 0:
        raise ValueError("error variance must be nonnegative")
    if sigma_e_sq == 0.0:
        return channel
    shape = channel.complex_matrix.shape
    err = np.sqrt(sigma_e_sq / 2.0) * (
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    )
    return ChannelRealization(channel.complex_matrix + err)
