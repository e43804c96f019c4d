"""Exact small-system rate analysis and space-code distance statistics.

Mutual information between the input symbols and the sign observations is
computed by full enumeration (entropy difference, log-domain accumulation),
so it is limited to small antenna counts and alphabets.  The space-code view
treats each noiseless sign signature as a codeword and scores a (channel,
threshold) pair by the minimum pairwise Hamming distance of its codebook.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, logsumexp

from .constellation import Constellation, build_constellation
from .likelihood import exhaustive_candidates
from .ncd import spatial_codewords
from .system_model import (
    ChannelRealization,
    ThresholdVector,
    draw_rayleigh_channel,
    generate_thresholds,
    prq_threshold_snr_db,
    prq_threshold_variance,
)

__all__ = [
    "RateSample",
    "ChannelRateSummary",
    "SpaceCodeStats",
    "MAX_ENUM_DIM",
    "MAX_ENUM_CODEBOOK",
    "outcome_distribution",
    "conditional_mutual_information",
    "rate_survey",
    "min_hamming_distance",
    "avg_min_hamming",
]

MAX_ENUM_DIM = 20  # cap on 2N for outcome enumeration
MAX_ENUM_CODEBOOK = 4096  # cap on M**K for rate enumeration
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class RateSample:
    mutual_information: float
    channel_id: int
    threshold_id: int
    snr_db: float


@dataclass(frozen=True)
class ChannelRateSummary:
    channel_id: int
    mean_rate: float
    max_rate: float
    n_samples: int


@dataclass(frozen=True)
class SpaceCodeStats:
    d_min: int
    code_rate: float
    codebook_size: int


def _check_enum_caps(channel: ChannelRealization, constellation: Constellation) -> None:
    two_n = 2 * channel.n_antennas
    codebook = constellation.order**channel.n_users
    if two_n > MAX_ENUM_DIM:
        raise ValueError(
            f"outcome enumeration needs 2N <= {MAX_ENUM_DIM}, got 2N={two_n}"
        )
    if codebook > MAX_ENUM_CODEBOOK:
        raise ValueError(
            f"rate enumeration needs M**K <= {MAX_ENUM_CODEBOOK}, got {codebook}"
        )


def _symbol_logprobs(
    channel: ChannelRealization,
    thresholds: ThresholdVector,
    rho: float,
    constellation: Constellation,
):
    """Per-position log P(r_n = +1 | x) and log P(r_n = -1 | x) for every symbol vector."""
    x_all = exhaustive_candidates(
        constellation, channel.n_users, cap=MAX_ENUM_CODEBOOK
    )
    scale = math.sqrt(2.0 * rho)
    args = scale * (x_all @ channel.real_matrix.T - thresholds.real_view)
    return log_ndtr(args), log_ndtr(-args)


def _outcome_bits(lo: int, hi: int, width: int) -> np.ndarray:
    """Rows lo..hi of the 2**width outcome table as a {0,1} matrix."""
    idx = np.arange(lo, hi, dtype=np.int64)
    return ((idx[:, None] >> np.arange(width)) & 1).astype(float)


def outcome_distribution(
    channel: ChannelRealization,
    thresholds: ThresholdVector,
    rho: float,
    constellation: Constellation,
) -> np.ndarray:
    """Probability of every sign-vector outcome under the uniform input prior."""
    _check_enum_caps(channel, constellation)
    log_p, log_m = _symbol_logprobs(channel, thresholds, rho, constellation)
    width = 2 * channel.n_antennas
    bits = _outcome_bits(0, 2**width, width)
    log_joint = bits @ log_p.T + (1.0 - bits) @ log_m.T
    return np.exp(logsumexp(log_joint, axis=1) - math.log(log_p.shape[0]))


def conditional_mutual_information(
    channel: ChannelRealization,
    thresholds: ThresholdVector,
    rho: float,
    constellation: Constellation,
    block: int = 1 << 14,
) -> float:
    """Exact mutual information (bits) between input symbols and sign observations.

    Computed as the entropy of the outcome distribution minus the conditional
    entropy, the latter a sum of per-position binary entropies.  Outcomes are
    enumerated in blocks to bound memory.
    """
    _check_enum_caps(channel, constellation)
    log_p, log_m = _symbol_logprobs(channel, thresholds, rho, constellation)
    n_symbols = log_p.shape[0]

    # Conditional entropy: mean over symbols of summed binary entropies.
    h_cond = -float(
        np.sum(np.exp(log_p) * log_p + np.exp(log_m) * log_m)
    ) / (n_symbols * _LN2)

    # Outcome entropy, accumulated over blocks of sign vectors.
    width = 2 * channel.n_antennas
    total = 1 << width
    log_prior = math.log(n_symbols)
    h_out = 0.0
    for lo in range(0, total, block):
        bits = _outcome_bits(lo, min(lo + block, total), width)
        log_joint = bits @ log_p.T + (1.0 - bits) @ log_m.T
        log_r = logsumexp(log_joint, axis=1) - log_prior
        h_out -= float(np.sum(np.exp(log_r) * log_r)) / _LN2

    # The entropy difference can dip a few ulps below zero as rho -> 0.
    return max(0.0, h_out - h_cond)


def rate_survey(
    n_antennas: int,
    n_users: int,
    mod_order: int,
    rho: float,
    n_thresholds: int,
    n_channels: int,
    scheme: str,
    rng: np.random.Generator,
):
    """Mutual information over random channels and (for prq) random thresholds.

    Returns the individual samples and a per-channel summary (mean and max
    over the threshold draws; ztq yields a single zero-threshold sample).
    """
    if scheme not in ("ztq", "prq"):
        raise ValueError(f"unknown quantizer scheme {scheme!r}")
    constellation = build_constellation(mod_order)
    snr_db = 10.0 * math.log10(rho)
    n0 = 1.0 / rho
    sigma_tau_sq = prq_threshold_variance(
        prq_threshold_snr_db(n_users, n_antennas), n0
    )

    samples = []
    summaries = []
    for channel_id in range(n_channels):
        channel = draw_rayleigh_channel(n_antennas, n_users, rng)
        if scheme == "ztq":
            draws = [ThresholdVector.zeros(n_antennas)]
        else:
            draws = [
                generate_thresholds(n_antennas, sigma_tau_sq, rng)
                for _ in range(n_thresholds)
            ]
        rates = [
            conditional_mutual_information(channel, tau, rho, constellation)
            for tau in draws
        ]
        samples.extend(
            RateSample(rate, channel_id, threshold_id, snr_db)
            for threshold_id, rate in enumerate(rates)
        )
        summaries.append(
            ChannelRateSummary(
                channel_id, float(np.mean(rates)), float(np.max(rates)), len(rates)
            )
        )
    return samples, summaries


def min_hamming_distance(
    channel: ChannelRealization,
    thresholds: ThresholdVector,
    constellation: Constellation,
    cap: int = 65536,
    block: int = 2048,
) -> SpaceCodeStats:
    """Minimum pairwise Hamming distance over the full spatial codebook."""
    x_all = exhaustive_candidates(constellation, channel.n_users, cap=cap)
    codewords = spatial_codewords(
        x_all, channel.real_matrix, thresholds.real_view
    )
    m, two_n = codewords.shape
    best = two_n + 1
    for lo in range(0, m, block):
        hi = min(lo + block, m)
        gram = codewords[lo:hi] @ codewords.T
        dist = (two_n - gram) / 2.0
        rows = np.arange(lo, hi)
        dist[np.arange(hi - lo), rows] = two_n + 1  # mask self-pairs
        best = min(best, int(round(dist.min())))
    rate = channel.n_users * constellation.bits_per_symbol / (2.0 * channel.n_antennas)
    return SpaceCodeStats(d_min=best, code_rate=rate, codebook_size=m)


def avg_min_hamming(
    n_antennas: int,
    n_users: int,
    mod_order: int,
    scheme: str,
    n_realizations: int,
    rng: np.random.Generator,
) -> float:
    """Average d_min over random channel/threshold pairs at infinite SNR.

    The prq threshold variance follows the ramp law with the noise term at
    zero, i.e. sigma_tau^2 = 1/rho_t.
    """
    if scheme not in ("ztq", "prq"):
        raise ValueError(f"unknown quantizer scheme {scheme!r}")
    constellation = build_constellation(mod_order)
    sigma_tau_sq = (
        10.0 ** (-prq_threshold_snr_db(n_users, n_antennas) / 10.0)
        if scheme == "prq"
        else 0.0
    )
    total = 0
    for _ in range(n_realizations):
        channel = draw_rayleigh_channel(n_antennas, n_users, rng)
        tau = (
            generate_thresholds(n_antennas, sigma_tau_sq, rng)
            if sigma_tau_sq > 0
            else ThresholdVector.zeros(n_antennas)
        )
        total += min_hamming_distance(channel, tau, constellation).d_min
    return total / n_realizations
