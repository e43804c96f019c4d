"""Nearest codeword detector: candidate refinement of a first-stage estimate.

Coordinates of the estimate that land close to a decision boundary are treated
as unreliable and branched into both neighboring levels; the resulting
candidate vectors are ranked by the Hamming distance between their noiseless
sign signatures and the actual observation, and the survivors go through
restricted maximum-likelihood selection.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .constellation import Constellation
from .likelihood import LikelihoodContext, ml_detect
from .system_model import ChannelRealization, ThresholdVector

__all__ = [
    "NcdConfig",
    "ReliabilityPartition",
    "NcdResult",
    "nearest_boundaries",
    "partition_reliability",
    "candidate_element_sets",
    "candidate_vector_set",
    "spatial_codewords",
    "hamming_distances",
    "ncd_detect",
]


@dataclass(frozen=True)
class NcdConfig:
    """Hyperparameters of the nearest codeword detector."""

    max_candidates: int  # cap P on the set entering the final ML step
    gamma: float  # half-width of the unreliable band around each boundary
    u_max: int  # cap on the number of unreliable coordinates
    shrink_factor: float = 0.95
    max_shrinks: int = 200

    def __post_init__(self):
        if self.max_candidates < 1 or self.gamma <= 0 or self.u_max < 0:
            raise ValueError("need max_candidates >= 1, gamma > 0, u_max >= 0")
        if not 0.0 < self.shrink_factor < 1.0:
            raise ValueError("shrink_factor must lie in (0, 1)")

    @classmethod
    def defaults(cls, constellation: Constellation, n_users: int) -> "NcdConfig":
        """Standard settings: P = 2K, gamma = d/2, U_max = K."""
        return cls(
            max_candidates=2 * n_users,
            gamma=constellation.half_spacing / 2.0,
            u_max=n_users,
        )


@dataclass(frozen=True)
class ReliabilityPartition:
    """Split of estimate coordinates into reliable and unreliable index sets."""

    nearest_boundaries: np.ndarray
    reliable: np.ndarray
    unreliable: np.ndarray
    effective_gamma: float
    forced: bool = False


@dataclass(frozen=True)
class NcdResult:
    estimate: np.ndarray
    candidate_set_size: int
    partition: ReliabilityPartition


def nearest_boundaries(x_est: np.ndarray, boundary_set: np.ndarray) -> np.ndarray:
    """Closest decision boundary to each coordinate; ties go to the larger boundary."""
    x = np.asarray(x_est, dtype=float)
    b = np.asarray(boundary_set, dtype=float)
    pos = np.searchsorted(b, x)
    lo = np.clip(pos - 1, 0, b.size - 1)
    hi = np.clip(pos, 0, b.size - 1)
    pick_hi = np.abs(x - b[hi]) <= np.abs(x - b[lo])
    return np.where(pick_hi, b[hi], b[lo])


def partition_reliability(
    x_est: np.ndarray, boundaries: np.ndarray, config: NcdConfig
) -> ReliabilityPartition:
    """Mark coordinates within gamma of their boundary unreliable, shrinking
    gamma geometrically until at most u_max coordinates remain unreliable."""
    gap = np.abs(np.asarray(x_est, dtype=float) - boundaries)
    gamma = config.gamma
    shrinks = 0
    unreliable = gap <= gamma
    while int(unreliable.sum()) > config.u_max and shrinks < config.max_shrinks:
        gamma *= config.shrink_factor
        shrinks += 1
        unreliable = gap <= gamma

    forced = False
    if int(unreliable.sum()) > config.u_max:
        # Gaps tied at (or indistinguishable from) zero: keep the u_max smallest.
        forced = True
        order = np.argsort(gap, kind="stable")
        unreliable = np.zeros_like(unreliable)
        unreliable[order[: config.u_max]] = True

    idx = np.arange(gap.size)
    return ReliabilityPartition(
        nearest_boundaries=np.asarray(boundaries, dtype=float),
        reliable=idx[~unreliable],
        unreliable=idx[unreliable],
        effective_gamma=gamma,
        forced=forced,
    )


def candidate_element_sets(
    partition: ReliabilityPartition, x_est: np.ndarray, constellation: Constellation
) -> list:
    """Per-coordinate candidate levels: the nearest level when reliable, the
    two neighbors of the nearest boundary when unreliable."""
    x = np.asarray(x_est, dtype=float)
    d = constellation.half_spacing
    unreliable = np.zeros(x.size, dtype=bool)
    unreliable[partition.unreliable] = True
    sets = []
    for k in range(x.size):
        if unreliable[k]:
            t = partition.nearest_boundaries[k]
            pair = constellation.nearest_level(np.array([t - d, t + d]))
            sets.append(np.asarray(pair, dtype=float))
        else:
            sets.append(np.array([constellation.nearest_level(x[k])]))
    return sets


def candidate_vector_set(element_sets) -> np.ndarray:
    """Cartesian product of the per-coordinate sets, in enumeration order."""
    return np.array([row for row in product(*element_sets)], dtype=float)


def spatial_codewords(
    candidates: np.ndarray, h_real: np.ndarray, tau_real: np.ndarray
) -> np.ndarray:
    """Sign signature sign(H x - tau) each candidate would produce noiselessly."""
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    s = candidates @ h_real.T - tau_real
    return np.where(s >= 0, 1.0, -1.0)


def hamming_distances(codewords: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Number of sign positions where each codeword differs from the observation."""
    return np.count_nonzero(np.atleast_2d(codewords) != np.asarray(r), axis=1)


def ncd_detect(
    x_est: np.ndarray,
    r: np.ndarray,
    channel: ChannelRealization,
    thresholds: ThresholdVector,
    n0: float,
    config: NcdConfig,
    constellation: Constellation,
) -> NcdResult:
    """Refine a first-stage estimate by restricted ML over nearest codewords.

    Builds the candidate set from the reliability partition; when it exceeds
    ``max_candidates``, keeps the symbol-by-symbol decision plus the
    ``max_candidates - 1`` candidates whose sign signatures are closest in
    Hamming distance to the observation.
    """
    x_est = np.asarray(x_est, dtype=float)
    r = np.asarray(r, dtype=float)

    bounds = nearest_boundaries(x_est, constellation.boundary_set)
    part = partition_reliability(x_est, bounds, config)
    sets = candidate_element_sets(part, x_est, constellation)
    candidates = candidate_vector_set(sets)

    x_check = np.asarray(constellation.nearest_level(x_est), dtype=float)

    if candidates.shape[0] > config.max_candidates:
        keep = ~np.all(candidates == x_check, axis=1)
        rest = candidates[keep]
        if rest.shape[0] > 1:
            cw = spatial_codewords(rest, channel.real_matrix, thresholds.real_view)
            dist = hamming_distances(cw, r)
            order = np.argsort(dist, kind="stable")
            rest = rest[order[: config.max_candidates - 1]]
        candidates = np.vstack([x_check[None, :], rest])

    ctx = LikelihoodContext.from_channel(channel, r, thresholds, n0)
    est = ml_detect(ctx, candidates)
    return NcdResult(est, candidates.shape[0], part)
