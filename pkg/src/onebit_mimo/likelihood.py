"""Numerically safe Gaussian log-CDF machinery and likelihood-based detection.

ln Phi(x) and its first two logarithmic derivatives diverge in finite precision
once Phi(x) underflows (x below roughly -38).  Each function therefore switches
at a cutoff ``c`` to a tail rule that tracks the exact value to better than
1e-6 at the seam:

* ``safe_ln_phi``: linear extension ln Phi(c) + varphi(c) * (x - c),
* ``varphi``:      -x - 1/x + 2/x**3   (leading behaviour -x),
* ``psi``:         -1 + 1/x**2 - 6/x**4 (leading behaviour -1).

Above the cutoff, varphi is evaluated through the scaled complementary error
function so the ratio stays accurate without ever forming Phi(x) itself.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcx, log_ndtr

from .constellation import Constellation
from .system_model import ChannelRealization, ThresholdVector

__all__ = [
    "DEFAULT_CUTOFF",
    "safe_ln_phi",
    "varphi",
    "psi",
    "LikelihoodContext",
    "log_likelihood",
    "log_likelihood_batch",
    "ml_detect",
    "exhaustive_candidates",
    "EXHAUSTIVE_CAP",
]

DEFAULT_CUTOFF = -38.2

# Smallest positive double; floor for varphi where the true ratio underflows
# (x beyond ~ +38) so positivity survives on the far right tail.
_VARPHI_FLOOR = float(np.nextafter(0.0, 1.0))

_SQRT2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _varphi_exact(x: np.ndarray) -> np.ndarray:
    # phi(x)/Phi(x) = sqrt(2/pi) / erfcx(-x/sqrt(2)); erfcx overflows to inf
    # for x beyond ~ +37.7, where the quotient correctly collapses to 0.
    with np.errstate(over="ignore"):
        out = _SQRT_2_OVER_PI / erfcx(-x / _SQRT2)
    return np.maximum(out, _VARPHI_FLOOR)


def safe_ln_phi(x, cutoff: float = DEFAULT_CUTOFF):
    """ln Phi(x), linearly extended below the cutoff to avoid divergence."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    low = x < cutoff
    out[~low] = log_ndtr(x[~low])
    if low.any():
        anchor = float(log_ndtr(cutoff))
        slope = float(_varphi_exact(np.atleast_1d(cutoff))[0])
        out[low] = anchor + slope * (x[low] - cutoff)
    return float(out[0]) if scalar else out


def varphi(x, cutoff: float = DEFAULT_CUTOFF):
    """phi(x)/Phi(x), the derivative of ln Phi; asymptotic tail below the cutoff."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    low = x < cutoff
    out[~low] = _varphi_exact(x[~low])
    if low.any():
        xl = x[low]
        out[low] = -xl - 1.0 / xl + 2.0 / xl**3
    return float(out[0]) if scalar else out


def psi(x, cutoff: float = DEFAULT_CUTOFF):
    """Second derivative of ln Phi: -x*varphi(x) - varphi(x)**2, in [-1, 0)."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    low = x < cutoff
    xh = x[~low]
    v = _varphi_exact(xh)
    out[~low] = -xh * v - v * v
    if low.any():
        xl = x[low]
        out[low] = -1.0 + 1.0 / xl**2 - 6.0 / xl**4
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class LikelihoodContext:
    """Real-valued quantities entering the one-bit observation likelihood.

    Holds the stacked 2N x 2K channel, the observed sign vector, the stacked
    thresholds, and the noise power; ``scale`` is sqrt(2/N0).
    """

    h_real: np.ndarray
    r: np.ndarray
    tau_real: np.ndarray
    n0: float
    scale: float = field(init=False)

    def __post_init__(self):
        if self.n0 <= 0:
            raise ValueError("noise power must be positive")
        object.__setattr__(self, "scale", math.sqrt(2.0 / self.n0))

    @classmethod
    def from_channel(
        cls,
        channel: ChannelRealization,
        r: np.ndarray,
        thresholds: ThresholdVector,
        n0: float,
    ) -> "LikelihoodContext":
        return cls(channel.real_matrix, np.asarray(r, dtype=float), thresholds.real_view, n0)

    def u(self, x: np.ndarray) -> np.ndarray:
        """Scaled signed residuals scale * r * (H x - tau)."""
        return self.scale * self.r * (self.h_real @ x - self.tau_real)


def log_likelihood(ctx: LikelihoodContext, x: np.ndarray) -> float:
    """Log-probability of the observed sign vector for input x (always <= 0)."""
    return float(np.sum(safe_ln_phi(ctx.u(x))))


def log_likelihood_batch(ctx: LikelihoodContext, candidates: np.ndarray) -> np.ndarray:
    """Log-likelihood of each row of a (n, 2K) candidate matrix."""
    u = ctx.scale * ctx.r * (candidates @ ctx.h_real.T - ctx.tau_real)
    return np.sum(safe_ln_phi(u), axis=1)


def ml_detect(ctx: LikelihoodContext, candidates: np.ndarray) -> np.ndarray:
    """Most likely candidate row; ties resolve to the first in enumeration order."""
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[0] == 0:
        raise ValueError("candidate set must be non-empty")
    scores = log_likelihood_batch(ctx, candidates)
    return candidates[int(np.argmax(scores))]


EXHAUSTIVE_CAP = 65536


def exhaustive_candidates(
    constellation: Constellation, n_users: int, cap: int = EXHAUSTIVE_CAP
) -> np.ndarray:
    """All M**K stacked real candidate vectors, in deterministic lexicographic order."""
    count = constellation.order**n_users
    if count > cap:
        raise ValueError(
            f"exhaustive search over {count} candidates exceeds the cap ({cap})"
        )
    levels = constellation.pam_set
    return np.array(
        list(itertools.product(levels, repeat=2 * n_users)), dtype=float
    )
