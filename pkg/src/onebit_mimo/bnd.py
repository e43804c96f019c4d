"""Boxed Newton detector: damped Newton ascent of the penalized log-likelihood.

The discrete input constraint is relaxed to a box penalty around the
constellation boundary; full Newton steps are taken from the label-scaled
matched-filter estimate, with the noise power inflated at high SNR so the
Hessian stays well conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .constellation import Constellation
from .likelihood import LikelihoodContext, log_likelihood, varphi, psi
from .linear_detect import mrc_detect, quantization_label
from .system_model import ChannelRealization, ThresholdVector, real_vector

__all__ = [
    "BndConfig",
    "BndResult",
    "DetectorFailureError",
    "penalty",
    "objective",
    "grad_objective",
    "hess_objective",
    "damping_factor",
    "bnd_detect",
]


@dataclass(frozen=True)
class BndConfig:
    """Hyperparameters of the boxed Newton detector."""

    theta: float
    epsilon: float
    t_max: int
    rho_d_db: float
    boundary: float

    def __post_init__(self):
        if self.theta <= 0 or self.epsilon <= 0 or self.t_max < 1:
            raise ValueError("theta and epsilon must be positive, t_max >= 1")

    @classmethod
    def defaults(
        cls, constellation: Constellation, n_users: int, n_antennas: int
    ) -> "BndConfig":
        """Standard settings: theta 20, eps 1e-4/log2(M), 15 iterations,
        damping SNR 20 - 160*K/N dB."""
        return cls(
            theta=20.0,
            epsilon=1e-4 / constellation.bits_per_symbol,
            t_max=15,
            rho_d_db=20.0 - 160.0 * n_users / n_antennas,
            boundary=constellation.boundary,
        )


@dataclass(frozen=True)
class BndResult:
    estimate: np.ndarray
    iterations: int
    converged: bool
    final_step_norm_sq: float


class DetectorFailureError(RuntimeError):
    """Newton solve failed even after ridge regularization; carries the MRC fallback."""

    def __init__(self, message: str, fallback: np.ndarray):
        super().__init__(message)
        self.fallback = fallback


def penalty(x: np.ndarray, theta: float, boundary: float) -> float:
    """Quadratic penalty on the per-dimension excursion beyond the boundary."""
    excess = np.maximum(0.0, np.abs(np.asarray(x, dtype=float)) - boundary)
    return 0.5 * theta * float(np.sum(excess**2))


def objective(ctx: LikelihoodContext, x: np.ndarray, config: BndConfig) -> float:
    """Penalized log-likelihood maximized by the detector."""
    return log_likelihood(ctx, x) - penalty(x, config.theta, config.boundary)


def grad_objective(ctx: LikelihoodContext, x: np.ndarray, config: BndConfig) -> np.ndarray:
    """Gradient: sqrt(2/N0) H^T (r * varphi(u)) minus the penalty slope."""
    x = np.asarray(x, dtype=float)
    grad_ll = ctx.scale * (ctx.h_real.T @ (ctx.r * varphi(ctx.u(x))))
    excess = np.maximum(0.0, np.abs(x) - config.boundary)
    grad_pen = config.theta * np.where(x >= 0, 1.0, -1.0) * excess
    return grad_ll - grad_pen


def hess_objective(ctx: LikelihoodContext, x: np.ndarray, config: BndConfig) -> np.ndarray:
    """Hessian: (2/N0) H^T diag(psi(u)) H minus theta on out-of-box diagonal entries."""
    x = np.asarray(x, dtype=float)
    weights = psi(ctx.u(x))
    hess_ll = (2.0 / ctx.n0) * (ctx.h_real.T @ (weights[:, None] * ctx.h_real))
    active = np.where(np.abs(x) - config.boundary >= 0, 1.0, 0.0)
    hess = hess_ll - config.theta * np.diag(active)
    return 0.5 * (hess + hess.T)


def damping_factor(rho_linear: float, rho_d_db: float) -> float:
    """Noise inflation max(1, rho/rho_d) clamping the effective SNR at rho_d."""
    if rho_linear <= 0:
        raise ValueError("linear SNR must be positive")
    return max(1.0, rho_linear / 10.0 ** (rho_d_db / 10.0))


def _newton_step(hess: np.ndarray, grad: np.ndarray):
    """Solve -hess s = grad for the ascent direction via Cholesky, ridging once on failure."""
    a = -hess
    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        ridge = 1e-8 * max(1.0, np.trace(a) / a.shape[0])
        try:
            low = np.linalg.cholesky(a + ridge * np.eye(a.shape[0]))
        except np.linalg.LinAlgError:
            return None
    return cho_solve((low, True), grad)


def bnd_detect(
    r: np.ndarray,
    channel: ChannelRealization,
    thresholds: ThresholdVector,
    n0: float,
    config: BndConfig,
) -> BndResult:
    """Run the boxed Newton detector on one quantized observation.

    Starts from the label-scaled MRC estimate, inflates the noise power by the
    damping factor, then iterates full Newton updates until the squared step
    drops below epsilon times the squared iterate norm or t_max is reached.
    """
    label = quantization_label(channel.n_users, n0, thresholds.variance)
    x = real_vector(mrc_detect(r, channel, label))

    zeta = damping_factor(1.0 / n0, config.rho_d_db)
    ctx = LikelihoodContext.from_channel(channel, r, thresholds, zeta * n0)

    iterations = 0
    converged = False
    step_sq = math.inf
    for _ in range(config.t_max):
        grad = grad_objective(ctx, x, config)
        hess = hess_objective(ctx, x, config)
        step = _newton_step(hess, grad)
        if step is None:
            label_est = real_vector(mrc_detect(r, channel, label))
            raise DetectorFailureError(
                "Newton system singular after ridge retry", label_est
            )
        x = x + step
        iterations += 1
        step_sq = float(step @ step)
        if step_sq < config.epsilon * float(x @ x):
            converged = True
            break

    return BndResult(x, iterations, converged, step_sq)
