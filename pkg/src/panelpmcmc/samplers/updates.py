"""Single-block updates shared by the samplers."""

from __future__ import annotations

import math

import numpy as np

from ..numeric import sample_wishart

RW_TARGET = 0.3
RW_GAIN = 2.0


def adaptive_rw_step(value: float, logdens, rw_log_scale: float, iteration: int, rng,
                     adapt: bool = True, target: float = RW_TARGET, gain: float = RW_GAIN,
                     current_logdens: float | None = None):
    """Univariate Gaussian random-walk Metropolis step with Robbins-Monro scaling.

    Parameters
    ----------
    value : current point on the unconstrained scale
    logdens : callable returning the log target at an unconstrained point,
        including the log-Jacobian of the back transform
    rw_log_scale : log of the proposal standard deviation
    iteration : 1-based iteration counter driving the gain ``gain / iteration``
    adapt : update the scale (warm-up only)
    current_logdens : log target at ``value`` if already known

    Returns
    -------
    new_value, new_log_scale, accepted, new_logdens
    """
    lp0 = logdens(value) if current_logdens is None else current_logdens
    prop = value + math.exp(rw_log_scale) * rng.standard_normal()
    lp1 = logdens(prop)
    log_u = math.log(rng.random())
    accepted = bool(np.isfinite(lp1) and log_u < lp1 - lp0)
    if adapt:
        rw_log_scale = rw_log_scale + gain * (float(accepted) - target) / max(iteration, 1)
    if accepted:
        return prop, rw_log_scale, True, lp1
    return value, rw_log_scale, False, lp0


def wishart_posterior(alpha_ref, v0: float, R0):
    """Degrees of freedom and scale of the conditional W(v1, R1) for Sigma_alpha^{-1}."""
    alpha_ref = np.asarray(alpha_ref, dtype=float).reshape(-1, 2)
    R0 = np.asarray(R0, dtype=float)
    v1 = v0 + alpha_ref.shape[0]
    S = alpha_ref.T @ alpha_ref
    R1 = np.linalg.inv(np.linalg.inv(R0) + S)
    R1 = 0.5 * (R1 + R1.T)
    return v1, R1


def wishart_gibbs_update(alpha_ref, v0: float, R0, rng) -> np.ndarray:
    """Draw Sigma_alpha given the selected random effects.

    ``Sigma_alpha^{-1} ~ W(v0 + P, [R0^{-1} + sum_i alpha_i alpha_i']^{-1})``.
    """
    v1, R1 = wishart_posterior(alpha_ref, v0, R0)
    W = sample_wishart(v1, R1, rng)
    S = np.linalg.inv(W)
    return 0.5 * (S + S.T)
