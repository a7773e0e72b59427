"""Data-augmentation Gibbs sampler for the bivariate probit model.

Latent utilities ``y*_it = eta_it + alpha_i + eps_it`` are sampled from
truncated normals. Given the latents, the random effects, the coefficients
and ``Sigma_alpha`` have Gaussian or Wishart conditionals. The error
correlation ``rho`` is updated by Metropolis-within-Gibbs, using the same
adaptive random walk on ``atanh(rho)`` as the particle sampler.

Latent and random-effect draws all come from the chain stream, as single
vectorised calls in a fixed order.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..models.data import Family
from ..models.priors import log_prior_dep_unconstrained
from ..numeric import truncated_normal
from .state import SamplerState
from .updates import adaptive_rw_step, wishart_gibbs_update


class DAError(RuntimeError):
    """A latent draw left its truncation region."""


class _Design:
    """Cross-products of the design reused by every beta update."""

    def __init__(self, data):
        self.Z1 = data.Z1
        self.Z2 = data.Z2
        k1, k2 = self.Z1.shape[2], self.Z2.shape[2]
        Z1f = self.Z1.reshape(-1, k1)
        Z2f = self.Z2.reshape(-1, k2)
        self.Z1f, self.Z2f = Z1f, Z2f
        self.Z11 = Z1f.T @ Z1f
        self.Z12 = Z1f.T @ Z2f
        self.Z22 = Z2f.T @ Z2f


def _design(model):
    d = getattr(model, "_da_design", None)
    if d is None:
        d = _Design(model.data)
        model._da_design = d
    return d


def da_beta_conditional(model, ystar, alpha, rho: float, beta_var: float | None = None):
    """Mean and covariance of ``beta | y*, alpha, rho`` under a ``N(0, beta_var I)`` prior.

    Parameters
    ----------
    ystar : array (P, T, 2)
    alpha : array (P, 2)

    Returns
    -------
    mean : array (k1 + k2,)
    cov : array (k1 + k2, k1 + k2)
    """
    des = _design(model)
    beta_var = model.priors.beta_var if beta_var is None else beta_var
    k1 = des.Z1.shape[2]
    c = 1.0 / (1.0 - rho * rho)
    a, b = c, -rho * c          # Sigma^{-1} = [[a, b], [b, a]]
    prec = np.empty((k1 + des.Z2.shape[2],) * 2)
    prec[:k1, :k1] = a * des.Z11
    prec[:k1, k1:] = b * des.Z12
    prec[k1:, :k1] = b * des.Z12.T
    prec[k1:, k1:] = a * des.Z22
    prec[np.diag_indices_from(prec)] += 1.0 / beta_var
    r = ystar - alpha[:, None, :]
    r1 = r[..., 0].ravel()
    r2 = r[..., 1].ravel()
    d = np.concatenate([des.Z1f.T @ (a * r1 + b * r2), des.Z2f.T @ (b * r1 + a * r2)])
    L = np.linalg.cholesky(prec)
    mean = np.linalg.solve(L.T, np.linalg.solve(L, d))
    cov = np.linalg.inv(prec)
    return mean, 0.5 * (cov + cov.T)


def _sample_latents(model, theta, alpha, ystar, rng):
    data = model.data
    eta1, eta2 = model.linear_predictors(theta)
    m1 = eta1 + alpha[:, None, 0]
    m2 = eta2 + alpha[:, None, 1]
    rho = theta.dep
    s = math.sqrt(1.0 - rho * rho)
    inf = np.inf
    lo1 = np.where(data.y1 == 1.0, 0.0, -inf)
    hi1 = np.where(data.y1 == 1.0, inf, 0.0)
    lo2 = np.where(data.y2 == 1.0, 0.0, -inf)
    hi2 = np.where(data.y2 == 1.0, inf, 0.0)
    y1s = truncated_normal(m1 + rho * (ystar[..., 1] - m2), s, lo1, hi1, rng)
    y2s = truncated_normal(m2 + rho * (y1s - m1), s, lo2, hi2, rng)
    if not (np.all((y1s > 0) == (data.y1 == 1.0)) and np.all((y2s > 0) == (data.y2 == 1.0))):
        raise DAError("latent draw outside its truncation region")
    out = np.empty_like(ystar)
    out[..., 0] = y1s
    out[..., 1] = y2s
    return out, m1 - alpha[:, None, 0], m2 - alpha[:, None, 1]


def _sample_alpha(theta, ystar, eta1, eta2, rng):
    P, T = eta1.shape
    rho = theta.dep
    Sinv = np.array([[1.0, -rho], [-rho, 1.0]]) / (1.0 - rho * rho)
    D = np.linalg.inv(T * Sinv + np.linalg.inv(theta.sigma_alpha))
    D = 0.5 * (D + D.T)
    resid = np.stack([ystar[..., 0] - eta1, ystar[..., 1] - eta2], axis=-1).sum(axis=1)
    mean = resid @ Sinv @ D
    L = np.linalg.cholesky(D)
    return mean + rng.standard_normal((P, 2)) @ L.T


def _rho_logdens(e, family):
    n = e.shape[0]
    s11 = float(np.dot(e[:, 0], e[:, 0]))
    s22 = float(np.dot(e[:, 1], e[:, 1]))
    s12 = float(np.dot(e[:, 0], e[:, 1]))

    def f(u):
        r = math.tanh(u)
        one = 1.0 - r * r
        if not one > 0:
            return -np.inf
        return (-0.5 * n * math.log(one) - (s11 - 2.0 * r * s12 + s22) / (2.0 * one)
                + log_prior_dep_unconstrained(family, u))

    return f


def init_state(model, chain_rng, theta=None) -> SamplerState:
    if model.family is not Family.BIV_PROBIT:
        raise ValueError("data augmentation is implemented for the bivariate probit only")
    theta = model.initial_theta() if theta is None else theta
    alpha = np.zeros((model.P, 2))
    eta1, eta2 = model.linear_predictors(theta)
    ystar = np.stack([eta1, eta2], axis=-1)
    ystar, _, _ = _sample_latents(model, theta, alpha, ystar, chain_rng)
    return SamplerState(theta=theta, alpha_ref=alpha, latent=ystar)


def da_gibbs_step(state: SamplerState, model, chain_rng, adapt: bool = True,
                  update_beta: bool = True, update_sigma: bool = True,
                  update_rho: bool = True) -> SamplerState:
    """One data-augmentation Gibbs cycle.

    The ``update_*`` switches hold blocks fixed, which is useful for testing
    against low-dimensional posteriors.
    """
    if model.family is not Family.BIV_PROBIT:
        raise ValueError("data augmentation is implemented for the bivariate probit only")
    new = state.copy()
    theta = new.theta
    pri = model.priors
    ystar, eta1, eta2 = _sample_latents(model, theta, new.alpha_ref, new.latent, chain_rng)
    alpha = _sample_alpha(theta, ystar, eta1, eta2, chain_rng)
    if update_beta:
        mean, cov = da_beta_conditional(model, ystar, alpha, theta.dep, pri.beta_var)
        beta = mean + np.linalg.cholesky(cov) @ chain_rng.standard_normal(mean.size)
        theta = theta.with_beta(beta)
    if update_sigma:
        theta = theta.with_sigma_alpha(wishart_gibbs_update(alpha, pri.v0, pri.R0, chain_rng))
    if update_rho:
        e1, e2 = model.linear_predictors(theta)
        e = np.stack([(ystar[..., 0] - e1 - alpha[:, None, 0]).ravel(),
                      (ystar[..., 1] - e2 - alpha[:, None, 1]).ravel()], axis=1)
        f = _rho_logdens(e, model.family)
        u, new.rw_log_scale, acc, _ = adaptive_rw_step(
            math.atanh(theta.dep), f, new.rw_log_scale, new.iteration + 1, chain_rng, adapt=adapt)
        new.record("dep", acc)
        theta = dataclasses.replace(theta, dep=math.tanh(u))
    new.theta = theta
    new.alpha_ref = alpha
    new.latent = ystar
    new.iteration += 1
    return new
