"""Pseudo-marginal Metropolis-Hastings.

The likelihood in the acceptance ratio is the particle estimate. The estimate
for the current parameter is stored with the state and reused, never
recomputed, which is what makes the chain exact. The chain also carries one
random-effect draw per individual, selected from the cloud at the accepted
parameter.
"""

from __future__ import annotations

import math

import numpy as np

from ..models.data import Theta
from ..models.priors import log_prior
from ..particles import estimate_loglik, propose_particles, sample_indices
from .state import SamplerState


def pmmh_transition(model, theta, loglik_hat: float, alpha_ref, N: int, propose, log_prior_fn,
                    chain_rng, rngs):
    """Generic PMMH transition.

    Parameters
    ----------
    propose : callable ``(theta, rng) -> (theta_star, log_q_ratio)`` where
        ``log_q_ratio = log q(theta | theta*) - log q(theta* | theta)``
    log_prior_fn : callable returning the log prior in the coordinates in
        which ``propose`` is defined (``-inf`` outside the support)

    Returns
    -------
    theta, loglik_hat, alpha_ref, accepted
    """
    theta_star, log_q = propose(theta, chain_rng)
    lp_star = log_prior_fn(theta_star)
    if not np.isfinite(lp_star):
        return theta, loglik_hat, alpha_ref, False
    cloud = propose_particles(model, theta_star, N, rngs)
    ll_star = estimate_loglik(cloud)
    if not np.isfinite(ll_star):
        return theta, loglik_hat, alpha_ref, False
    k = sample_indices(cloud, chain_rng)
    log_a = ll_star + lp_star - loglik_hat - log_prior_fn(theta) + log_q
    if math.log(chain_rng.random()) < log_a:
        return theta_star, ll_star, cloud.selected(k), True
    return theta, loglik_hat, alpha_ref, False


class RandomWalkAdapter:
    """Joint Gaussian random walk on the unconstrained parameter vector.

    The proposal covariance is ``s^2 C``. Initially ``s = 2.56 / sqrt(d)``
    and ``C`` is ``init_cov``, or the identity if none is given. During
    warm-up ``C`` tracks the empirical covariance of the chain, refreshed
    every ``refresh`` iterations once ``min_history`` draws exist, and
    ``log s`` follows a Robbins-Monro recursion towards ``target``
    acceptance.
    """

    def __init__(self, dim: int, init_cov=None, target: float = 0.25, refresh: int = 50,
                 min_history: int = 200):
        self.dim = dim
        self.log_s = math.log(2.56 / math.sqrt(dim))
        self.C = np.eye(dim) if init_cov is None else np.asarray(init_cov, dtype=float)
        self.L = np.linalg.cholesky(self.C)
        self.target = target
        self.refresh = refresh
        self.min_history = min_history
        self.history: list[np.ndarray] = []

    def draw(self, x, rng):
        return x + math.exp(self.log_s) * (self.L @ rng.standard_normal(self.dim))

    def adapt(self, x, accepted: bool, iteration: int):
        self.log_s += (float(accepted) - self.target) / max(iteration, 1) ** 0.6
        self.history.append(np.array(x, copy=True))
        n = len(self.history)
        if n >= self.min_history and n % self.refresh == 0:
            H = np.asarray(self.history)
            C = np.atleast_2d(np.cov(H, rowvar=False))
            C += 1e-8 * max(np.mean(np.diag(C)), 1e-12) * np.eye(self.dim)
            try:
                self.L = np.linalg.cholesky(C)
                self.C = C
            except np.linalg.LinAlgError:
                pass


def init_state(model, N: int, chain_rng, rngs, theta=None) -> SamplerState:
    theta = model.initial_theta() if theta is None else theta
    cloud = propose_particles(model, theta, N, rngs)
    k = sample_indices(cloud, chain_rng)
    return SamplerState(theta=theta, alpha_ref=cloud.selected(k), k=k,
                        loglik_hat=estimate_loglik(cloud))


def pmmh_step(state: SamplerState, model, N: int, adapter: RandomWalkAdapter, chain_rng, rngs,
              adapt: bool = True) -> SamplerState:
    """One PMMH step with a joint random walk in unconstrained coordinates."""
    if N < 1:
        raise ValueError("PMMH needs at least one particle")
    fam = model.family
    k1 = model.spec.k1
    pri = model.priors

    def to_vec(th):
        return th.to_unconstrained(fam)

    def propose(th, rng):
        x_star = adapter.draw(to_vec(th), rng)
        if not np.all(np.isfinite(x_star)):
            return th, 0.0
        return Theta.from_unconstrained(x_star, k1, fam), 0.0

    def lp(th):
        if not th.is_valid(fam):
            return -np.inf
        return log_prior(th, fam, pri, unconstrained=True)

    new = state.copy()
    theta, ll, alpha, acc = pmmh_transition(model, state.theta, state.loglik_hat, state.alpha_ref,
                                            N, propose, lp, chain_rng, rngs)
    new.theta, new.loglik_hat, new.alpha_ref = theta, ll, alpha
    new.record("theta", acc)
    new.iteration += 1
    if adapt:
        adapter.adapt(to_vec(theta), acc, new.iteration)
    return new
