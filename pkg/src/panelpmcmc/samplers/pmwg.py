"""Particle Metropolis-within-Gibbs.

One sweep updates the parameters given the selected random effects, then
refreshes the non-selected particles by conditional Monte Carlo and draws new
selection indices. The parameter blocks of the panel models are updated in
this order:

1. ``Sigma_alpha`` from its conjugate Wishart conditional;
2. the error-dependence parameter by an adaptive random walk on its
   unconstrained scale;
3. the stacked coefficients ``(beta1, beta2)`` by a Hamiltonian move.

All three condition only on the selected random effects, never on the other
particles.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from ..models.likelihood import NumericalError
from ..models.priors import log_prior_beta, log_prior_dep_unconstrained
from ..numeric import DomainError
from ..particles import conditional_particles, propose_particles, sample_indices
from .hmc import AdaptationError, HmcError, HmcKernel
from .state import SamplerState
from .updates import adaptive_rw_step, wishart_gibbs_update

STEP_ERRORS = (NumericalError, HmcError, DomainError, FloatingPointError,
               np.linalg.LinAlgError)


def pmwg_sweep(model, theta, alpha_ref, N: int, update_theta, chain_rng, rngs):
    """Generic PMwG transition for any model exposing the particle protocol.

    Parameters
    ----------
    model : object with ``sample_alpha`` and ``loglik_individuals``
    theta : current parameter value
    alpha_ref : array (P, 2), currently selected random effects
    update_theta : callable ``(theta, alpha_ref, rng) -> theta``
        Any kernel leaving ``pi(theta | alpha_ref)`` invariant.

    Returns
    -------
    theta, alpha_ref, k, cloud
    """
    theta = update_theta(theta, alpha_ref, chain_rng)
    cloud = conditional_particles(model, theta, alpha_ref, N, rngs)
    k = sample_indices(cloud, chain_rng)
    return theta, cloud.selected(k), k, cloud


def initial_selection(model, theta, N: int, chain_rng, rngs):
    """Run the importance sampler once and pick one particle per individual."""
    cloud = propose_particles(model, theta, N, rngs)
    k = sample_indices(cloud, chain_rng)
    return cloud.selected(k), k


def update_sigma_alpha(state: SamplerState, model, chain_rng):
    pri = model.priors
    S = wishart_gibbs_update(state.alpha_ref, pri.v0, pri.R0, chain_rng)
    state.theta = state.theta.with_sigma_alpha(S)


def update_dep(state: SamplerState, model, chain_rng, adapt: bool):
    fam = model.family
    theta = state.theta
    alpha = state.alpha_ref

    def logdens(u):
        dep = fam.dep_from_unconstrained(u)
        if not fam.dep_in_domain(dep):
            return -np.inf
        lp = log_prior_dep_unconstrained(fam, u)
        if not np.isfinite(lp):
            return -np.inf
        return model.loglik(dataclasses.replace(theta, dep=dep), alpha) + lp

    u0 = fam.dep_to_unconstrained(theta.dep)
    u, state.rw_log_scale, acc, _ = adaptive_rw_step(
        u0, logdens, state.rw_log_scale, state.iteration + 1, chain_rng, adapt=adapt)
    state.record("dep", acc)
    if acc:
        state.theta = dataclasses.replace(theta, dep=fam.dep_from_unconstrained(u))


def beta_target(model, theta, alpha):
    """``beta -> (log p(y | beta, alpha) + log p(beta), gradient)``."""
    pri = model.priors

    def logp_grad(beta):
        ll, g = model.loglik_and_grad_beta(theta.with_beta(beta), alpha)
        return ll + log_prior_beta(beta, pri), g - beta / pri.beta_var

    return logp_grad


def update_beta(state: SamplerState, model, kernel: HmcKernel, chain_rng, adapt: bool):
    logp_grad = beta_target(model, state.theta, state.alpha_ref)
    beta0 = state.theta.beta
    beta, _ = kernel.step(beta0, logp_grad, chain_rng, adapt=adapt)
    state.record("beta", not np.array_equal(beta, beta0))
    state.theta = state.theta.with_beta(beta)


def update_theta_given_alpha(state: SamplerState, model, kernel: HmcKernel, chain_rng,
                             adapt: bool):
    """Blocks 1-3 of the sweep, shared with the MCMC-MH comparator."""
    update_sigma_alpha(state, model, chain_rng)
    update_dep(state, model, chain_rng, adapt)
    update_beta(state, model, kernel, chain_rng, adapt)


def init_state(model, N: int, chain_rng, rngs, theta=None) -> SamplerState:
    theta = model.initial_theta() if theta is None else theta
    alpha, k = initial_selection(model, theta, max(N, 1), chain_rng, rngs)
    return SamplerState(theta=theta, alpha_ref=alpha, k=k)


def pmwg_step(state: SamplerState, model, N: int, kernel: HmcKernel, chain_rng, rngs,
              adapt: bool = True) -> SamplerState:
    """One PMwG sweep for a panel model.

    If a block raises a numerical error the step is abandoned. The returned
    state then equals the input apart from the iteration counter and the
    error log.
    """
    if N < 2:
        raise ValueError("PMwG needs at least two particles")
    new = state.copy()
    try:
        update_theta_given_alpha(new, model, kernel, chain_rng, adapt)
        cloud = conditional_particles(model, new.theta, new.alpha_ref, N, rngs)
        new.k = sample_indices(cloud, chain_rng)
        new.alpha_ref = cloud.selected(new.k)
    except AdaptationError:
        raise
    except STEP_ERRORS as exc:
        state = state.copy()
        state.errors.append((state.iteration, repr(exc)))
        state.iteration += 1
        return state
    new.iteration += 1
    return new
