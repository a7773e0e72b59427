"""MCMC-MH comparator: independence Metropolis-Hastings for the random effects.

The parameter blocks are updated exactly as in PMwG, but each individual's
random effect is then refreshed by ``n_inner`` independence MH steps that
propose from the prior ``N(0, Sigma_alpha)``.
"""

from __future__ import annotations

import numpy as np

from .hmc import AdaptationError, HmcKernel
from .pmwg import STEP_ERRORS, update_theta_given_alpha
from .state import SamplerState


def mcmc_mh_refresh(model, theta, alpha, n_inner: int, chain_rng, rngs, loglik_current=None):
    """Refresh every individual's random effect by ``n_inner`` independence MH steps.

    With a prior proposal the acceptance ratio is the likelihood ratio
    ``p(y_i | theta, alpha_i*) / p(y_i | theta, alpha_i)``.

    Returns
    -------
    alpha : array (P, 2)
    n_accepted : int
    """
    if n_inner < 1:
        raise ValueError("n_inner must be at least 1")
    alpha = np.array(alpha, dtype=float, copy=True)
    if loglik_current is None:
        loglik_current = model.loglik_individuals(theta, alpha[:, None, :])[:, 0]
    ll = np.array(loglik_current, dtype=float, copy=True)
    n_acc = 0
    for _ in range(n_inner):
        prop = model.sample_alpha(theta, rngs, 1)
        ll_prop = model.loglik_individuals(theta, prop)[:, 0]
        log_u = np.log(chain_rng.random(alpha.shape[0]))
        take = log_u < ll_prop - ll
        alpha[take] = prop[take, 0]
        ll[take] = ll_prop[take]
        n_acc += int(take.sum())
    return alpha, n_acc


def mcmc_mh_step(state: SamplerState, model, n_inner: int, kernel: HmcKernel, chain_rng, rngs,
                 adapt: bool = True) -> SamplerState:
    """Parameter blocks as in PMwG followed by :func:`mcmc_mh_refresh`."""
    new = state.copy()
    try:
        update_theta_given_alpha(new, model, kernel, chain_rng, adapt)
        new.alpha_ref, n_acc = mcmc_mh_refresh(model, new.theta, new.alpha_ref, n_inner,
                                               chain_rng, rngs)
        new.record("alpha", n_acc, tries=n_inner * model.P)
    except AdaptationError:
        raise
    except STEP_ERRORS as exc:
        state = state.copy()
        state.errors.append((state.iteration, repr(exc)))
        state.iteration += 1
        return state
    new.iteration += 1
    return new
