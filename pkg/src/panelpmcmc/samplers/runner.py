"""Run a complete chain of any of the panel samplers."""

from __future__ import annotations

import time

import numpy as np

from ..analysis import ChainOutput
from ..numeric import chain_streams
from . import da_gibbs, mcmc_mh, pmmh, pmwg
from .hmc import HmcConfig, HmcKernel
from .pmmh import RandomWalkAdapter

SAMPLERS = ("pmwg", "pmmh", "da-gibbs", "mcmc-mh")


class SamplerFailure(RuntimeError):
    """Too many consecutive sampler steps failed numerically."""


def default_hmc_config(burnin: int, **overrides) -> HmcConfig:
    """NUTS settings whose warm-up spans the burn-in.

    The identity-metric pilot window is ``min(1000, burnin // 2)`` so that a
    short burn-in still leaves iterations for step-size adaptation under the
    estimated mass matrix.
    """
    cfg = dict(adapt_iters=burnin, pilot_iters=min(1000, burnin // 2))
    cfg.update(overrides)
    return HmcConfig(**cfg)


def run_chain(model, sampler: str = "pmwg", iters: int = 11000, burnin: int = 1000,
              N: int = 100, seed: int = 0, chain: int = 0, hmc: HmcConfig | None = None,
              n_inner: int = 10, theta0=None, max_consecutive_errors: int = 10,
              callback=None) -> ChainOutput:
    """Run one chain and return its post-burn-in draws.

    Parameters
    ----------
    model : PanelModel
    sampler : one of ``pmwg``, ``pmmh``, ``da-gibbs`` or ``mcmc-mh``
    iters, burnin : total iterations and the number discarded; adaptation of
        every tuning parameter happens only during burn-in
    N : particles per individual (PMwG and PMMH)
    seed, chain : key the random streams; different chains never share one
    n_inner : independence MH refreshes per sweep for ``mcmc-mh``
    callback : optional ``f(iteration, state)`` called after every step

    Raises
    ------
    SamplerFailure
        If ``max_consecutive_errors`` steps in a row fail.
    """
    if sampler not in SAMPLERS:
        raise ValueError(f"unknown sampler {sampler!r}; choose from {SAMPLERS}")
    if not 0 <= burnin < iters:
        raise ValueError("burn-in must be non-negative and smaller than the iteration count")
    chain_rng, rngs = chain_streams(seed, chain, model.P)
    hmc = default_hmc_config(burnin) if hmc is None else hmc
    kernel = HmcKernel(model.spec.n_beta, hmc)
    if burnin == 0:
        kernel.freeze()

    t0 = time.perf_counter()
    if sampler == "pmwg":
        state = pmwg.init_state(model, N, chain_rng, rngs, theta0)
        step = lambda s, adapt: pmwg.pmwg_step(s, model, N, kernel, chain_rng, rngs, adapt)  # noqa: E731
    elif sampler == "mcmc-mh":
        state = pmwg.init_state(model, 1, chain_rng, rngs, theta0)
        step = lambda s, adapt: mcmc_mh.mcmc_mh_step(  # noqa: E731
            s, model, n_inner, kernel, chain_rng, rngs, adapt)
    elif sampler == "pmmh":
        state = pmmh.init_state(model, N, chain_rng, rngs, theta0)
        adapter = RandomWalkAdapter(len(state.theta.to_unconstrained(model.family)))
        step = lambda s, adapt: pmmh.pmmh_step(s, model, N, adapter, chain_rng, rngs, adapt)  # noqa: E731
    else:
        state = da_gibbs.init_state(model, chain_rng, theta0)
        step = lambda s, adapt: da_gibbs.da_gibbs_step(s, model, chain_rng, adapt)  # noqa: E731

    names = model.param_names()
    draws = np.empty((iters - burnin, len(names)))
    streak = 0
    for it in range(iters):
        n_err = len(state.errors)
        state = step(state, it < burnin)
        if len(state.errors) > n_err:
            streak += 1
            if streak >= max_consecutive_errors:
                raise SamplerFailure(
                    f"{streak} consecutive failed steps; last: {state.errors[-1][1]}")
        else:
            streak = 0
        if it >= burnin:
            draws[it - burnin] = state.theta.to_array()
        if callback is not None:
            callback(it, state)
    wall = time.perf_counter() - t0

    rates = state.accept_rates()
    diagnostics = {
        "n_errors": len(state.errors),
        "errors": [list(e) for e in state.errors[:20]],
        "step_size": float(kernel.eps),
        "n_divergent": kernel.n_divergent,
        "clamp_count": int(getattr(model, "clamp_count", 0)),
    }
    if kernel.leapfrog_counts:
        diagnostics["mean_leapfrog"] = float(np.mean(kernel.leapfrog_counts))
    return ChainOutput(draws=draws, param_names=names, wall_time=wall, accept_rates=rates,
                       family=model.family, k1=model.spec.k1, diagnostics=diagnostics)
