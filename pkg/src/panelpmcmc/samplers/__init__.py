"""MCMC samplers for the panel models."""

from .da_gibbs import DAError, da_beta_conditional, da_gibbs_step
from .hmc import (AdaptationError, DualAveraging, HmcConfig, HmcError, HmcKernel, Metric,
                  hmc_propose, leapfrog, nuts_adapt, nuts_step)
from .mcmc_mh import mcmc_mh_refresh, mcmc_mh_step
from .pmmh import RandomWalkAdapter, pmmh_step, pmmh_transition
from .pmwg import pmwg_step, pmwg_sweep
from .runner import SAMPLERS, SamplerFailure, default_hmc_config, run_chain
from .state import SamplerState
from .updates import adaptive_rw_step, wishart_gibbs_update, wishart_posterior

__all__ = [
    "AdaptationError", "DAError", "DualAveraging", "HmcConfig", "HmcError", "HmcKernel",
    "Metric", "RandomWalkAdapter", "SAMPLERS", "SamplerFailure", "SamplerState",
    "adaptive_rw_step", "da_beta_conditional", "da_gibbs_step", "default_hmc_config",
    "hmc_propose", "leapfrog", "mcmc_mh_refresh", "mcmc_mh_step", "nuts_adapt", "nuts_step",
    "pmmh_step", "pmmh_transition", "pmwg_step", "pmwg_sweep", "run_chain",
    "wishart_gibbs_update", "wishart_posterior",
]
