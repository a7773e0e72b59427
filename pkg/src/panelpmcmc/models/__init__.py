"""Model families, data containers and likelihoods."""

from .copulas import (copula_cdf, copula_cond_cdf, copula_density, copula_from_uniforms,
                      kendall_tau,
                      sample_copula, tail_dependence)
from .data import (DataError, Family, ModelSpec, PanelData, RandomEffects, Theta,
                   mundlak_averages, param_names, sigma_alpha_matrix)
from .likelihood import (NumericalError, PanelModel, grad_loglik_beta, loglik_biv_probit,
                         loglik_mixed_copula, loglik_mixed_gaussian)
from .priors import Priors, log_prior, log_prior_dep, log_prior_dep_unconstrained

__all__ = [
    "DataError", "Family", "ModelSpec", "NumericalError", "PanelData", "PanelModel",
    "Priors", "RandomEffects", "Theta", "copula_cdf", "copula_cond_cdf", "copula_density",
    "copula_from_uniforms",
    "grad_loglik_beta", "kendall_tau", "log_prior", "log_prior_dep",
    "log_prior_dep_unconstrained", "loglik_biv_probit", "loglik_mixed_copula",
    "loglik_mixed_gaussian", "mundlak_averages", "param_names", "sample_copula",
    "sigma_alpha_matrix", "tail_dependence",
]
