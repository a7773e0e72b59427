"""Prior distributions and the unconstrained parameterisation.

Defaults: ``beta ~ N(0, 100 I)``, ``Sigma_alpha^{-1} ~ W(6, 400 I)`` and a flat
prior on the dependence parameter's Kendall tau. For the Gaussian families
this is the uniform prior on ``rho``. For Clayton it gives
``p(theta) = 2 / (theta + 2)^2`` on ``(0, inf)``, and for Gumbel it gives
``p(theta) = 1 / theta^2`` on ``[1, inf)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import Family, Theta


@dataclass
class Priors:
    v0: float = 6.0
    R0: np.ndarray = field(default_factory=lambda: 400.0 * np.eye(2))
    beta_var: float = 100.0

    def __post_init__(self):
        self.R0 = np.asarray(self.R0, dtype=float)

    @property
    def R0_inv(self) -> np.ndarray:
        return np.linalg.inv(self.R0)


def log_prior_dep(family, dep: float) -> float:
    family = Family.parse(family)
    if not family.dep_in_domain(dep):
        return -math.inf
    if family in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN):
        return -math.log(2.0)
    if family is Family.MIXED_CLAYTON:
        return math.log(2.0) - 2.0 * math.log(dep + 2.0)
    return -2.0 * math.log(dep)


def log_prior_beta(beta, priors: Priors) -> float:
    beta = np.asarray(beta, dtype=float)
    d = beta.size
    return float(-0.5 * np.dot(beta, beta) / priors.beta_var
                 - 0.5 * d * math.log(2.0 * math.pi * priors.beta_var))


def log_prior_sigma_alpha(Sigma, priors: Priors) -> float:
    """Log density of Sigma_alpha when Sigma_alpha^{-1} ~ W(v0, R0).

    This is the inverse-Wishart density with scale ``R0^{-1}``, taken with
    respect to the three free entries of the symmetric matrix.
    """
    try:
        return float(stats.invwishart.logpdf(Sigma, df=priors.v0, scale=priors.R0_inv))
    except (np.linalg.LinAlgError, ValueError):
        return -math.inf


def log_prior(theta: Theta, family, priors: Priors | None = None,
              unconstrained: bool = False) -> float:
    """Log prior density of ``theta``.

    The constrained density is taken with respect to the coordinates of
    :class:`Theta` (``beta``, ``dep``, ``tau1_sq``, ``tau2_sq``, ``rho_alpha``).
    With ``unconstrained=True`` it is the density of
    ``(beta, u(dep), log tau1_sq, log tau2_sq, atanh rho_alpha)``, i.e. the
    constrained value plus the log-Jacobian of the back transform. Out of
    domain values give ``-inf``.
    """
    family = Family.parse(family)
    priors = priors if priors is not None else Priors()
    if not theta.is_valid(family):
        return -math.inf
    a, b, r = theta.tau1_sq, theta.tau2_sq, theta.rho_alpha
    lp = log_prior_beta(theta.beta, priors) + log_prior_dep(family, theta.dep)
    # Sigma entries (a, b, r sqrt(ab)) -> (a, b, r) has Jacobian sqrt(ab)
    lp += log_prior_sigma_alpha(theta.sigma_alpha, priors) + 0.5 * (math.log(a) + math.log(b))
    if unconstrained:
        lp += log_jacobian(theta, family)
    return lp


def log_jacobian(theta: Theta, family) -> float:
    """log |d constrained / d unconstrained| at ``theta``."""
    family = Family.parse(family)
    if family in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN):
        jd = math.log1p(-theta.dep * theta.dep)
    elif family is Family.MIXED_CLAYTON:
        jd = math.log(theta.dep)
    else:
        jd = math.log(theta.dep - 1.0) if theta.dep > 1.0 else -math.inf
    r = theta.rho_alpha
    return jd + math.log(theta.tau1_sq) + math.log(theta.tau2_sq) + math.log1p(-r * r)


def log_prior_dep_unconstrained(family, value: float) -> float:
    """Prior of the transformed dependence parameter, Jacobian included."""
    family = Family.parse(family)
    return log_prior_dep(family, family.dep_from_unconstrained(value)) + family.dep_log_jacobian(value)
