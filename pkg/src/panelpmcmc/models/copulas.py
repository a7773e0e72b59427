"""Gaussian, Clayton and Gumbel copulas and their dependence measures.

All functions broadcast over array arguments and work on the uniform scale.
The likelihood kernels use score-scale versions of the same formulas (see
:mod:`panelpmcmc.models.likelihood`); these are kept separate and readable so
that the two can be checked against each other.
"""

from __future__ import annotations

import math

import numpy as np

from ..numeric import DomainError, bvn_cdf, std_normal_cdf, std_normal_quantile
from .data import Family

COPULAS = ("gaussian", "clayton", "gumbel")


def _copula_name(family) -> str:
    if isinstance(family, str) and family.lower() in COPULAS:
        return family.lower()
    fam = Family.parse(family)
    if fam is Family.BIV_PROBIT:
        return "gaussian"
    return fam.value


def check_param(family, theta: float) -> str:
    """Validate ``theta`` for ``family`` and return the canonical copula name."""
    name = _copula_name(family)
    theta = float(theta)
    ok = {"gaussian": -1.0 < theta < 1.0,
          "clayton": theta > 0.0,
          "gumbel": theta >= 1.0}[name] and math.isfinite(theta)
    if not ok:
        raise DomainError(f"parameter {theta} outside the {name} copula domain")
    return name


def _unit(u, name="u"):
    u = np.asarray(u, dtype=float)
    if np.any(~((u >= 0.0) & (u <= 1.0))):
        raise DomainError(f"{name} must lie in [0, 1]")
    return u


def copula_cdf(u1, u2, family, theta):
    """Copula distribution function C(u1, u2)."""
    name = check_param(family, theta)
    u1, u2 = np.broadcast_arrays(_unit(u1, "u1"), _unit(u2, "u2"))
    out = np.zeros(u1.shape)
    # boundary identities hold exactly
    edge1 = u1 == 1.0
    edge2 = u2 == 1.0
    zero = (u1 == 0.0) | (u2 == 0.0)
    inner = ~(edge1 | edge2 | zero)
    out[edge1] = u2[edge1]
    out[edge2] = u1[edge2]
    a, b = u1[inner], u2[inner]
    if name == "gaussian":
        out[inner] = bvn_cdf(std_normal_quantile(a), std_normal_quantile(b), theta)
    elif name == "clayton":
        A = a ** -theta + b ** -theta - 1.0
        out[inner] = A ** (-1.0 / theta)
    else:
        S = (-np.log(a)) ** theta + (-np.log(b)) ** theta
        out[inner] = np.exp(-S ** (1.0 / theta))
    return out[()]


def copula_cond_cdf(u1, u2, family, theta):
    """Conditional distribution C_{1|2}(u1 | u2) = dC/du2."""
    name = check_param(family, theta)
    u1, u2 = np.broadcast_arrays(_unit(u1, "u1"), _unit(u2, "u2"))
    if np.any((u2 == 0.0) | (u2 == 1.0)):
        raise DomainError("copula_cond_cdf requires u2 in (0, 1)")
    out = np.zeros(u1.shape)
    out[u1 == 1.0] = 1.0
    inner = (u1 > 0.0) & (u1 < 1.0)
    a, b = u1[inner], u2[inner]
    if name == "gaussian":
        s = math.sqrt(1.0 - theta * theta)
        out[inner] = std_normal_cdf((std_normal_quantile(a) - theta * std_normal_quantile(b)) / s)
    elif name == "clayton":
        A = a ** -theta + b ** -theta - 1.0
        out[inner] = b ** (-theta - 1.0) * A ** (-1.0 - 1.0 / theta)
    else:
        t1, t2 = -np.log(a), -np.log(b)
        S = t1 ** theta + t2 ** theta
        C = np.exp(-S ** (1.0 / theta))
        out[inner] = C / b * t2 ** (theta - 1.0) * S ** (1.0 / theta - 1.0)
    return np.clip(out, 0.0, 1.0)[()]


def copula_density(u1, u2, family, theta):
    """Copula density c(u1, u2) on the open unit square."""
    name = check_param(family, theta)
    u1, u2 = np.broadcast_arrays(np.asarray(u1, float), np.asarray(u2, float))
    if np.any(~((u1 > 0) & (u1 < 1) & (u2 > 0) & (u2 < 1))):
        raise DomainError("copula_density requires arguments in (0, 1)")
    if name == "gaussian":
        x, y = std_normal_quantile(u1), std_normal_quantile(u2)
        r2 = 1.0 - theta * theta
        return (np.exp(-(theta * theta * (x * x + y * y) - 2.0 * theta * x * y) / (2.0 * r2))
                / math.sqrt(r2))[()]
    if name == "clayton":
        A = u1 ** -theta + u2 ** -theta - 1.0
        return ((1.0 + theta) * (u1 * u2) ** (-theta - 1.0) * A ** (-2.0 - 1.0 / theta))[()]
    t1, t2 = -np.log(u1), -np.log(u2)
    S = t1 ** theta + t2 ** theta
    Sr = S ** (1.0 / theta)
    C = np.exp(-Sr)
    return (C * (t1 * t2) ** (theta - 1.0) / (u1 * u2) * S ** (1.0 / theta - 2.0)
            * (Sr + theta - 1.0))[()]


def kendall_tau(family, param: float) -> float:
    """Kendall's rank correlation implied by the copula parameter."""
    name = check_param(family, param)
    if name == "gaussian":
        return 2.0 / math.pi * math.asin(param)
    if name == "clayton":
        return param / (param + 2.0)
    return 1.0 - 1.0 / param


def tail_dependence(family, param: float) -> tuple[float, float]:
    """Lower and upper tail-dependence coefficients ``(lambda_L, lambda_U)``."""
    name = check_param(family, param)
    if name == "gaussian":
        return 0.0, 0.0
    if name == "clayton":
        return 2.0 ** (-1.0 / param), 0.0
    return 0.0, 2.0 - 2.0 ** (1.0 / param)


def copula_from_uniforms(u2, v, family, theta: float, tol: float = 1e-12):
    """Map independent uniforms ``(u2, v)`` to a copula draw ``(u1, u2)``.

    ``u1`` solves ``C_{1|2}(u1 | u2) = v`` and is found by bisection to
    absolute tolerance ``tol``.
    """
    name = check_param(family, theta)
    # keep u2 strictly inside (0, 1)
    u2 = np.clip(np.asarray(u2, dtype=float), 1e-300, 1.0 - 2.0 ** -53)
    v = np.asarray(v, dtype=float)
    lo = np.zeros(u2.shape)
    hi = np.ones(u2.shape)
    n_iter = int(math.ceil(math.log2(1.0 / tol))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = copula_cond_cdf(mid, u2, name, theta) < v
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi), u2


def sample_copula(n: int, family, theta: float, rng: np.random.Generator, tol: float = 1e-12):
    """Draw ``n`` pairs from the copula by conditional inversion.

    Returns
    -------
    ndarray, shape (n, 2)
        Columns ``u1`` and ``u2``.
    """
    u2 = rng.random(n)
    v = rng.random(n)
    u1, u2 = copula_from_uniforms(u2, v, family, theta, tol)
    return np.column_stack([u1, u2])


def empirical_kendall_tau(x, y) -> float:
    """Sample Kendall tau-b (O(n log n))."""
    from scipy.stats import kendalltau
    return float(kendalltau(x, y).statistic)
