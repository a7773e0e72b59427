"""Chain diagnostics, posterior summaries and average partial effects."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .models.copulas import copula_cdf
from .models.data import Family, PanelData, Theta
from .numeric import bvn_cdf, std_normal_cdf


@dataclass
class ChainOutput:
    """Post-burn-in draws of one chain.

    ``draws`` has one row per retained iteration and one column per entry of
    ``param_names`` (constrained scale).
    """

    draws: np.ndarray
    param_names: list[str]
    wall_time: float = 0.0
    accept_rates: dict = field(default_factory=dict)
    family: Family | None = None
    k1: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.draws = np.atleast_2d(np.asarray(self.draws, dtype=float))
        if self.draws.shape[1] != len(self.param_names):
            raise ValueError("draw columns do not match parameter names")

    @property
    def M(self) -> int:
        return self.draws.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.param_names.index(name)]

    def thetas(self, thin: int = 1):
        if self.k1 is None:
            raise ValueError("chain does not record the coefficient split")
        for row in self.draws[::thin]:
            yield Theta.from_array(row, self.k1)


@dataclass
class PosteriorSummary:
    mean: float
    ci_low: float
    ci_high: float
    iact: float
    significant: bool
    sd: float = float("nan")
    degenerate: bool = False
    ci_brackets_mean: bool = True

    def to_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "iact": self.iact, "significant": self.significant,
                "iact_degenerate": self.degenerate, "ci_brackets_mean": self.ci_brackets_mean}


# ---------------------------------------------------------------------------
# IACT and TNV
# ---------------------------------------------------------------------------

def autocorrelation(x, max_lag: int | None = None) -> np.ndarray:
    """Empirical autocorrelations ``rho_0..rho_max_lag`` using the biased
    (divide-by-M) autocovariance, computed by FFT."""
    x = np.asarray(x, dtype=float)
    M = x.size
    max_lag = M - 1 if max_lag is None else min(max_lag, M - 1)
    xc = x - x.mean()
    n = 1 << (2 * M - 1).bit_length()
    f = np.fft.rfft(xc, n)
    acov = np.fft.irfft(f * np.conj(f), n)[: max_lag + 1] / M
    if acov[0] <= 0:
        return np.full(max_lag + 1, np.nan)
    return acov / acov[0]


def iact_flagged(series) -> tuple[float, bool]:
    """IACT estimate and a flag marking a degenerate (constant) series.

    The estimate is ``1 + 2 * sum_{t=1}^{L} rho_t`` where ``L`` is the first
    lag with ``|rho_t| < 2 / sqrt(M)``. That lag is itself included in the
    sum. If no lag qualifies, all available lags are used.
    """
    x = np.asarray(series, dtype=float).ravel()
    M = x.size
    if M < 10:
        raise ValueError("IACT needs at least 10 draws")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    if np.ptp(x) == 0.0:
        return 1.0, True
    rho = autocorrelation(x)
    if not np.all(np.isfinite(rho)):
        return 1.0, True
    thresh = 2.0 / math.sqrt(M)
    small = np.nonzero(np.abs(rho[1:]) < thresh)[0]
    L = small[0] + 1 if small.size else M - 1
    return float(1.0 + 2.0 * rho[1: L + 1].sum()), False


def iact(series) -> float:
    """Integrated autocorrelation time; 1 for a constant series."""
    return iact_flagged(series)[0]


def iact_mean(draws) -> float:
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    return float(np.mean([iact(draws[:, j]) for j in range(draws.shape[1])]))


def tnv(iact_mean_value: float, wall_time: float) -> float:
    """Time-normalised variance ``IACT_mean * CT``."""
    if not (iact_mean_value > 0 and wall_time > 0):
        raise ValueError("IACT and computing time must be positive")
    return iact_mean_value * wall_time


def relative_tnv(tnv_value: float, baseline_tnv: float) -> float:
    return tnv_value / baseline_tnv


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

def summarize_series(x) -> PosteriorSummary:
    x = np.asarray(x, dtype=float).ravel()
    mean = float(np.mean(x))
    lo, hi = (float(v) for v in np.percentile(x, [2.5, 97.5]))
    if lo == hi:
        # a constant chain: the mean may differ from the value by rounding
        mean = lo
    value, degenerate = iact_flagged(x) if x.size >= 10 else (float("nan"), True)
    return PosteriorSummary(mean=mean, ci_low=lo, ci_high=hi, iact=value,
                            significant=not (lo <= 0.0 <= hi),
                            sd=float(np.std(x, ddof=1)) if x.size > 1 else 0.0,
                            degenerate=degenerate, ci_brackets_mean=lo <= mean <= hi)


def summarize(chain: ChainOutput | np.ndarray, names: list[str] | None = None,
              min_draws: int = 100) -> dict[str, PosteriorSummary]:
    """Posterior mean, 95% equal-tailed interval, IACT and significance per parameter."""
    if isinstance(chain, ChainOutput):
        draws, names = chain.draws, chain.param_names
    else:
        draws = np.atleast_2d(np.asarray(chain, dtype=float))
        names = names or [f"p{j}" for j in range(draws.shape[1])]
    if draws.shape[0] < min_draws:
        raise ValueError(f"need at least {min_draws} draws to summarise")
    return {n: summarize_series(draws[:, j]) for j, n in enumerate(names)}


# ---------------------------------------------------------------------------
# Average partial effects
# ---------------------------------------------------------------------------

_GH_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_hermite(n: int):
    """Nodes and weights for integrating against a standard normal density."""
    if n not in _GH_CACHE:
        x, w = np.polynomial.hermite_e.hermegauss(n)
        _GH_CACHE[n] = (x, w / math.sqrt(2.0 * math.pi))
    return _GH_CACHE[n]


def _toggled_designs(data: PanelData, event: str | int):
    """Design matrices with the event column forced to 1 and to 0."""
    found = False
    out = {}
    for eq, (X, names, xbar) in enumerate(((data.X1, data.names1, data.xbar1),
                                           (data.X2, data.names2, data.xbar2)), start=1):
        if isinstance(event, (int, np.integer)):
            col = int(event) if int(event) < X.shape[2] else None
        else:
            col = names.index(event) if event in names else None
        designs = []
        for value in (1.0, 0.0):
            Xv = np.array(X, copy=True)
            if col is not None:
                vals = X[:, :, col]
                if not np.all((vals == 0.0) | (vals == 1.0)):
                    raise ValueError(f"covariate {event!r} is not binary")
                Xv[:, :, col] = value
            P, T = Xv.shape[:2]
            designs.append(np.concatenate(
                [Xv, np.broadcast_to(xbar[:, None, :], (P, T, xbar.shape[1]))], axis=2))
        found = found or col is not None
        out[eq] = designs
    if not found:
        raise ValueError(f"covariate {event!r} not found in either equation")
    return out


def joint_prob_gaussian(z1, z2, theta: Theta):
    """P(y1 = 1, y2 > 0) under normal errors and normal random effects."""
    V = np.array([[1.0, theta.dep], [theta.dep, 1.0]]) + theta.sigma_alpha
    s1, s2 = math.sqrt(V[0, 0]), math.sqrt(V[1, 1])
    return bvn_cdf(z1 / s1, z2 / s2, V[0, 1] / (s1 * s2))


def joint_prob_copula(z1, z2, theta: Theta, family, n_quad: int = 40):
    """P(y1 = 1, y2 > 0) for a copula family, integrating the random effects
    by tensor Gauss-Hermite quadrature.

    Given ``alpha`` the probability is the copula survival function
    ``1 - u1 - u2 + C(u1, u2)`` at ``u_j = Phi(-(z_j + alpha_j))``.
    """
    x, w = _gauss_hermite(n_quad)
    L = np.linalg.cholesky(theta.sigma_alpha)
    g1, g2 = np.meshgrid(x, x, indexing="ij")
    a1 = L[0, 0] * g1
    a2 = L[1, 0] * g1 + L[1, 1] * g2
    ww = np.outer(w, w)
    a1 = a1.ravel()
    a2 = a2.ravel()
    ww = ww.ravel()
    z1, z2 = np.broadcast_arrays(np.asarray(z1, dtype=float), np.asarray(z2, dtype=float))
    flat1, flat2 = z1.ravel(), z2.ravel()
    out = np.empty(flat1.size)
    chunk = max(1, 2**20 // ww.size)
    for s in range(0, flat1.size, chunk):
        u1 = std_normal_cdf(-(flat1[s:s + chunk, None] + a1))
        u2 = std_normal_cdf(-(flat2[s:s + chunk, None] + a2))
        surv = 1.0 - u1 - u2 + copula_cdf(u1, u2, family, theta.dep)
        out[s:s + chunk] = surv @ ww
    return out.reshape(z1.shape)[()]


def ape_draw(theta: Theta, designs, family, n_quad: int = 40) -> float:
    """Average partial effect for one parameter draw."""
    family = Family.parse(family)
    Z1_on, Z1_off = designs[1]
    Z2_on, Z2_off = designs[2]
    z1_on, z1_off = Z1_on @ theta.beta1, Z1_off @ theta.beta1
    z2_on, z2_off = Z2_on @ theta.beta2, Z2_off @ theta.beta2
    if family in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN):
        diff = joint_prob_gaussian(z1_on, z2_on, theta) - joint_prob_gaussian(z1_off, z2_off, theta)
    else:
        diff = (joint_prob_copula(z1_on, z2_on, theta, family, n_quad)
                - joint_prob_copula(z1_off, z2_off, theta, family, n_quad))
    return float(np.mean(diff))


def ape(chain: ChainOutput, model_or_family, data: PanelData, life_event, family=None,
        thin: int = 1, n_quad: int = 40) -> tuple[PosteriorSummary | None, np.ndarray]:
    """Posterior average partial effect of switching a binary covariate on.

    For each retained draw, the joint probability of ``y1 = 1`` and
    ``y2 > 0`` (``y2 = 1`` for the probit) is averaged over all cells with
    the event set to one, and the same average with the event set to zero
    is subtracted. Mundlak averages are held at their observed values.

    Gaussian and probit families use the closed bivariate normal form. The
    copula families integrate over the random effects by Gauss-Hermite
    quadrature with ``n_quad`` nodes per axis.

    Returns
    -------
    summary : PosteriorSummary over draws, or None if fewer than 10 draws
    values : array of per-draw APEs
    """
    if family is None:
        family = getattr(model_or_family, "family", model_or_family)
    family = Family.parse(family)
    designs = _toggled_designs(data, life_event)
    values = np.array([ape_draw(th, designs, family, n_quad) for th in chain.thetas(thin)])
    summary = summarize_series(values) if values.size >= 10 else None
    return summary, values
