"""Conditional log-likelihoods p(y | theta, alpha) and their beta-gradients.

Every family is evaluated cell by cell inside one compiled kernel. The cell
function works with normal scores rather than uniforms: for the mixed models
``u1 = Phi(a1)`` with ``a1 = -(eta1 + alpha1)`` and ``u2 = Phi(e2)`` with
``e2 = y2 - eta2 - alpha2``, and logs of the uniforms come from ``log_ndtr``
so that neither tail loses precision.

Probabilities entering a logarithm are clamped to ``[1e-300, 1 - 1e-16]``.
Clamped cells contribute a zero gradient through the clamped factor and are
tallied in :attr:`PanelModel.clamp_count`.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from ..numeric import LOG_SQRT_2PI, DomainError, bvn_cdf_table, bvn_table, log_ndtr
from .data import (GAUSSIAN_COPULA_CODE, Family, ModelSpec, PanelData,
                   RandomEffects, Theta)

P_FLOOR = 1e-300
P_CEIL = 1.0 - 1e-16
LOG_FLOOR = math.log(P_FLOOR)
LOG_CEIL = math.log1p(-1e-16)
_LOG_COMP_FLOOR = math.log(1e-16)


class NumericalError(ArithmeticError):
    """A likelihood or gradient evaluation produced a non-finite value."""


@njit(cache=True, inline="always")
def _log_npdf(x):
    return -0.5 * x * x - LOG_SQRT_2PI


@njit(cache=True, inline="always")
def _logaddexp(a, b):
    m = max(a, b)
    if m == -math.inf:
        return -math.inf
    return m + math.log1p(math.exp(min(a, b) - m))


@njit(cache=True, inline="always")
def _log1mexp(x):
    """log(1 - exp(x)) for x <= 0."""
    if x > -0.6931471805599453:
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


@njit(cache=True)
def _log_cond_copula(code, a1, e2, dep, want_grad):
    """log C_{1|2}, log(1 - C_{1|2}) and, optionally, dC_{1|2}/da1 and dC_{1|2}/de2.

    ``a1`` and ``e2`` are the normal scores of ``u1`` and ``u2``. The
    complement is computed from its own closed form rather than as
    ``1 - C_{1|2}``, which would lose most digits when ``C_{1|2}`` is near one.
    """
    d_a1 = 0.0
    d_e2 = 0.0
    if code == 4:
        s = math.sqrt(1.0 - dep * dep)
        m = (a1 - dep * e2) / s
        logc12 = log_ndtr(m)
        comp = log_ndtr(-m)
        if want_grad:
            pm = math.exp(_log_npdf(m))
            d_a1 = pm / s
            d_e2 = -pm * dep / s
        return logc12, comp, d_a1, d_e2
    lu1 = log_ndtr(a1)
    lu2 = log_ndtr(e2)
    if code == 2:
        th = dep
        x1 = -th * lu1
        x2 = -th * lu2
        mm = max(x1, x2)
        log_a = mm + math.log(math.exp(x1 - mm) + math.exp(x2 - mm) - math.exp(-mm))
        if x1 > 30.0:
            log_em1 = x1 + math.log1p(-math.exp(-x1))
        elif x1 > 0.0:
            log_em1 = math.log(math.expm1(x1))
        else:
            log_em1 = -math.inf
        # C_{1|2} = (1 + delta)^(-1 - 1/th) with delta = (u1^-th - 1) u2^th
        logc12 = -(1.0 + 1.0 / th) * _logaddexp(0.0, log_em1 - x2)
        comp = _log1mexp(logc12)
        if want_grad:
            log_dens = math.log1p(th) - (th + 1.0) * (lu1 + lu2) - (2.0 + 1.0 / th) * log_a
            d_a1 = math.exp(log_dens + _log_npdf(a1))
            d_e2 = -math.exp(math.log1p(th) - (th + 2.0) * lu2 - (2.0 + 1.0 / th) * log_a
                             + log_em1 + _log_npdf(e2))
        return logc12, comp, d_a1, d_e2
    # Gumbel
    th = dep
    t1 = max(-lu1, 1e-300)
    t2 = max(-lu2, 1e-300)
    lt1 = math.log(t1)
    lt2 = math.log(t2)
    log_s = _logaddexp(th * lt1, th * lt2)
    sr = math.exp(log_s / th)
    logc = -sr
    # log C_{1|2} written through r = (t1 / t2)^th, free of cancellation
    l1r = _logaddexp(0.0, th * (lt1 - lt2))
    logc12 = -t2 * math.expm1(l1r / th) + (1.0 / th - 1.0) * l1r
    comp = _log1mexp(logc12)
    if want_grad:
        tail = math.log(sr + th - 1.0)
        log_dens = (logc + (th - 1.0) * (lt1 + lt2) - lu1 - lu2
                    + (1.0 / th - 2.0) * log_s + tail)
        d_a1 = math.exp(log_dens + _log_npdf(a1))
        lp2 = _log_npdf(e2)
        la = logc + 2.0 * ((th - 1.0) * lt2 - lu2) + (1.0 / th - 2.0) * log_s + tail
        lb = logc + (1.0 / th - 1.0) * log_s + (th - 2.0) * lt2 + math.log(th - 1.0 + t2) - 2.0 * lu2
        d_e2 = math.exp(la + lp2) - math.exp(lb + lp2)
    return logc12, comp, d_a1, d_e2


@njit(cache=True)
def _cell(code, y1, y2, w1, w2, dep, want_grad, tab_pos, tab_neg):
    """Log-likelihood of one (i, t) cell.

    ``w1 = eta1 + alpha1`` and ``w2 = eta2 + alpha2``. ``tab_pos`` and
    ``tab_neg`` are bivariate-normal node tables for ``+dep`` and ``-dep``
    (probit only). Returns ``(loglik, d/dw1, d/dw2, clamped)``.
    """
    if code == 0:
        q1 = 2.0 * y1 - 1.0
        q2 = 2.0 * y2 - 1.0
        h = q1 * w1
        k = q2 * w2
        r = q1 * q2 * dep
        p = bvn_cdf_table(h, k, r, tab_pos if q1 * q2 > 0.0 else tab_neg)
        if not (p >= P_FLOOR):
            return LOG_FLOOR, 0.0, 0.0, 1
        if p > P_CEIL:
            return LOG_CEIL, 0.0, 0.0, 0
        lp = math.log(p)
        g1 = 0.0
        g2 = 0.0
        if want_grad:
            s = math.sqrt(1.0 - r * r)
            g1 = q1 * math.exp(_log_npdf(h) + log_ndtr((k - r * h) / s) - lp)
            g2 = q2 * math.exp(_log_npdf(k) + log_ndtr((h - r * k) / s) - lp)
        return lp, g1, g2, 0
    e2 = y2 - w2
    lphi2 = _log_npdf(e2)
    if code == 1:
        q1 = 2.0 * y1 - 1.0
        s = math.sqrt(1.0 - dep * dep)
        x = q1 * (w1 + dep * e2) / s
        lp = log_ndtr(x)
        if lp < LOG_FLOOR:
            return LOG_FLOOR + lphi2, 0.0, e2, 1
        if lp > LOG_CEIL:
            return LOG_CEIL + lphi2, 0.0, e2, 0
        g1 = 0.0
        g2 = 0.0
        if want_grad:
            lam = math.exp(_log_npdf(x) - lp)
            g1 = q1 * lam / s
            # d/d eta2 = -d/d e2
            g2 = -(q1 * lam * dep / s - e2)
        return lp + lphi2, g1, g2, 0
    a1 = -w1
    logc12, comp, d_a1, d_e2 = _log_cond_copula(code, a1, e2, dep, want_grad)
    if y1 == 0.0:
        sgn = 1.0
        lf = logc12
    else:
        sgn = -1.0
        lf = comp
    if lf < LOG_FLOOR:
        return LOG_FLOOR + lphi2, 0.0, e2, 1
    if lf > LOG_CEIL:
        lf = LOG_CEIL
        d_a1 = 0.0
        d_e2 = 0.0
    g1 = 0.0
    g2 = 0.0
    if want_grad:
        inv_f = math.exp(-lf)
        # dl/dw1 = -dl/da1
        g1 = -sgn * d_a1 * inv_f
        g2 = -(sgn * d_e2 * inv_f - e2)
    return lf + lphi2, g1, g2, 0


@njit(cache=True)
def _linear_predictor(Z, beta, out):
    P, T, k = Z.shape
    for i in range(P):
        for t in range(T):
            acc = 0.0
            for j in range(k):
                acc += Z[i, t, j] * beta[j]
            out[i, t] = acc


@njit(parallel=True, cache=True)
def _loglik_particles(code, y1, y2, eta1, eta2, alphas, dep, out, clamps):
    P = alphas.shape[0]
    n = alphas.shape[1]
    T = y1.shape[1]
    tab_pos = bvn_table(dep)
    tab_neg = bvn_table(-dep)
    for i in prange(P):
        c = 0
        for j in range(n):
            acc = 0.0
            a1 = alphas[i, j, 0]
            a2 = alphas[i, j, 1]
            for t in range(T):
                ll, g1, g2, cl = _cell(code, y1[i, t], y2[i, t], eta1[i, t] + a1,
                                       eta2[i, t] + a2, dep, False, tab_pos, tab_neg)
                acc += ll
                c += cl
            out[i, j] = acc
        clamps[i] = c


@njit(parallel=True, cache=True)
def _loglik_cells_grad(code, y1, y2, eta1, eta2, alpha, dep, ll_out, g1_out, g2_out, clamps):
    P, T = y1.shape
    tab_pos = bvn_table(dep)
    tab_neg = bvn_table(-dep)
    for i in prange(P):
        c = 0
        for t in range(T):
            ll, g1, g2, cl = _cell(code, y1[i, t], y2[i, t], eta1[i, t] + alpha[i, 0],
                                   eta2[i, t] + alpha[i, 1], dep, True, tab_pos, tab_neg)
            ll_out[i, t] = ll
            g1_out[i, t] = g1
            g2_out[i, t] = g2
            c += cl
        clamps[i] = c


@njit(cache=True)
def _contract(g, Z, out):
    """out[k] = sum_i sum_t g[i, t] Z[i, t, k], summed serially in index order."""
    P, T, K = Z.shape
    for k in range(K):
        out[k] = 0.0
    for i in range(P):
        for t in range(T):
            gi = g[i, t]
            for k in range(K):
                out[k] += gi * Z[i, t, k]


@njit(cache=True)
def serial_sum(x):
    acc = 0.0
    for v in x.ravel():
        acc += v
    return acc


def _as_alpha(alpha, P):
    if isinstance(alpha, RandomEffects):
        alpha = alpha.alpha
    alpha = np.ascontiguousarray(alpha, dtype=float)
    if alpha.shape != (P, 2):
        raise ValueError(f"random effects must have shape ({P}, 2)")
    return alpha


class PanelModel:
    """A likelihood family bound to a data set.

    This is the object the samplers work with. Besides the likelihood it
    knows how to draw random effects from their prior, which is the
    proposal used by the particle methods.

    Parameters
    ----------
    family : Family or str
    data : PanelData
    priors : Priors, optional
    """

    def __init__(self, family, data: PanelData, priors=None):
        from .priors import Priors

        self.family = Family.parse(family)
        data.validate(binary_y2=self.family.binary_y2)
        self.data = data
        self.spec = ModelSpec.for_data(self.family, data)
        self.priors = priors if priors is not None else Priors()
        self.clamp_count = 0
        self._code = self.family.code
        self._y1 = np.ascontiguousarray(data.y1)
        self._y2 = np.ascontiguousarray(data.y2)
        self._Z1 = data.Z1
        self._Z2 = data.Z2

    @property
    def P(self) -> int:
        return self.data.P

    @property
    def T(self) -> int:
        return self.data.T

    def param_names(self) -> list[str]:
        from .data import param_names
        return param_names(self.spec, self.data)

    def initial_theta(self) -> Theta:
        return Theta.initial(self.spec)

    def _check_dep(self, theta: Theta):
        if not self.family.dep_in_domain(theta.dep):
            raise DomainError(f"dependence parameter {theta.dep} outside the "
                              f"{self.family.value} domain")

    def linear_predictors(self, theta: Theta):
        if theta.beta1.size != self.spec.k1 or theta.beta2.size != self.spec.k2:
            raise ValueError("coefficient vector lengths do not match the design")
        eta1 = np.empty((self.P, self.T))
        eta2 = np.empty((self.P, self.T))
        _linear_predictor(self._Z1, np.ascontiguousarray(theta.beta1), eta1)
        _linear_predictor(self._Z2, np.ascontiguousarray(theta.beta2), eta2)
        if not (np.all(np.isfinite(eta1)) and np.all(np.isfinite(eta2))):
            raise NumericalError("non-finite linear predictor")
        return eta1, eta2

    # likelihood ---------------------------------------------------------
    def loglik_individuals(self, theta: Theta, alphas, code: int | None = None) -> np.ndarray:
        """Per-individual log-likelihoods for a cloud of random effects.

        Parameters
        ----------
        alphas : array, shape (P, n, 2)

        Returns
        -------
        array, shape (P, n)
        """
        self._check_dep(theta)
        alphas = np.ascontiguousarray(alphas, dtype=float)
        if alphas.ndim != 3 or alphas.shape[0] != self.P or alphas.shape[2] != 2:
            raise ValueError("alphas must have shape (P, n, 2)")
        eta1, eta2 = self.linear_predictors(theta)
        out = np.empty(alphas.shape[:2])
        clamps = np.zeros(self.P, dtype=np.int64)
        _loglik_particles(self._code if code is None else code, self._y1, self._y2,
                          eta1, eta2, alphas, theta.dep, out, clamps)
        self.clamp_count += int(clamps.sum())
        return out

    def loglik(self, theta: Theta, alpha) -> float:
        """Conditional log-likelihood log p(y | theta, alpha) summed over the panel."""
        alpha = _as_alpha(alpha, self.P)
        ll = self.loglik_individuals(theta, alpha[:, None, :])
        return serial_sum(ll)

    def loglik_cells(self, theta: Theta, alpha, code: int | None = None):
        """Per-cell log-likelihoods and derivatives with respect to eta1 and eta2."""
        self._check_dep(theta)
        alpha = _as_alpha(alpha, self.P)
        eta1, eta2 = self.linear_predictors(theta)
        shape = (self.P, self.T)
        ll, g1, g2 = np.empty(shape), np.empty(shape), np.empty(shape)
        clamps = np.zeros(self.P, dtype=np.int64)
        _loglik_cells_grad(self._code if code is None else code, self._y1, self._y2,
                           eta1, eta2, alpha, theta.dep, ll, g1, g2, clamps)
        self.clamp_count += int(clamps.sum())
        return ll, g1, g2

    def loglik_and_grad_beta(self, theta: Theta, alpha, code: int | None = None):
        """``(log p(y | theta, alpha), d/d(beta1, beta2))``."""
        ll, g1, g2 = self.loglik_cells(theta, alpha, code)
        for g in (g1, g2):
            bad = np.argwhere(~np.isfinite(g))
            if bad.size:
                i, t = bad[0]
                raise NumericalError(f"non-finite gradient at individual {i}, period {t}")
        grad = np.empty(self.spec.n_beta)
        out1 = np.empty(self.spec.k1)
        out2 = np.empty(self.spec.k2)
        _contract(g1, self._Z1, out1)
        _contract(g2, self._Z2, out2)
        grad[: self.spec.k1] = out1
        grad[self.spec.k1:] = out2
        return serial_sum(ll), grad

    def grad_beta(self, theta: Theta, alpha) -> np.ndarray:
        return self.loglik_and_grad_beta(theta, alpha)[1]

    # random effects -----------------------------------------------------
    def sample_alpha(self, theta: Theta, rngs, n: int) -> np.ndarray:
        """Draw ``n`` prior random effects per individual, one stream each.

        Returns
        -------
        array, shape (P, n, 2)
        """
        try:
            L = np.linalg.cholesky(theta.sigma_alpha)
        except np.linalg.LinAlgError as exc:
            raise DomainError("random-effect covariance is not positive definite") from exc
        out = np.empty((self.P, n, 2))
        for i, rng in enumerate(rngs):
            z = rng.standard_normal((n, 2))
            out[i, :, 0] = L[0, 0] * z[:, 0]
            out[i, :, 1] = L[1, 0] * z[:, 0] + L[1, 1] * z[:, 1]
        return out

    def log_prior_alpha(self, theta: Theta, alpha) -> np.ndarray:
        """log N(alpha_i; 0, Sigma_alpha) for each individual."""
        alpha = np.asarray(alpha, dtype=float)
        S = theta.sigma_alpha
        det = S[0, 0] * S[1, 1] - S[0, 1] ** 2
        if not det > 0:
            return np.full(alpha.shape[:-1], -np.inf)
        inv = np.array([[S[1, 1], -S[0, 1]], [-S[0, 1], S[0, 0]]]) / det
        quad = np.einsum("...i,ij,...j->...", alpha, inv, alpha)
        return -0.5 * quad - 0.5 * math.log(det) - 2.0 * LOG_SQRT_2PI


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------

def _model(family, data):
    return PanelModel(family, data)


def loglik_biv_probit(theta: Theta, alpha, data: PanelData) -> float:
    """Bivariate probit log-likelihood given the random effects."""
    return _model(Family.BIV_PROBIT, data).loglik(theta, alpha)


def loglik_mixed_gaussian(theta: Theta, alpha, data: PanelData) -> float:
    """Binary/continuous model with bivariate normal errors."""
    return _model(Family.MIXED_GAUSSIAN, data).loglik(theta, alpha)


def loglik_mixed_copula(theta: Theta, alpha, data: PanelData, family) -> float:
    """Binary/continuous model whose error dependence is a copula.

    ``family`` is ``"clayton"``, ``"gumbel"`` or ``"gaussian"``; the Gaussian
    case runs through the copula conditional rather than the bivariate normal
    factorization.
    """
    name = family.value if isinstance(family, Family) else str(family).lower()
    if name == "gaussian":
        model = _model(Family.MIXED_GAUSSIAN, data)
        alpha = _as_alpha(alpha, data.P)
        return serial_sum(model.loglik_individuals(theta, alpha[:, None, :],
                                                   code=GAUSSIAN_COPULA_CODE))
    fam = Family.parse(name)
    if fam not in (Family.MIXED_CLAYTON, Family.MIXED_GUMBEL):
        raise ValueError(f"{family!r} is not a copula family")
    return _model(fam, data).loglik(theta, alpha)


def grad_loglik_beta(model: ModelSpec | Family | str, theta: Theta, alpha, data: PanelData) -> np.ndarray:
    """Gradient of the conditional log-likelihood with respect to (beta1, beta2)."""
    family = model.family if isinstance(model, ModelSpec) else Family.parse(model)
    return _model(family, data).grad_beta(theta, alpha)
