"""Special functions and random variate generators used across the package.

The scalar kernels (``ndtr``, ``ndtri``, ``bvn_cdf_scalar``) are compiled with
numba so that the likelihood kernels in :mod:`panelpmcmc.models` can call them
from inside their loops. The public wrappers accept scalars or arrays and
validate their domain before dispatching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, vectorize
from scipy import stats

SQRT2 = math.sqrt(2.0)
TWO_PI = 2.0 * math.pi
LOG_SQRT_2PI = 0.5 * math.log(TWO_PI)

# Genz's Gauss-Legendre tables (half rules, nodes mapped as 1 -/+ x below).
_GL6_W = np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904])
_GL6_X = np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970])
_GL12_W = np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                    0.2031674267230659, 0.2334925365383547, 0.2491470458134029])
_GL12_X = np.array([0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                    0.5873179542866171, 0.3678314989981802, 0.1252334085114692])
_GL20_W = np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                    0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                    0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                    0.1527533871307259])
_GL20_X = np.array([0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                    0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                    0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                    0.07652652113349733])


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a function."""


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """Identifier of a counter-based random stream.

    Each ``(seed, stream_id)`` pair keys its own Philox generator, so streams
    never overlap and a stream's draws do not depend on how many other streams
    exist or in which order they are consumed.
    """

    seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed % 2**64, self.stream_id % 2**64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def chain_streams(seed: int, chain: int, n_individuals: int):
    """Return ``(chain_rng, [rng_1, ..., rng_P])`` for one MCMC chain.

    Stream ids are ``chain * 2**32 + j`` with ``j = 0`` reserved for the
    chain-level stream and ``j = i + 1`` for individual ``i``.
    """
    base = int(chain) << 32
    chain_rng = RngStream(seed, base).generator()
    individual = [RngStream(seed, base + i + 1).generator() for i in range(n_individuals)]
    return chain_rng, individual


# ---------------------------------------------------------------------------
# Univariate normal
# ---------------------------------------------------------------------------

@njit(cache=True)
def ndtr(x):
    return 0.5 * math.erfc(-x / SQRT2)


@njit(cache=True)
def npdf(x):
    return math.exp(-0.5 * x * x - LOG_SQRT_2PI)


@njit(cache=True)
def log_ndtr(x):
    """log Phi(x), accurate in both tails."""
    if x > 0.0:
        return math.log1p(-ndtr(-x))
    if x > -30.0:
        return math.log(ndtr(x))
    # asymptotic Mills-ratio series; truncation error below 2e-12 for x <= -30
    z2 = 1.0 / (x * x)
    s = 1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2 * (1.0 - 7.0 * z2)))
    return -0.5 * x * x - LOG_SQRT_2PI - math.log(-x) + math.log(s)


@njit(cache=True)
def ndtri(p):
    """Wichura's AS241 (PPND16) normal quantile, relative accuracy ~1e-16."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                    + 67265.770927008700853) * r + 45921.953931549871457) * r
                  + 13731.693765509461125) * r + 1971.5909503065514427) * r
                + 133.14166789178437745) * r + 3.387132872796366608)
        den = (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                    + 39307.89580009271061) * r + 21213.794301586595867) * r
                  + 5394.1960214247511077) * r + 687.1870074920579083) * r
                + 42.313330701600911252) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
                    + 0.24178072517745061177) * r + 1.27045825245236838258) * r
                  + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                + 4.6303378461565452959) * r + 1.42343711074968357734)
        den = (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                    + 0.0151986665636164571966) * r + 0.14810397642748007459) * r
                  + 0.68976733498510000455) * r + 1.6763848301838038494) * r
                + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 0.0012426609473880784386) * r + 0.026532189526576123093) * r
                  + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                + 5.4637849111641143699) * r + 6.6579046435011037772)
        den = (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                    + 1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r
                  + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
                + 0.59983220655588793769) * r + 1.0)
    val = num / den
    if q < 0.0:
        return -val
    return val


# ---------------------------------------------------------------------------
# Bivariate normal
# ---------------------------------------------------------------------------

@njit(cache=True)
def _bvnu(dh, dk, r):
    """Genz's upper orthant probability P(X > dh, Y > dk) for correlation r."""
    if dh == np.inf or dk == np.inf:
        return 0.0
    if dh == -np.inf:
        if dk == -np.inf:
            return 1.0
        return ndtr(-dk)
    if dk == -np.inf:
        return ndtr(-dh)
    if r == 0.0:
        return ndtr(-dh) * ndtr(-dk)
    ar = abs(r)
    if ar < 0.3:
        w = _GL6_W
        x = _GL6_X
    elif ar < 0.75:
        w = _GL12_W
        x = _GL12_X
    else:
        w = _GL20_W
        x = _GL20_X
    h = dh
    k = dk
    hk = h * k
    bvn = 0.0
    if ar < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r) / 2.0
        for i in range(w.shape[0]):
            for sgn in (-1.0, 1.0):
                sn = math.sin(asr * (1.0 + sgn * x[i]))
                bvn += w[i] * math.exp((sn * hk - hs) / (1.0 - sn * sn))
        bvn = bvn * asr / TWO_PI + ndtr(-h) * ndtr(-k)
    else:
        if r < 0.0:
            k = -k
            hk = -hk
        if ar < 1.0:
            as_ = 1.0 - r * r
            a = math.sqrt(as_)
            bs = (h - k) ** 2
            asr = -(bs / as_ + hk) / 2.0
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 80.0
            if asr > -100.0:
                bvn = a * math.exp(asr) * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0
                                           + c * d * as_ * as_)
            if hk > -100.0:
                b = math.sqrt(bs)
                sp = math.sqrt(TWO_PI) * ndtr(-b / a)
                bvn = bvn - math.exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
            a = a / 2.0
            acc = 0.0
            for i in range(w.shape[0]):
                for sgn in (-1.0, 1.0):
                    xs = (a * (1.0 + sgn * x[i])) ** 2
                    asr_i = -(bs / xs + hk) / 2.0
                    if asr_i > -100.0:
                        sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs)
                        rs = math.sqrt(1.0 - xs)
                        ep = math.exp(-(hk / 2.0) * xs / (1.0 + rs) ** 2) / rs
                        acc += w[i] * math.exp(asr_i) * (ep - sp)
            bvn = -(bvn + a * acc) / TWO_PI
        if r > 0.0:
            bvn = bvn + ndtr(-max(h, k))
        elif h >= k:
            bvn = -bvn
        else:
            if h < 0.0:
                L = ndtr(k) - ndtr(h)
            else:
                L = ndtr(-h) - ndtr(-k)
            bvn = L - bvn
    return max(0.0, min(1.0, bvn))


@njit(cache=True)
def bvn_table(r):
    """Node table for :func:`bvn_cdf_table` at a fixed correlation ``r``.

    Row 0 holds the sines of the quadrature angles, row 1 ``1 / (1 - sin^2)``
    and row 2 the weights scaled by ``asin(r) / (4 pi)``. When ``|r| >= 0.925``
    the table is empty and :func:`bvn_cdf_table` falls back to the full method.
    """
    ar = abs(r)
    if ar >= 0.925 or r == 0.0:
        return np.zeros((3, 0))
    if ar < 0.3:
        w = _GL6_W
        x = _GL6_X
    elif ar < 0.75:
        w = _GL12_W
        x = _GL12_X
    else:
        w = _GL20_W
        x = _GL20_X
    n = w.shape[0]
    tab = np.empty((3, 2 * n))
    asr = math.asin(r) / 2.0
    for i in range(n):
        for j, sgn in enumerate((-1.0, 1.0)):
            sn = math.sin(asr * (1.0 + sgn * x[i]))
            tab[0, 2 * i + j] = sn
            tab[1, 2 * i + j] = 1.0 / (1.0 - sn * sn)
            tab[2, 2 * i + j] = w[i] * asr / TWO_PI
    return tab


@njit(cache=True)
def bvn_cdf_table(h, k, r, tab):
    """:func:`bvn_cdf_scalar` using a precomputed :func:`bvn_table` for ``r``."""
    if tab.shape[1] == 0 or not (math.isfinite(h) and math.isfinite(k)):
        return _bvnu(-h, -k, r)
    hk = h * k
    hs = (h * h + k * k) / 2.0
    acc = 0.0
    for j in range(tab.shape[1]):
        acc += tab[2, j] * math.exp((tab[0, j] * hk - hs) * tab[1, j])
    return max(0.0, min(1.0, acc + ndtr(h) * ndtr(k)))


@njit(cache=True)
def bvn_cdf_scalar(h, k, rho):
    """P(X <= h, Y <= k) for a standard bivariate normal with correlation rho."""
    return _bvnu(-h, -k, rho)


@vectorize(["float64(float64)"], cache=True)
def _ndtr_ufunc(x):
    return ndtr(x)


@vectorize(["float64(float64)"], cache=True)
def _ndtri_ufunc(p):
    return ndtri(p)


@vectorize(["float64(float64, float64, float64)"], cache=True)
def _bvn_ufunc(h, k, r):
    return _bvnu(-h, -k, r)


def std_normal_cdf(x):
    """Standard normal CDF; saturates to 0 or 1 in the far tails."""
    return _ndtr_ufunc(np.asarray(x, dtype=float))[()]


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise DomainError("std_normal_quantile requires p in (0, 1)")
    return _ndtri_ufunc(p)[()]


def bvn_cdf(h, k, rho):
    """Bivariate standard normal CDF ``Phi_2(h, k; rho)``.

    Uses Genz's adaptation of the Drezner-Wesolowsky method (Gauss-Legendre
    rules of order 6, 12 or 20 depending on ``|rho|``), accurate to roughly
    1e-15 in absolute terms.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(~(np.abs(rho) < 1.0)):
        raise DomainError("bvn_cdf requires |rho| < 1")
    return _bvn_ufunc(np.asarray(h, dtype=float), np.asarray(k, dtype=float), rho)[()]


# ---------------------------------------------------------------------------
# Truncated normal
# ---------------------------------------------------------------------------

_TAIL_SWITCH = 4.0


def _tail_exponential(a, b, rng):
    """Robert (1995) exponential rejection on (a, b) with a >= 4 (standardized)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty_like(a)
    todo = np.arange(a.size)
    lam = 0.5 * (a + np.sqrt(a * a + 4.0))
    span = np.where(np.isinf(b), np.inf, b - a)
    # mass of the exponential proposal inside (a, b)
    frac = -np.expm1(-lam * span)
    while todo.size:
        u = rng.random(todo.size)
        v = rng.random(todo.size)
        z = a[todo] - np.log1p(-u * frac[todo]) / lam[todo]
        keep = v <= np.exp(-0.5 * (z - lam[todo]) ** 2)
        out[todo[keep]] = z[keep]
        todo = todo[~keep]
    return out


def truncated_normal(mu, sigma, lower, upper, rng: np.random.Generator):
    """Vectorized draws from N(mu, sigma^2) truncated to (lower, upper).

    Arguments broadcast against each other. Mild truncation is handled by
    inverse-CDF sampling; regions more than four standard deviations from the
    mean use exponential rejection so that far-tail regions neither hang nor
    collapse onto the boundary.
    """
    mu, sigma, lower, upper = np.broadcast_arrays(
        np.asarray(mu, float), np.asarray(sigma, float),
        np.asarray(lower, float), np.asarray(upper, float))
    if np.any(sigma <= 0):
        raise DomainError("sigma must be positive")
    if np.any(~(lower < upper)):
        raise DomainError("truncated_normal requires lower < upper")
    a = ((lower - mu) / sigma).ravel()
    b = ((upper - mu) / sigma).ravel()
    # reflect so that the region never lies wholly below zero
    flip = b <= 0.0
    a2 = np.where(flip, -b, a)
    b2 = np.where(flip, -a, b)
    z = np.empty_like(a2)
    tail = a2 >= _TAIL_SWITCH
    body = ~tail
    if np.any(body):
        ab, bb = a2[body], b2[body]
        u = rng.random(ab.size)
        zb = np.empty_like(ab)
        pos = ab > 0.0
        # upper-tail parameterisation keeps precision when a > 0
        sa, sb = _ndtr_ufunc(-ab[pos]), _ndtr_ufunc(-bb[pos])
        zb[pos] = -_ndtri_ufunc(sa - u[pos] * (sa - sb))
        fa, fb = _ndtr_ufunc(ab[~pos]), _ndtr_ufunc(bb[~pos])
        zb[~pos] = _ndtri_ufunc(fa + u[~pos] * (fb - fa))
        # guard against rounding onto the boundary
        zb = np.clip(zb, np.nextafter(ab, np.inf), np.nextafter(bb, -np.inf))
        z[body] = zb
    if np.any(tail):
        z[tail] = _tail_exponential(a2[tail], b2[tail], rng)
    z = np.where(flip, -z, z)
    out = (mu.ravel() + sigma.ravel() * z).reshape(mu.shape)
    # the affine map can round a draw onto the boundary in extreme cases
    out = np.clip(out, np.nextafter(lower, np.inf), np.nextafter(upper, -np.inf))
    return out[()]


def sample_truncated_normal(mu: float, sigma: float, lower: float, upper: float,
                            rng: np.random.Generator) -> float:
    """Single draw from N(mu, sigma^2) restricted to (lower, upper)."""
    return float(truncated_normal(mu, sigma, lower, upper, rng))


# ---------------------------------------------------------------------------
# Wishart
# ---------------------------------------------------------------------------

def sample_wishart(v: float, R, rng: np.random.Generator) -> np.ndarray:
    """Draw from W(v, R), mean ``v * R``."""
    R = np.asarray(R, dtype=float)
    dim = R.shape[0]
    if v < dim:
        raise DomainError(f"degrees of freedom {v} below dimension {dim}")
    if not np.allclose(R, R.T):
        raise DomainError("scale matrix must be symmetric")
    try:
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError as exc:
        raise DomainError("scale matrix must be positive definite") from exc
    return np.atleast_2d(stats.wishart.rvs(df=v, scale=R, random_state=rng))
