"""Hamiltonian proposals for the regression coefficients.

The kinetic energy is ``0.5 r' M^{-1} r`` with momentum ``r ~ N(0, M)``.
Targets are supplied as a callable ``logp_grad(beta) -> (logp, grad)``.

The no-U-turn sampler is the slice-variable version of Hoffman and Gelman
(2014) with dual-averaging step-size adaptation. The mass matrix is learned
from a pilot window: the first part of warm-up runs with ``M = I``, after
which ``M`` is set to the inverse of the sample covariance of the pilot
draws (diagonal by default) and dual averaging restarts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class AdaptationError(RuntimeError):
    """Step-size adaptation collapsed towards zero."""


class HmcError(ArithmeticError):
    """Non-finite gradient encountered during integration."""


@dataclass
class HmcConfig:
    """Settings of the Hamiltonian proposal.

    ``n_leapfrog`` is the fixed path length of plain HMC; NUTS instead stops
    on the no-U-turn criterion or after ``2**max_depth`` steps.
    """

    step_size: float = 0.1
    mass_matrix: np.ndarray | None = None
    n_leapfrog: int = 10
    max_depth: int = 10
    target_accept: float = 0.8
    adapt_iters: int = 1000
    pilot_iters: int = 1000
    dense_mass: bool = False
    algorithm: str = "nuts"
    max_delta_h: float = 1000.0

    def __post_init__(self):
        if self.mass_matrix is not None:
            M = np.atleast_2d(np.asarray(self.mass_matrix, dtype=float))
            try:
                np.linalg.cholesky(M)
            except np.linalg.LinAlgError as exc:
                raise ValueError("mass matrix must be positive definite") from exc
            self.mass_matrix = M
        if not self.step_size > 0:
            raise ValueError("step size must be positive")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target acceptance must lie in (0, 1)")
        if self.algorithm not in ("nuts", "hmc"):
            raise ValueError("algorithm must be 'nuts' or 'hmc'")


class Metric:
    """Mass matrix with cached inverse and Cholesky factor."""

    def __init__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        self.M = M
        self.diagonal = bool(np.all(M == np.diag(np.diag(M))))
        if self.diagonal:
            d = np.diag(M)
            self.inv_diag = 1.0 / d
            self.sqrt_diag = np.sqrt(d)
        else:
            self.M_inv = np.linalg.inv(M)
            self.L = np.linalg.cholesky(M)

    @classmethod
    def identity(cls, dim: int) -> "Metric":
        return cls(np.eye(dim))

    def velocity(self, r):
        return self.inv_diag * r if self.diagonal else self.M_inv @ r

    def kinetic(self, r) -> float:
        return 0.5 * float(np.dot(r, self.velocity(r)))

    def sample_momentum(self, rng) -> np.ndarray:
        z = rng.standard_normal(self.M.shape[0])
        return self.sqrt_diag * z if self.diagonal else self.L @ z


def _as_metric(M, dim) -> Metric:
    if isinstance(M, Metric):
        return M
    if M is None:
        return Metric.identity(dim)
    return Metric(M)


def leapfrog(beta, r, eps: float, grad, M=None, n_steps: int = 1, grad0=None):
    """Leapfrog integration: half kick, drift with ``M^{-1} r``, half kick.

    Parameters
    ----------
    grad : callable
        ``grad(beta)`` returning the gradient of the log target. A callable
        returning ``(logp, grad)`` pairs is also accepted.
    grad0 : array, optional
        Gradient at the starting point, if already known.

    Returns
    -------
    beta, r : arrays after ``n_steps`` steps
    """
    metric = _as_metric(M, np.size(beta))
    beta = np.array(beta, dtype=float)
    r = np.array(r, dtype=float)

    def g(b):
        out = grad(b)
        out = out[1] if isinstance(out, tuple) else out
        out = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(out)):
            raise HmcError("non-finite gradient in leapfrog")
        return out

    gb = g(beta) if grad0 is None else grad0
    for _ in range(n_steps):
        r = r + 0.5 * eps * gb
        beta = beta + eps * metric.velocity(r)
        gb = g(beta)
        r = r + 0.5 * eps * gb
    return beta, r


def _leapfrog_lp(beta, r, grad_b, eps, logp_grad, metric):
    """One leapfrog step that also returns the new log density and gradient."""
    r = r + 0.5 * eps * grad_b
    beta = beta + eps * metric.velocity(r)
    lp, gb = logp_grad(beta)
    if not (np.isfinite(lp) and np.all(np.isfinite(gb))):
        return beta, r, -np.inf, np.zeros_like(gb)
    r = r + 0.5 * eps * gb
    return beta, r, lp, gb


def hmc_propose(beta, logp_grad, config: HmcConfig, rng, metric=None, state=None):
    """One HMC transition with a fixed number of leapfrog steps.

    Returns
    -------
    beta_new : array
    accepted : bool
    info : dict with ``accept_prob`` and ``divergent``
    """
    beta = np.asarray(beta, dtype=float)
    metric = metric if metric is not None else _as_metric(config.mass_matrix, beta.size)
    if state is None:
        lp0, g0 = logp_grad(beta)
    else:
        lp0, g0 = state
    r0 = metric.sample_momentum(rng)
    h0 = -lp0 + metric.kinetic(r0)
    b, r, lp, g = beta, r0, lp0, g0
    for _ in range(config.n_leapfrog):
        b, r, lp, g = _leapfrog_lp(b, r, g, config.step_size, logp_grad, metric)
        if not np.isfinite(lp):
            break
    h1 = -lp + metric.kinetic(r) if np.isfinite(lp) else np.inf
    dh = h1 - h0
    divergent = not (abs(dh) <= config.max_delta_h)
    log_a = -dh if not divergent else -np.inf
    accept_prob = math.exp(min(0.0, log_a)) if np.isfinite(log_a) else 0.0
    accepted = (not divergent) and math.log(rng.random()) < log_a
    info = {"accept_prob": accept_prob, "divergent": divergent, "n_leapfrog": config.n_leapfrog}
    if accepted:
        info["state"] = (lp, g)
        return b, True, info
    info["state"] = (lp0, g0)
    return beta.copy(), False, info


# ---------------------------------------------------------------------------
# NUTS
# ---------------------------------------------------------------------------

def _no_uturn(b_minus, b_plus, r_minus, r_plus, metric) -> bool:
    db = b_plus - b_minus
    return (np.dot(db, metric.velocity(r_minus)) >= 0.0
            and np.dot(db, metric.velocity(r_plus)) >= 0.0)


def _build_tree(b, r, g, log_u, v, j, eps, joint0, logp_grad, metric, max_dh, rng):
    """Recursive tree doubling; returns the tuple used by :func:`nuts_step`."""
    if j == 0:
        b1, r1, lp1, g1 = _leapfrog_lp(b, r, g, v * eps, logp_grad, metric)
        joint = lp1 - metric.kinetic(r1) if np.isfinite(lp1) else -np.inf
        n1 = int(log_u <= joint)
        s1 = bool(log_u < max_dh + joint)
        diff = joint - joint0
        a = math.exp(min(0.0, diff)) if np.isfinite(diff) else 0.0
        return b1, r1, g1, b1, r1, g1, b1, lp1, g1, n1, s1, a, 1
    (bm, rm, gm, bp, rp, gp, b1, lp1, g1, n1, s1, a1, na1) = _build_tree(
        b, r, g, log_u, v, j - 1, eps, joint0, logp_grad, metric, max_dh, rng)
    if s1:
        if v == -1:
            (bm, rm, gm, _, _, _, b2, lp2, g2, n2, s2, a2, na2) = _build_tree(
                bm, rm, gm, log_u, v, j - 1, eps, joint0, logp_grad, metric, max_dh, rng)
        else:
            (_, _, _, bp, rp, gp, b2, lp2, g2, n2, s2, a2, na2) = _build_tree(
                bp, rp, gp, log_u, v, j - 1, eps, joint0, logp_grad, metric, max_dh, rng)
        if n1 + n2 > 0 and rng.random() < n2 / (n1 + n2):
            b1, lp1, g1 = b2, lp2, g2
        a1 += a2
        na1 += na2
        n1 += n2
        s1 = s2 and _no_uturn(bm, bp, rm, rp, metric)
    return bm, rm, gm, bp, rp, gp, b1, lp1, g1, n1, s1, a1, na1


def nuts_step(beta, logp_grad, eps: float, rng, metric=None, max_depth: int = 10,
              max_delta_h: float = 1000.0, state=None):
    """One no-U-turn transition.

    Returns
    -------
    beta_new : array
    info : dict with ``accept_stat`` (mean Metropolis ratio over the final
        tree, used by dual averaging), ``depth``, ``n_leapfrog``,
        ``divergent`` and ``state`` (log density and gradient at the new point)
    """
    beta = np.asarray(beta, dtype=float)
    metric = metric if metric is not None else Metric.identity(beta.size)
    if state is None:
        lp0, g0 = logp_grad(beta)
    else:
        lp0, g0 = state
    r0 = metric.sample_momentum(rng)
    joint0 = lp0 - metric.kinetic(r0)
    log_u = joint0 + math.log(rng.random())
    bm = bp = beta
    rm = rp = r0
    gm = gp = g0
    b_new, lp_new, g_new = beta, lp0, g0
    n, s, depth = 1, True, 0
    a_sum, n_a = 0.0, 0
    divergent = False
    while s and depth < max_depth:
        v = 1 if rng.random() < 0.5 else -1
        if v == -1:
            (bm, rm, gm, _, _, _, b1, lp1, g1, n1, s1, a, na) = _build_tree(
                bm, rm, gm, log_u, v, depth, eps, joint0, logp_grad, metric, max_delta_h, rng)
        else:
            (_, _, _, bp, rp, gp, b1, lp1, g1, n1, s1, a, na) = _build_tree(
                bp, rp, gp, log_u, v, depth, eps, joint0, logp_grad, metric, max_delta_h, rng)
        # an energy blow-up leaves no admissible point in the new subtree
        divergent = divergent or (not s1 and n1 == 0)
        if s1 and rng.random() < min(1.0, n1 / n):
            b_new, lp_new, g_new = b1, lp1, g1
        n += n1
        a_sum, n_a = a, na
        s = s1 and _no_uturn(bm, bp, rm, rp, metric)
        depth += 1
    info = {"accept_stat": a_sum / max(n_a, 1), "depth": depth, "n_leapfrog": n_a,
            "divergent": divergent, "state": (lp_new, g_new)}
    return np.array(b_new, dtype=float), info


# ---------------------------------------------------------------------------
# Adaptation
# ---------------------------------------------------------------------------

@dataclass
class DualAveraging:
    """Nesterov dual averaging of ``log eps`` (Hoffman and Gelman, 2014)."""

    eps0: float
    target: float = 0.8
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75
    mu: float = field(init=False)
    h_bar: float = field(default=0.0, init=False)
    log_eps: float = field(init=False)
    log_eps_bar: float = field(default=0.0, init=False)
    m: int = field(default=0, init=False)

    def __post_init__(self):
        self.mu = math.log(10.0 * self.eps0)
        self.log_eps = math.log(self.eps0)

    def update(self, accept_stat: float) -> float:
        self.m += 1
        m = self.m
        w = 1.0 / (m + self.t0)
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_stat)
        self.log_eps = self.mu - math.sqrt(m) / self.gamma * self.h_bar
        eta = m ** -self.kappa
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def final_step_size(self) -> float:
        return math.exp(self.log_eps_bar) if self.m else math.exp(self.log_eps)


def find_reasonable_epsilon(beta, logp_grad, rng, metric=None, eps: float = 1.0) -> float:
    """Heuristic initial step size: double or halve until the one-step
    acceptance ratio crosses 1/2."""
    beta = np.asarray(beta, dtype=float)
    metric = metric if metric is not None else Metric.identity(beta.size)
    lp0, g0 = logp_grad(beta)
    r0 = metric.sample_momentum(rng)
    joint0 = lp0 - metric.kinetic(r0)

    def log_ratio(e):
        _, r1, lp1, _ = _leapfrog_lp(beta, r0, g0, e, logp_grad, metric)
        if not np.isfinite(lp1):
            return -np.inf
        return lp1 - metric.kinetic(r1) - joint0

    lr = log_ratio(eps)
    direction = 1.0 if lr > math.log(0.5) else -1.0
    for _ in range(100):
        if direction * lr <= direction * math.log(0.5):
            break
        eps = eps * 2.0 ** direction
        lr = log_ratio(eps)
    return eps


class HmcKernel:
    """Stateful Hamiltonian kernel with warm-up adaptation.

    During the first ``config.adapt_iters`` calls with ``adapt=True`` the
    step size is tuned by dual averaging towards ``config.target_accept``.
    The first ``config.pilot_iters`` of those run with an identity mass
    matrix and record the draws. After the pilot the mass matrix becomes the
    inverse of the sample covariance, and dual averaging restarts. Once
    warm-up ends the step size is frozen at its averaged value.
    """

    def __init__(self, dim: int, config: HmcConfig | None = None):
        self.config = config if config is not None else HmcConfig()
        self.dim = dim
        M = self.config.mass_matrix
        self.metric = Metric.identity(dim) if M is None else Metric(M)
        self.eps = self.config.step_size
        self.da: DualAveraging | None = None
        self.n_adapt = 0
        self.pilot: list[np.ndarray] = []
        self.mass_fixed = M is not None
        self.n_divergent = 0
        self.n_accept = 0
        self.n_calls = 0
        self.accept_stats: list[float] = []
        self.leapfrog_counts: list[int] = []

    @property
    def adapting(self) -> bool:
        return self.n_adapt < self.config.adapt_iters

    def _ensure_da(self, beta, logp_grad, rng):
        if self.da is None:
            self.eps = find_reasonable_epsilon(beta, logp_grad, rng, self.metric, self.eps)
            self.da = DualAveraging(self.eps, self.config.target_accept)

    def step(self, beta, logp_grad, rng, adapt: bool = True, state=None):
        """Advance one transition; returns ``(beta_new, info)``."""
        adapt = adapt and self.adapting
        if adapt:
            self._ensure_da(beta, logp_grad, rng)
        if self.config.algorithm == "nuts":
            new, info = nuts_step(beta, logp_grad, self.eps, rng, self.metric,
                                  self.config.max_depth, self.config.max_delta_h, state)
            stat = info["accept_stat"]
            accepted = not np.array_equal(new, beta)
        else:
            cfg = HmcConfig(step_size=self.eps, n_leapfrog=self.config.n_leapfrog,
                            max_delta_h=self.config.max_delta_h)
            new, accepted, info = hmc_propose(beta, logp_grad, cfg, rng, self.metric, state)
            stat = info["accept_prob"]
        self.n_calls += 1
        self.n_accept += int(accepted)
        self.n_divergent += int(info["divergent"])
        self.accept_stats.append(stat)
        self.leapfrog_counts.append(info["n_leapfrog"])
        if adapt:
            self._adapt(new, stat, logp_grad, rng)
        return new, info

    def _adapt(self, beta, stat, logp_grad, rng):
        self.n_adapt += 1
        eps = self.da.update(stat)
        if not eps > 1e-10:
            raise AdaptationError(f"step size collapsed to {eps:.3g} during warm-up")
        self.eps = min(eps, 1e3)
        if not self.mass_fixed:
            self.pilot.append(np.array(beta, copy=True))
            if len(self.pilot) >= self.config.pilot_iters:
                self._set_mass_from_pilot(beta, logp_grad, rng)
        if self.n_adapt >= self.config.adapt_iters:
            self.eps = self.da.final_step_size
            if not self.mass_fixed:
                # warm-up shorter than the pilot: use what has been collected
                self._set_mass_from_pilot(beta, logp_grad, rng, restart=False)

    def _set_mass_from_pilot(self, beta, logp_grad, rng, restart: bool = True):
        draws = np.asarray(self.pilot)
        self.pilot = []
        self.mass_fixed = True
        if draws.shape[0] >= 3:
            if self.config.dense_mass:
                cov = np.atleast_2d(np.cov(draws, rowvar=False))
                cov += 1e-8 * np.mean(np.diag(cov)) * np.eye(self.dim)
                M = np.linalg.inv(cov)
            else:
                var = draws.var(axis=0, ddof=1)
                var = np.where(var > 0, var, 1.0)
                M = np.diag(1.0 / var)
            self.metric = Metric(M)
        if restart:
            self.da = None
            self._ensure_da(beta, logp_grad, rng)

    def freeze(self):
        """End warm-up immediately (used when the run has no burn-in left)."""
        if self.da is not None:
            self.eps = self.da.final_step_size
        self.n_adapt = self.config.adapt_iters

    def to_config(self) -> HmcConfig:
        return HmcConfig(step_size=self.eps, mass_matrix=self.metric.M.copy(),
                         n_leapfrog=self.config.n_leapfrog, max_depth=self.config.max_depth,
                         target_accept=self.config.target_accept,
                         adapt_iters=self.config.adapt_iters, pilot_iters=self.config.pilot_iters,
                         dense_mass=self.config.dense_mass, algorithm=self.config.algorithm)


def nuts_adapt(logp_grad, beta0, rng, adapt_iters: int = 1000, target_accept: float = 0.8,
               pilot_iters: int | None = None, max_depth: int = 10, dense_mass: bool = False):
    """Warm up NUTS on a fixed target and return the tuned configuration.

    Parameters
    ----------
    logp_grad : callable returning ``(logp, grad)``
    beta0 : starting point
    adapt_iters : warm-up length, at least 100
    pilot_iters : length of the identity-metric pilot window; defaults to
        ``min(1000, adapt_iters // 2)``

    Returns
    -------
    config : HmcConfig with the adapted step size and mass matrix
    beta : final warm-up state
    """
    if adapt_iters < 100:
        raise ValueError("adapt_iters must be at least 100")
    pilot = min(1000, adapt_iters // 2) if pilot_iters is None else pilot_iters
    cfg = HmcConfig(target_accept=target_accept, adapt_iters=adapt_iters, pilot_iters=pilot,
                    max_depth=max_depth, dense_mass=dense_mass, algorithm="nuts")
    kernel = HmcKernel(np.size(beta0), cfg)
    beta = np.asarray(beta0, dtype=float)
    state = None
    for _ in range(adapt_iters):
        beta, info = kernel.step(beta, logp_grad, rng, adapt=True, state=state)
        state = info["state"]
    return kernel.to_config(), beta
