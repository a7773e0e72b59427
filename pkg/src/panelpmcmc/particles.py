"""Importance-sampling particle clouds for the individual random effects.

The proposal for every individual is the random-effect prior, so the raw
weight of a particle is just the conditional likelihood of that individual's
observations. Weights are kept on the log scale and normalised per
individual only when an index has to be drawn.

Particle positions are zero-based: slot ``0`` is the reference particle in a
conditional cloud, and selected indices ``k`` lie in ``{0, ..., N - 1}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


@dataclass
class ParticleCloud:
    """``N`` particles for each of ``P`` individuals.

    Attributes
    ----------
    alphas : array, shape (P, N, 2)
    log_w : array, shape (P, N)
        Raw log-weights.
    k : array of int, shape (P,), optional
        Selected particle per individual, once drawn.
    """

    alphas: np.ndarray
    log_w: np.ndarray
    k: np.ndarray | None = None

    @property
    def P(self) -> int:
        return self.alphas.shape[0]

    @property
    def N(self) -> int:
        return self.alphas.shape[1]

    @property
    def log_norm(self) -> np.ndarray:
        """``log sum_j w_ij`` per individual."""
        return logsumexp(self.log_w, axis=1)

    @property
    def wbar(self) -> np.ndarray:
        """Normalised weights, rows summing to one."""
        with np.errstate(invalid="ignore"):
            w = np.exp(self.log_w - self.log_norm[:, None])
        # individuals whose weights all vanished fall back to uniform
        dead = ~np.isfinite(self.log_norm)
        if np.any(dead):
            w[dead] = 1.0 / self.N
        return w / w.sum(axis=1, keepdims=True)

    def selected(self, k=None) -> np.ndarray:
        k = self.k if k is None else k
        return self.alphas[np.arange(self.P), k]


def propose_particles(model, theta, N: int, rngs) -> ParticleCloud:
    """Draw ``N`` prior particles per individual and weight them.

    Parameters
    ----------
    model : object
        Provides ``sample_alpha(theta, rngs, n)`` and
        ``loglik_individuals(theta, alphas)``.
    rngs : sequence of numpy Generators, one per individual
    """
    if N < 1:
        raise ValueError("need at least one particle")
    alphas = model.sample_alpha(theta, rngs, N)
    return ParticleCloud(alphas, model.loglik_individuals(theta, alphas))


def estimate_loglik(cloud: ParticleCloud) -> float:
    """Log of the unbiased likelihood estimate ``prod_i mean_j w_ij``."""
    per = cloud.log_norm - np.log(cloud.N)
    if np.any(per == -np.inf):
        return -np.inf
    return float(np.sum(per))


def conditional_particles(model, theta, reference, N: int, rngs) -> ParticleCloud:
    """Conditional cloud: slot 0 keeps ``reference``, slots 1..N-1 are fresh.

    Parameters
    ----------
    reference : array, shape (P, 2)
        The currently selected random effects.
    """
    if N < 2:
        raise ValueError("conditional Monte Carlo needs N >= 2")
    reference = np.asarray(reference, dtype=float)
    fresh = model.sample_alpha(theta, rngs, N - 1)
    alphas = np.concatenate([reference[:, None, :], fresh], axis=1)
    return ParticleCloud(alphas, model.loglik_individuals(theta, alphas))


def sample_indices(cloud: ParticleCloud, rng: np.random.Generator) -> np.ndarray:
    """Draw one index per individual from its normalised weights.

    Individuals are visited in order and each consumes exactly one uniform
    from ``rng``.
    """
    w = cloud.wbar
    cdf = np.cumsum(w, axis=1)
    u = rng.random(cloud.P) * cdf[:, -1]
    k = (cdf <= u[:, None]).sum(axis=1)
    k = np.minimum(k, cloud.N - 1)
    cloud.k = k
    return k
