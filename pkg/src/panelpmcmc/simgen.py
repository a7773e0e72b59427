"""Synthetic panels from the simulation designs used to benchmark the samplers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models.copulas import copula_from_uniforms
from .models.data import Family, PanelData, RandomEffects, Theta, sigma_alpha_matrix
from .numeric import RngStream, std_normal_quantile

BETA1_SIM = (-1.5, 0.1, -0.2, 0.2, -0.2, 0.1, -0.2, 0.1, -0.1, -0.2, 0.2)
BETA2_TAIL = (0.1, 0.2, -0.2, 0.2, 0.12, 0.2, -0.2, 0.12, -0.12, 0.12)


@dataclass
class SimDesign:
    """Simulation design.

    Both equations share an intercept followed by ``len(beta) - 1``
    covariates drawn from U(0, 1). No Mundlak averages are included.
    """

    P: int
    T: int
    family: Family
    beta1: np.ndarray
    beta2: np.ndarray
    tau1_sq: float = 1.0
    tau2_sq: float = 1.0
    rho_alpha: float = 0.0
    dep: float = 0.0
    seed: int = 0
    names: list[str] | None = field(default=None)

    def __post_init__(self):
        self.family = Family.parse(self.family)
        self.beta1 = np.asarray(self.beta1, dtype=float)
        self.beta2 = np.asarray(self.beta2, dtype=float)
        if self.beta1.size != self.beta2.size:
            raise ValueError("both equations share one covariate block")
        if self.P < 1 or self.T < 1:
            raise ValueError("P and T must be positive")
        if not self.theta.is_valid(self.family):
            raise ValueError("design parameters outside their domain")
        if self.names is None:
            self.names = ["const"] + [f"x{j}" for j in range(1, self.beta1.size)]

    @property
    def theta(self) -> Theta:
        return Theta(beta1=self.beta1, beta2=self.beta2, dep=self.dep, tau1_sq=self.tau1_sq,
                     tau2_sq=self.tau2_sq, rho_alpha=self.rho_alpha)


def _matched_dep(family: Family, dep: float) -> float:
    """Dependence parameter of ``family`` with the Kendall tau of a normal
    pair with correlation ``dep``."""
    if family in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN):
        return dep
    tau = 2.0 / np.pi * np.arcsin(dep)
    if tau <= 0:
        raise ValueError("copula presets need positive dependence")
    return 2.0 * tau / (1.0 - tau) if family is Family.MIXED_CLAYTON else 1.0 / (1.0 - tau)


def preset(name: str, P: int = 1000, T: int = 4, seed: int = 0, family=None) -> SimDesign:
    """Named designs.

    ``probit-sec3.6``
        bivariate probit, intercepts -1.5 and -2.5, ``tau1^2 = 2.5``,
        ``tau2^2 = 1``, ``rho_eps = rho_alpha = 0.5``.
    ``mixed-S3``
        mixed Gaussian, intercepts -1.5 and -0.5, ``tau1^2 = 1``,
        ``tau2^2 = 2.5``, ``rho_eps = rho_alpha = 0.5``.

    Passing a copula ``family`` keeps the design but replaces ``rho_eps``
    by the copula parameter with the same Kendall tau (1/3), i.e. Clayton
    ``theta = 1`` and Gumbel ``theta = 1.5``.
    """
    fam = None if family is None else Family.parse(family)
    key = name.strip().lower()
    if key in ("probit-sec3.6", "probit"):
        fam = fam or Family.BIV_PROBIT
        return SimDesign(P=P, T=T, family=fam, beta1=BETA1_SIM,
                         beta2=(-2.5,) + BETA2_TAIL, tau1_sq=2.5, tau2_sq=1.0, rho_alpha=0.5,
                         dep=_matched_dep(fam, 0.5), seed=seed)
    if key in ("mixed-s3", "mixed"):
        fam = fam or Family.MIXED_GAUSSIAN
        return SimDesign(P=P, T=T, family=fam, beta1=BETA1_SIM,
                         beta2=(-0.5,) + BETA2_TAIL, tau1_sq=1.0, tau2_sq=2.5, rho_alpha=0.5,
                         dep=_matched_dep(fam, 0.5), seed=seed)
    raise ValueError(f"unknown simulation preset {name!r}; use probit-sec3.6 or mixed-S3")


PRESETS = ("probit-sec3.6", "mixed-S3")


def _individual_draws(design: SimDesign):
    """Raw random numbers, one Philox stream per individual.

    Each stream yields, in order, the covariates, two standard normals for
    the random effect and ``2 T`` numbers for the errors (normals for the
    Gaussian families, uniforms for the copulas).
    """
    P, T, d = design.P, design.T, design.beta1.size - 1
    X = np.empty((P, T, d))
    z = np.empty((P, 2))
    e = np.empty((P, T, 2))
    gaussian = design.family in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN)
    for i in range(P):
        rng = RngStream(design.seed, i).generator()
        X[i] = rng.random((T, d))
        z[i] = rng.standard_normal(2)
        e[i] = rng.standard_normal((T, 2)) if gaussian else rng.random((T, 2))
    return X, z, e


def generate(design: SimDesign, return_errors: bool = False):
    """Simulate a panel.

    Returns
    -------
    data : PanelData
    theta : Theta, the true parameters
    alpha : RandomEffects, the true random effects
    eps : array (P, T, 2), only when ``return_errors`` is true
    """
    fam = design.family
    theta = design.theta
    X, z, raw = _individual_draws(design)
    P, T = design.P, design.T
    Xc = np.concatenate([np.ones((P, T, 1)), X], axis=2)

    alpha = z @ np.linalg.cholesky(sigma_alpha_matrix(theta.tau1_sq, theta.tau2_sq,
                                                      theta.rho_alpha)).T
    if fam in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN):
        r = design.dep
        eps = np.empty_like(raw)
        eps[..., 0] = raw[..., 0]
        eps[..., 1] = r * raw[..., 0] + np.sqrt(1.0 - r * r) * raw[..., 1]
    else:
        u1, u2 = copula_from_uniforms(raw[..., 1], raw[..., 0], fam, design.dep)
        eps = np.stack([std_normal_quantile(u1), std_normal_quantile(u2)], axis=-1)

    ystar1 = Xc @ theta.beta1 + alpha[:, None, 0] + eps[..., 0]
    ystar2 = Xc @ theta.beta2 + alpha[:, None, 1] + eps[..., 1]
    y1 = (ystar1 > 0).astype(float)
    y2 = (ystar2 > 0).astype(float) if fam.binary_y2 else ystar2
    names = list(design.names)
    data = PanelData(y1=y1, y2=y2, X1=Xc, X2=Xc.copy(), names1=names, names2=list(names))
    out = (data, theta, RandomEffects(alpha))
    return out + (eps,) if return_errors else out
