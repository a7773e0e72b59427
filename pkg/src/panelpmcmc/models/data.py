"""Containers for panel data, model families and parameter values."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from ..numeric import DomainError


class DataError(ValueError):
    """Raised when panel data fail validation."""


class Family(str, Enum):
    """Likelihood families supported by the samplers."""

    BIV_PROBIT = "probit"
    MIXED_GAUSSIAN = "gaussian"
    MIXED_CLAYTON = "clayton"
    MIXED_GUMBEL = "gumbel"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, Family):
            return value
        key = str(value).strip().lower()
        aliases = {
            "probit": cls.BIV_PROBIT, "bivprobit": cls.BIV_PROBIT,
            "biv_probit": cls.BIV_PROBIT, "bivariate-probit": cls.BIV_PROBIT,
            "gaussian": cls.MIXED_GAUSSIAN, "mixedgaussian": cls.MIXED_GAUSSIAN,
            "mixed-gaussian": cls.MIXED_GAUSSIAN, "mixed_gaussian": cls.MIXED_GAUSSIAN,
            "clayton": cls.MIXED_CLAYTON, "mixedclayton": cls.MIXED_CLAYTON,
            "mixed-clayton": cls.MIXED_CLAYTON, "mixed_clayton": cls.MIXED_CLAYTON,
            "gumbel": cls.MIXED_GUMBEL, "mixedgumbel": cls.MIXED_GUMBEL,
            "mixed-gumbel": cls.MIXED_GUMBEL, "mixed_gumbel": cls.MIXED_GUMBEL,
        }
        if key not in aliases:
            raise ValueError(f"unknown model family {value!r}")
        return aliases[key]

    @property
    def code(self) -> int:
        """Integer tag used by the compiled likelihood kernels."""
        return _FAMILY_CODES[self]

    @property
    def binary_y2(self) -> bool:
        return self is Family.BIV_PROBIT

    @property
    def dep_name(self) -> str:
        return "rho_eps" if self in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN) else "theta_cop"

    def dep_in_domain(self, dep: float) -> bool:
        if not math.isfinite(dep):
            return False
        if self in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN):
            return -1.0 < dep < 1.0
        if self is Family.MIXED_CLAYTON:
            return dep > 0.0
        return dep >= 1.0

    def dep_to_unconstrained(self, dep: float) -> float:
        """Map the dependence parameter to the real line."""
        if not self.dep_in_domain(dep):
            raise DomainError(f"dependence parameter {dep} outside the {self.value} domain")
        if self in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN):
            return math.atanh(dep)
        if self is Family.MIXED_CLAYTON:
            return math.log(dep)
        return math.log(dep - 1.0) if dep > 1.0 else -math.inf

    def dep_from_unconstrained(self, value: float) -> float:
        """Inverse transform; saturating values are kept strictly inside the domain."""
        if self in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN):
            return max(-_ONE_MINUS, min(_ONE_MINUS, math.tanh(value)))
        if self is Family.MIXED_CLAYTON:
            return max(math.exp(value), _TINY)
        return 1.0 + math.exp(value)

    def dep_log_jacobian(self, value: float) -> float:
        """log |d dep / d value| at unconstrained ``value``."""
        if self in (Family.BIV_PROBIT, Family.MIXED_GAUSSIAN):
            r = math.tanh(value)
            return math.log1p(-r * r) if abs(r) < 1.0 else -math.inf
        return value

    def default_dep(self) -> float:
        """Starting value at (or next to) independence."""
        return {Family.BIV_PROBIT: 0.0, Family.MIXED_GAUSSIAN: 0.0,
                Family.MIXED_CLAYTON: 0.1, Family.MIXED_GUMBEL: 1.01}[self]


_ONE_MINUS = 1.0 - 2.0 ** -53
_TINY = 2.0 ** -1022

_FAMILY_CODES = {Family.BIV_PROBIT: 0, Family.MIXED_GAUSSIAN: 1,
                 Family.MIXED_CLAYTON: 2, Family.MIXED_GUMBEL: 3}
# code 4 evaluates the Gaussian family through its copula representation
GAUSSIAN_COPULA_CODE = 4


def mundlak_averages(X, subset: Sequence[int]) -> np.ndarray:
    """Time averages of the covariates listed in ``subset``.

    Parameters
    ----------
    X : array, shape (P, T, d)
    subset : sequence of column indices into the last axis of ``X``

    Returns
    -------
    array, shape (P, len(subset))
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 3:
        raise ValueError("X must have shape (P, T, d)")
    idx = np.asarray(list(subset), dtype=int)
    if idx.size == 0:
        return np.zeros((X.shape[0], 0))
    if np.any(idx < 0) or np.any(idx >= X.shape[2]):
        raise IndexError(f"subset indices must lie in [0, {X.shape[2]})")
    return X[:, :, idx].mean(axis=1)


@dataclass
class PanelData:
    """Balanced panel of two outcomes for P individuals over T periods.

    ``X1``/``X2`` hold the time-varying covariates of each equation and
    ``xbar1``/``xbar2`` the per-individual Mundlak averages. The design
    matrices used by the likelihood stack the two blocks, see :attr:`Z1`.
    """

    y1: np.ndarray
    y2: np.ndarray
    X1: np.ndarray
    X2: np.ndarray
    xbar1: np.ndarray | None = None
    xbar2: np.ndarray | None = None
    names1: list[str] | None = None
    names2: list[str] | None = None
    names_bar1: list[str] | None = None
    names_bar2: list[str] | None = None
    _Z: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.y1 = np.ascontiguousarray(self.y1, dtype=float)
        self.y2 = np.ascontiguousarray(self.y2, dtype=float)
        self.X1 = np.ascontiguousarray(self.X1, dtype=float)
        self.X2 = np.ascontiguousarray(self.X2, dtype=float)
        P, T = self.y1.shape if self.y1.ndim == 2 else (-1, -1)
        if self.xbar1 is None:
            self.xbar1 = np.zeros((max(P, 0), 0))
        if self.xbar2 is None:
            self.xbar2 = np.zeros((max(P, 0), 0))
        self.xbar1 = np.ascontiguousarray(self.xbar1, dtype=float)
        self.xbar2 = np.ascontiguousarray(self.xbar2, dtype=float)
        self.validate()
        if self.names1 is None:
            self.names1 = [f"v{j}" for j in range(self.d1)]
        if self.names2 is None:
            self.names2 = [f"v{j}" for j in range(self.d2)]
        if self.names_bar1 is None:
            self.names_bar1 = [f"bar{j}" for j in range(self.m1)]
        if self.names_bar2 is None:
            self.names_bar2 = [f"bar{j}" for j in range(self.m2)]

    # shapes -------------------------------------------------------------
    @property
    def P(self) -> int:
        return self.y1.shape[0]

    @property
    def T(self) -> int:
        return self.y1.shape[1]

    @property
    def d1(self) -> int:
        return self.X1.shape[2]

    @property
    def d2(self) -> int:
        return self.X2.shape[2]

    @property
    def m1(self) -> int:
        return self.xbar1.shape[1]

    @property
    def m2(self) -> int:
        return self.xbar2.shape[1]

    def validate(self, binary_y2: bool | None = None) -> None:
        """Check shapes, finiteness and outcome coding; raise :class:`DataError`."""
        if self.y1.ndim != 2:
            raise DataError("y1 must have shape (P, T)")
        P, T = self.y1.shape
        if self.y2.shape != (P, T):
            raise DataError("y2 must have the same shape as y1")
        for name, X in (("X1", self.X1), ("X2", self.X2)):
            if X.ndim != 3 or X.shape[:2] != (P, T):
                raise DataError(f"{name} must have shape (P, T, d)")
        for name, xb in (("xbar1", self.xbar1), ("xbar2", self.xbar2)):
            if xb.ndim != 2 or xb.shape[0] != P:
                raise DataError(f"{name} must have shape (P, m)")
        for name in ("y1", "y2", "X1", "X2", "xbar1", "xbar2"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite values")
        if not np.all((self.y1 == 0.0) | (self.y1 == 1.0)):
            raise DataError("y1 must be coded 0/1")
        if binary_y2 and not np.all((self.y2 == 0.0) | (self.y2 == 1.0)):
            raise DataError("y2 must be coded 0/1 for the bivariate probit family")

    # design matrices ----------------------------------------------------
    def _build(self):
        P, T = self.P, self.T
        Z1 = np.concatenate([self.X1, np.broadcast_to(self.xbar1[:, None, :], (P, T, self.m1))], axis=2)
        Z2 = np.concatenate([self.X2, np.broadcast_to(self.xbar2[:, None, :], (P, T, self.m2))], axis=2)
        self._Z = (np.ascontiguousarray(Z1), np.ascontiguousarray(Z2))

    @property
    def Z1(self) -> np.ndarray:
        """Stacked design ``(x_1it, xbar_1i)`` of shape (P, T, d1 + m1)."""
        if self._Z is None:
            self._build()
        return self._Z[0]

    @property
    def Z2(self) -> np.ndarray:
        if self._Z is None:
            self._build()
        return self._Z[1]

    def coef_names(self) -> tuple[list[str], list[str]]:
        return (list(self.names1) + [f"{n}_bar" for n in self.names_bar1],
                list(self.names2) + [f"{n}_bar" for n in self.names_bar2])

    def subset(self, idx) -> "PanelData":
        """Panel restricted to the individuals in ``idx``."""
        idx = np.asarray(idx)
        return PanelData(self.y1[idx], self.y2[idx], self.X1[idx], self.X2[idx],
                         self.xbar1[idx], self.xbar2[idx], list(self.names1),
                         list(self.names2), list(self.names_bar1), list(self.names_bar2))

    def equals(self, other: "PanelData") -> bool:
        """Bitwise equality of all arrays."""
        return all(np.array_equal(getattr(self, a), getattr(other, a))
                   for a in ("y1", "y2", "X1", "X2", "xbar1", "xbar2"))


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    d1: int
    d2: int
    m1: int = 0
    m2: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))

    @classmethod
    def for_data(cls, family, data: PanelData) -> "ModelSpec":
        return cls(Family.parse(family), data.d1, data.d2, data.m1, data.m2)

    @property
    def k1(self) -> int:
        return self.d1 + self.m1

    @property
    def k2(self) -> int:
        return self.d2 + self.m2

    @property
    def n_beta(self) -> int:
        return self.k1 + self.k2


def sigma_alpha_matrix(tau1_sq: float, tau2_sq: float, rho_alpha: float) -> np.ndarray:
    c = rho_alpha * math.sqrt(tau1_sq * tau2_sq)
    return np.array([[tau1_sq, c], [c, tau2_sq]])


@dataclass
class Theta:
    """Full parameter vector of a bivariate panel model."""

    beta1: np.ndarray
    beta2: np.ndarray
    dep: float
    tau1_sq: float = 1.0
    tau2_sq: float = 1.0
    rho_alpha: float = 0.0

    def __post_init__(self):
        self.beta1 = np.asarray(self.beta1, dtype=float).ravel()
        self.beta2 = np.asarray(self.beta2, dtype=float).ravel()
        self.dep = float(self.dep)
        self.tau1_sq = float(self.tau1_sq)
        self.tau2_sq = float(self.tau2_sq)
        self.rho_alpha = float(self.rho_alpha)

    @classmethod
    def initial(cls, spec: ModelSpec) -> "Theta":
        return cls(np.zeros(spec.k1), np.zeros(spec.k2), spec.family.default_dep(), 1.0, 1.0, 0.0)

    @property
    def sigma_alpha(self) -> np.ndarray:
        return sigma_alpha_matrix(self.tau1_sq, self.tau2_sq, self.rho_alpha)

    @property
    def beta(self) -> np.ndarray:
        return np.concatenate([self.beta1, self.beta2])

    def with_beta(self, beta) -> "Theta":
        beta = np.asarray(beta, dtype=float)
        k1 = self.beta1.size
        return replace(self, beta1=beta[:k1].copy(), beta2=beta[k1:].copy())

    def with_sigma_alpha(self, S) -> "Theta":
        S = np.asarray(S, dtype=float)
        t1, t2 = float(S[0, 0]), float(S[1, 1])
        r = float(S[0, 1] / math.sqrt(t1 * t2))
        return replace(self, tau1_sq=t1, tau2_sq=t2, rho_alpha=r)

    def copy(self) -> "Theta":
        return replace(self, beta1=self.beta1.copy(), beta2=self.beta2.copy())

    def is_valid(self, family: Family) -> bool:
        ok = (Family.parse(family).dep_in_domain(self.dep)
              and self.tau1_sq > 0 and self.tau2_sq > 0 and -1 < self.rho_alpha < 1
              and np.all(np.isfinite(self.beta1)) and np.all(np.isfinite(self.beta2)))
        return bool(ok)

    # flat representations -------------------------------------------------
    def to_array(self) -> np.ndarray:
        """Constrained values in draw-file order."""
        return np.concatenate([self.beta1, self.beta2,
                               [self.dep, self.tau1_sq, self.tau2_sq, self.rho_alpha]])

    @classmethod
    def from_array(cls, arr, k1: int) -> "Theta":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[:k1], arr[k1:-4], arr[-4], arr[-3], arr[-2], arr[-1])

    def to_unconstrained(self, family: Family) -> np.ndarray:
        family = Family.parse(family)
        return np.concatenate([self.beta1, self.beta2, [
            family.dep_to_unconstrained(self.dep), math.log(self.tau1_sq),
            math.log(self.tau2_sq), math.atanh(self.rho_alpha)]])

    @classmethod
    def from_unconstrained(cls, vec, k1: int, family: Family) -> "Theta":
        family = Family.parse(family)
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:k1], vec[k1:-4], family.dep_from_unconstrained(vec[-4]),
                   math.exp(vec[-3]), math.exp(vec[-2]), math.tanh(vec[-1]))


def param_names(spec: ModelSpec, data: PanelData | None = None) -> list[str]:
    """Column labels for :meth:`Theta.to_array`."""
    if data is not None:
        n1, n2 = data.coef_names()
    else:
        n1 = [f"v{j}" for j in range(spec.k1)]
        n2 = [f"v{j}" for j in range(spec.k2)]
    return ([f"beta1[{n}]" for n in n1] + [f"beta2[{n}]" for n in n2]
            + [spec.family.dep_name, "tau1_sq", "tau2_sq", "rho_alpha"])


@dataclass
class RandomEffects:
    """Per-individual random effects, shape (P, 2)."""

    alpha: np.ndarray

    def __post_init__(self):
        self.alpha = np.ascontiguousarray(self.alpha, dtype=float)
        if self.alpha.ndim != 2 or self.alpha.shape[1] != 2:
            raise ValueError("alpha must have shape (P, 2)")
        if not np.all(np.isfinite(self.alpha)):
            raise ValueError("random effects must be finite")

    @property
    def P(self) -> int:
        return self.alpha.shape[0]
