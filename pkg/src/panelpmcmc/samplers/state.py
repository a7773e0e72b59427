"""Markov chain state shared by the panel samplers."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..models.data import Theta


@dataclass
class SamplerState:
    """Current position of one chain.

    ``alpha_ref`` holds the selected random effects (the particle picked by
    ``k`` in the particle samplers, the current value in the others).
    """

    theta: Theta
    alpha_ref: np.ndarray
    k: np.ndarray | None = None
    iteration: int = 0
    rw_log_scale: float = float(np.log(0.1))
    accept_counts: dict = field(default_factory=dict)
    try_counts: dict = field(default_factory=dict)
    loglik_hat: float | None = None
    latent: np.ndarray | None = None
    errors: list = field(default_factory=list)

    def record(self, block: str, accepted: bool, tries: int = 1):
        self.accept_counts[block] = self.accept_counts.get(block, 0) + int(accepted)
        self.try_counts[block] = self.try_counts.get(block, 0) + tries

    def accept_rates(self) -> dict:
        return {b: self.accept_counts.get(b, 0) / n for b, n in self.try_counts.items() if n}

    def copy(self) -> "SamplerState":
        new = copy.copy(self)
        new.theta = self.theta.copy()
        new.alpha_ref = np.array(self.alpha_ref, copy=True)
        new.k = None if self.k is None else np.array(self.k, copy=True)
        new.accept_counts = dict(self.accept_counts)
        new.try_counts = dict(self.try_counts)
        new.latent = None if self.latent is None else np.array(self.latent, copy=True)
        new.errors = list(self.errors)
        return new
