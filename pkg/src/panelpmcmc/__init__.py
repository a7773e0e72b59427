"""Particle MCMC for bivariate panel models with correlated random effects."""

import os as _os

# The TBB layer shipped in some environments is too old for numba and only
# produces a warning; the work-queue layer is always available.
_os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numba as _numba  # noqa: E402

_numba.config.THREADING_LAYER = _os.environ["NUMBA_THREADING_LAYER"]

__version__ = "0.1.0"
