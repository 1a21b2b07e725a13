"""Mean-based comparators that ignore the within-study variances."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError
from .model import StudySummary, _as_arrays, mle_mu

__all__ = ["naive_pearson", "weighted_pearson", "delta_metric"]


def _pearson(dx: np.ndarray, dy: np.ndarray, w: np.ndarray) -> float:
    sxx = w @ (dx * dx)
    syy = w @ (dy * dy)
    if not (sxx > 0 and syy > 0):
        raise DegenerateInputError("study means have zero spread; correlation undefined")
    r = (w @ (dx * dy)) / (math.sqrt(sxx) * math.sqrt(syy))
    return float(min(1.0, max(-1.0, r)))


def _check_k(arr):
    if len(arr) < 2:
        raise DegenerateInputError("mean-based correlation needs at least two studies")


def naive_pearson(studies: Sequence[StudySummary]) -> float:
    """Unweighted Pearson correlation of the study means ``(x̄_i, ȳ_i)``."""
    arr = _as_arrays(studies)
    _check_k(arr)
    dx = arr.mean_x - arr.mean_x.mean()
    dy = arr.mean_y - arr.mean_y.mean()
    return _pearson(dx, dy, np.ones_like(dx))


def weighted_pearson(studies: Sequence[StudySummary]) -> float:
    """Pearson correlation of the study means with weights ``n_i``.

    Centred at the sample-size weighted means.
    """
    arr = _as_arrays(studies)
    _check_k(arr)
    mu_x, mu_y = mle_mu(arr)
    return _pearson(arr.mean_x - mu_x, arr.mean_y - mu_y, arr.n)


def delta_metric(rho_hat: float, rho_tilde: float, rho_true: float) -> float:
    """``|ρ̂ - ρ₀| - |ρ̃ - ρ₀|``; negative when ``ρ̂`` is closer to the truth."""
    return abs(rho_hat - rho_true) - abs(rho_tilde - rho_true)
