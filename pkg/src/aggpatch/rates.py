"""Exponential rate fits for monitor time series."""
from __future__ import annotations

import numpy as np

__all__ = ["fit_exponential_rate", "successive_ratios"]


def fit_exponential_rate(t, y, t_min: float | None = None, t_max: float | None = None,
                         min_points: int = 3) -> float:
    """Least-squares slope of ``log y`` against ``t``.

    Nonpositive samples are dropped; fewer than ``min_points`` usable samples
    raise ``ValueError``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(y) & (y > 0)
    if t_min is not None:
        keep &= t >= t_min - 1e-12
    if t_max is not None:
        keep &= t <= t_max + 1e-12
    if keep.sum() < min_points:
        raise ValueError(f"need at least {min_points} positive samples, got {int(keep.sum())}")
    slope_, _ = np.polyfit(t[keep], np.log(y[keep]), 1)
    return float(slope_)


def successive_ratios(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return y[1:] / y[:-1]
