"""Exponential decay-rate fitting.

A series (t, y) with y > 0 is fitted by log y ≈ log_constant + rate·t with
least squares on a time window.  Series that sit entirely at the value floor
(exact equilibria, unperturbed shocks) are reported as "at floor" instead of
being fitted.
"""

from __future__ import annotations

import logging
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from shockfit.constants import FIT_MIN_SAMPLES, VALUE_FLOOR

logger = logging.getLogger(__name__)


class FitError(ValueError):
    """Raised when a series cannot be fitted on the requested window."""


class FitResult:
    """Fitted rate with the window and residual it was obtained on."""

    def __init__(
        self,
        rate: float,
        log_constant: float,
        residual: float,
        window: Tuple[float, float],
        n_samples: int,
        at_floor: bool = False,
    ) -> None:
        self.rate = rate
        self.log_constant = log_constant
        self.residual = residual
        self.window = window
        self.n_samples = n_samples
        self.at_floor = at_floor

    @classmethod
    def floor(cls, window: Tuple[float, float], n_samples: int) -> "FitResult":
        return cls(float("-inf"), float("-inf"), 0.0, window, n_samples, at_floor=True)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "rate": self.rate,
            "log_constant": self.log_constant,
            "residual": self.residual,
            "window_lo": self.window[0],
            "window_hi": self.window[1],
            "n_samples": self.n_samples,
            "at_floor": self.at_floor,
        }

    def __repr__(self) -> str:
        if self.at_floor:
            return "FitResult(at floor, window={})".format(self.window)
        return "FitResult(rate={:.6g}, residual={:.3g}, window={})".format(
            self.rate, self.residual, self.window,
        )


def default_window(t_final: float) -> Tuple[float, float]:
    """[T/4, 3T/4]: past the transient, before the floor."""
    return 0.25 * t_final, 0.75 * t_final


def _window_mask(t: np.ndarray, window: Tuple[float, float]) -> np.ndarray:
    lo, hi = window
    eps = 1e-12 * max(1.0, abs(hi))
    return (t >= lo - eps) & (t <= hi + eps)


def fit_decay_rate(
    times: Sequence[float],
    values: Sequence[float],
    window: Optional[Tuple[float, float]] = None,
) -> Tuple[float, float, float]:
    """Least-squares line through (t, log y) on window.

    Returns (rate, log_constant, residual) with residual the RMS of the
    log-deviations.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape:
        raise FitError("times and values differ in length")
    if window is None:
        window = (float(t[0]), float(t[-1])) if t.size else (0.0, 0.0)
    mask = _window_mask(t, window)
    if int(mask.sum()) < FIT_MIN_SAMPLES:
        raise FitError("need at least {} samples in window {}, got {}".format(
            FIT_MIN_SAMPLES, window, int(mask.sum()),
        ))
    tw, yw = t[mask], y[mask]
    if not np.all(np.isfinite(yw)) or np.any(yw <= 0.0):
        raise FitError("non-positive or non-finite values in window {}".format(window))
    logs = np.log(yw)
    rate, log_constant = np.polyfit(tw, logs, 1)
    residual = float(np.sqrt(np.mean((logs - (log_constant + rate * tw)) ** 2)))
    return float(rate), float(log_constant), residual


def fit_series(
    times: Sequence[float],
    values: Sequence[float],
    window: Tuple[float, float],
    floor: float = VALUE_FLOOR,
) -> FitResult:
    """fit_decay_rate with floor handling.

    A window whose values are all at or below the floor is reported at
    floor; a window that reaches the floor part way is fitted up to the
    first floored sample.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    mask = _window_mask(t, window)
    n = int(mask.sum())
    if n and np.all(y[mask] <= floor):
        return FitResult.floor(window, n)
    below = np.nonzero(mask & (y <= floor))[0]
    if below.size:
        first = int(below[0])
        logger.info("Series reaches the floor at t=%.6g; fit window shortened", t[first])
        mask = mask & (np.arange(t.size) < first)
        n = int(mask.sum())
        if n < FIT_MIN_SAMPLES:
            raise FitError("only {} samples above the floor in window {}".format(n, window))
        window = (window[0], float(t[mask][-1]))
    rate, log_constant, residual = fit_decay_rate(t[mask], y[mask])
    return FitResult(rate, log_constant, residual, window, n)
