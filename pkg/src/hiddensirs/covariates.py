"""Environmental covariate preparation.

Raw field samples (several measurements per visit, several water bodies) are
pooled, smoothed with a least-squares cubic B-spline, evaluated at integer
days, and standardized. The hazard on day i reads the covariate at day
i - lag, so a series prepared for a window is smoothed and standardized over
the lag-shifted day range; that convention makes a run with lagged covariates
identical to one with pre-shifted covariates and no lag.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import make_lsq_spline

from .errors import ConfigError, DataError
from .forcing import DailyForcing, ForcingDesign

__all__ = [
    "CovariateSeries",
    "smooth_covariate",
    "prepare_covariate",
    "covariate_design",
    "build_forcing",
]


@dataclass(frozen=True)
class CovariateSeries:
    """One covariate, smoothed and standardized for a modeling window.

    smoothed_daily[j] is the spline value at day start_day + j, where
    start_day = window start - lag_days; standardized_daily subtracts the
    mean and divides by the (population) standard deviation of exactly those
    days, the ones the window's forcing reads.
    """

    name: str
    sample_days: np.ndarray
    sample_values: np.ndarray
    start_day: int
    smoothed_daily: np.ndarray
    standardized_daily: np.ndarray
    lag_days: int
    window: tuple

    def standardized_at(self, days) -> np.ndarray:
        days = np.atleast_1d(np.asarray(days))
        idx = days - self.start_day
        bad = (idx < 0) | (idx >= self.standardized_daily.size)
        if np.any(bad):
            first = int(days[bad][0])
            raise DataError(
                f"covariate {self.name!r} has no smoothed value for day {first}; it covers "
                f"days [{self.start_day}, {self.start_day + self.standardized_daily.size})")
        return self.standardized_daily[idx.astype(int)]


def smooth_covariate(days, values, day_start: int, day_end: int,
                     knot_spacing_days: float = 30.0) -> np.ndarray:
    """Least-squares cubic B-spline through pooled samples, at integer days.

    Interior knots sit every knot_spacing_days across the sample span. When
    the samples cannot support that many basis functions (or the knots leave
    an empty span), the spacing is doubled until the fit succeeds, bottoming
    out at a single cubic; each widening is reported with a warning.
    """
    days = np.asarray(days, dtype=float)
    values = np.asarray(values, dtype=float)
    if days.shape != values.shape or days.ndim != 1:
        raise ValueError("days and values must be 1-d arrays of equal length")
    if days.size < 4:
        raise DataError(f"need at least 4 covariate samples to smooth, got {days.size}")
    if not (np.all(np.isfinite(days)) and np.all(np.isfinite(values))):
        raise DataError("covariate samples contain non-finite entries")
    if day_end <= day_start:
        raise ValueError(f"empty day range [{day_start}, {day_end})")
    if days.min() > day_start:
        raise DataError(
            f"covariate samples start at day {days.min():g} but day {day_start} is needed")
    if days.max() < day_end - 1:
        raise DataError(
            f"covariate samples end at day {days.max():g} but day {day_end - 1} is needed")

    order = np.argsort(days, kind="stable")
    x, y = days[order], values[order]
    spacing = float(knot_spacing_days)
    while True:
        interior = np.arange(x[0] + spacing, x[-1], spacing)
        if 4 + interior.size <= x.size:
            knots = np.concatenate([[x[0]] * 4, interior, [x[-1]] * 4])
            try:
                spline = make_lsq_spline(x, y, knots, k=3)
                break
            except (ValueError, np.linalg.LinAlgError):
                if interior.size == 0:
                    raise DataError(
                        f"cannot fit a cubic to the {x.size} samples of this covariate; "
                        "are they concentrated on too few distinct days?")
        elif interior.size == 0:
            raise DataError(
                f"cannot fit a cubic to the {x.size} samples of this covariate")
        spacing *= 2.0
    if spacing != knot_spacing_days:
        warnings.warn(
            f"knot spacing widened from {knot_spacing_days:g} to {spacing:g} days "
            f"to fit {x.size} samples")
    return spline(np.arange(day_start, day_end, dtype=float))


def prepare_covariate(name, days, values, window, lag_days: int,
                      knot_spacing_days: float = 30.0, stats_window=None) -> CovariateSeries:
    """Smooth and standardize one covariate for a modeling window.

    window is (start_day, end_day); the series is evaluated over the lagged
    range [start - lag, end - lag), which is everything the window's forcing
    will look up. stats_window restricts the standardization statistics to a
    sub-window's lagged days; a prediction window extended past a fit reuses
    the fit's statistics this way, so the fitted coefficients keep their
    meaning. It defaults to the whole window.
    """
    wstart, wend = int(window[0]), int(window[1])
    if wend <= wstart:
        raise ValueError(f"window [{wstart}, {wend}) is empty")
    if lag_days < 0:
        raise ValueError(f"lag_days must be nonnegative, got {lag_days}")
    days = np.asarray(days, dtype=float)
    values = np.asarray(values, dtype=float)
    eval_start, eval_end = wstart - int(lag_days), wend - int(lag_days)
    if days.size and days.min() > eval_start:
        raise DataError(
            f"covariate {name!r}: samples start at day {days.min():g} but day {eval_start} "
            f"is needed ({lag_days}-day lag before the window starting at day {wstart})")
    smoothed = smooth_covariate(days, values, eval_start, eval_end, knot_spacing_days)
    if stats_window is None:
        stats = smoothed
    else:
        s0, s1 = int(stats_window[0]), int(stats_window[1])
        if s0 < wstart or s1 > wend or s1 <= s0:
            raise ValueError(
                f"stats_window [{s0}, {s1}) must be a nonempty sub-range of the "
                f"window [{wstart}, {wend})")
        stats = smoothed[s0 - wstart:s1 - wstart]
    sd = stats.std()
    if sd <= 1e-9 * max(1.0, abs(stats.mean())):
        raise DataError(f"covariate {name!r} is constant after smoothing; cannot standardize")
    standardized = (smoothed - stats.mean()) / sd
    return CovariateSeries(
        name=str(name), sample_days=days, sample_values=values,
        start_day=eval_start, smoothed_daily=smoothed, standardized_daily=standardized,
        lag_days=int(lag_days), window=(wstart, wend))


def covariate_design(covs) -> ForcingDesign:
    """Stack prepared covariates into the log-linear forcing design.

    All series must share one window and lag. Column j of the result holds
    covariate j's standardized value for each window day's lagged lookup, so
    the design's coefficients are (intercept, one slope per covariate).
    """
    if len(covs) == 0:
        raise ValueError("need at least one covariate series")
    window, lag = covs[0].window, covs[0].lag_days
    for c in covs[1:]:
        if c.window != window or c.lag_days != lag:
            raise ConfigError(
                f"covariates {covs[0].name!r} and {c.name!r} were prepared for different "
                f"windows or lags: {window}/{lag} vs {c.window}/{c.lag_days}")
    columns = np.column_stack([c.standardized_daily for c in covs])
    return ForcingDesign(start_day=window[0], columns=columns, lag_days=lag)


def build_forcing(covs, alpha_coeffs) -> DailyForcing:
    """Daily hazard from prepared covariates and log-linear coefficients."""
    return covariate_design(covs).build(alpha_coeffs)
