"""Daily environmental forcing.

alpha(t) is piecewise constant on calendar days: day d covers [d, d+1). A
DailyForcing is the realized step function; a ForcingDesign is its log-linear
recipe (per-day covariate row plus coefficients), so the same design can be
re-evaluated every time the sampler proposes new coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = ["DailyForcing", "ForcingDesign", "sinusoid_design", "constant_design"]


@dataclass(frozen=True)
class DailyForcing:
    """Step function: values[j] is alpha on [start_day + j, start_day + j + 1)."""

    start_day: int
    values: np.ndarray
    lag_days: int = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        if values.ndim != 1 or values.size == 0:
            raise ValueError("forcing needs a 1-d, nonempty value vector")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("forcing values must be finite and nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "start_day", int(self.start_day))

    @property
    def end_day(self) -> int:
        """First day past coverage."""
        return self.start_day + self.values.size

    def alpha_at(self, t: float) -> float:
        day = math.floor(t)
        idx = day - self.start_day
        if idx < 0 or idx >= self.values.size:
            self._raise_gap(day)
        return float(self.values[idx])

    def require_cover(self, t_from: float, t_to: float) -> None:
        """Fail unless every day touched by [t_from, t_to) has a value."""
        if t_to < t_from:
            raise ValueError(f"empty interval [{t_from}, {t_to})")
        first = math.floor(t_from)
        last = math.ceil(t_to) - 1 if t_to > t_from else first
        if first < self.start_day:
            self._raise_gap(first)
        if last >= self.end_day:
            self._raise_gap(self.end_day)

    def _raise_gap(self, day):
        msg = f"no forcing value for day {day}; coverage is [{self.start_day}, {self.end_day})"
        if self.lag_days is not None:
            msg += f" (covariates lagged {self.lag_days} days limit how far forcing extends)"
        raise DataError(msg)


@dataclass(frozen=True)
class ForcingDesign:
    """Log-linear forcing recipe: alpha(day) = exp(c0 + columns[day] . c[1:]).

    columns has one row per day starting at start_day and one column per
    covariate; a zero-column design gives constant forcing exp(c0).
    """

    start_day: int
    columns: np.ndarray
    lag_days: int = None

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 2:
            raise ValueError("design columns must be 2-d (n_days, n_covariates)")
        if cols.shape[0] == 0:
            raise ValueError("design must cover at least one day")
        if not np.all(np.isfinite(cols)):
            raise ValueError("design columns must be finite")
        cols = cols.copy()
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "start_day", int(self.start_day))

    @property
    def n_days(self) -> int:
        return self.columns.shape[0]

    @property
    def n_coeffs(self) -> int:
        return self.columns.shape[1] + 1

    @property
    def end_day(self) -> int:
        return self.start_day + self.n_days

    def build(self, coeffs) -> DailyForcing:
        """Evaluate the recipe at coefficient values (intercept first)."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_coeffs,):
            raise ValueError(f"expected {self.n_coeffs} coefficients, got shape {coeffs.shape}")
        log_alpha = coeffs[0] + self.columns @ coeffs[1:]
        with np.errstate(over="ignore"):
            values = np.exp(log_alpha)
        if not np.all(np.isfinite(values)):
            raise ValueError("forcing overflowed at these coefficients")
        return DailyForcing(start_day=self.start_day, values=values, lag_days=self.lag_days)


def sinusoid_design(start_day: int, n_days: int, period_days: float = 365.0) -> ForcingDesign:
    """Annual-cycle design: single covariate sin(2 pi day / period)."""
    days = np.arange(start_day, start_day + n_days)
    col = np.sin(2.0 * np.pi * days / period_days)
    return ForcingDesign(start_day=start_day, columns=col[:, None])


def constant_design(start_day: int, n_days: int) -> ForcingDesign:
    """Intercept-only design: alpha is exp(c0) on every day."""
    return ForcingDesign(start_day=start_day, columns=np.zeros((n_days, 0)))
