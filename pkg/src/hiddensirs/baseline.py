"""Quasi-Poisson regression baseline.

A log-link Poisson fit whose standard errors are inflated by the Pearson
dispersion, giving the counts-vs-covariates comparison model that the
mechanistic fits are judged against. Fitting is plain iteratively reweighted
least squares; nothing here knows about the epidemic model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError

MAX_IRLS_ITERS = 100
COEF_RTOL = 1e-10

__all__ = ["BaselineModel", "fit_quasi_poisson", "predict_quasi_poisson"]


@dataclass(frozen=True)
class BaselineModel:
    """Converged quasi-Poisson fit.

    cov_unscaled is (X' W X)^-1 at the converged weights; multiply by
    dispersion for the usable coefficient covariance. dispersion is the
    Pearson chi-square over its degrees of freedom, and is NaN for a
    saturated fit (no residual degrees of freedom).
    """

    coef: np.ndarray
    cov_unscaled: np.ndarray
    dispersion: float
    fitted: np.ndarray
    pearson_chi2: float
    n_obs: int
    n_params: int
    n_iter: int

    @property
    def coef_se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov_unscaled) * self.dispersion)


def _validate(y, design):
    y = np.asarray(y, dtype=float)
    design = np.asarray(design, dtype=float)
    if y.ndim != 1:
        raise ValueError("y must be a 1-d array of counts")
    if design.ndim != 2 or design.shape[0] != y.size:
        raise ValueError(
            f"design must be 2-d with one row per observation; got {design.shape} "
            f"for {y.size} observations")
    if not np.all(np.isfinite(design)):
        raise DataError("design matrix contains non-finite entries")
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise DataError("counts must be finite and nonnegative")
    if y.size < design.shape[1]:
        raise DataError(
            f"{y.size} observations cannot support {design.shape[1]} coefficients")
    return y, design


def fit_quasi_poisson(y, design) -> BaselineModel:
    """Fit counts to a design matrix with a log link.

    Iterates reweighted least squares until every coefficient is stable to
    one part in 1e10, then estimates the dispersion from the Pearson
    residuals. The design must be full column rank and include its own
    intercept column if one is wanted.
    """
    y, design = _validate(y, design)
    n, p = design.shape
    if np.linalg.matrix_rank(design) < p:
        raise NumericalError(
            f"design matrix is rank deficient ({p} columns, rank "
            f"{np.linalg.matrix_rank(design)})")

    mu = y + 0.5
    eta = np.log(mu)
    coef = np.zeros(p)
    for it in range(1, MAX_IRLS_ITERS + 1):
        # working response and weights for the log link: W = mu
        z = eta + (y - mu) / mu
        sw = np.sqrt(mu)
        new_coef, *_ = np.linalg.lstsq(design * sw[:, None], z * sw, rcond=None)
        eta = design @ new_coef
        if np.max(eta) > 500.0:
            raise NumericalError("fitted means overflow; the fit is diverging")
        mu = np.exp(eta)
        if it > 1 and np.allclose(new_coef, coef, rtol=COEF_RTOL, atol=1e-14):
            coef = new_coef
            break
        coef = new_coef
    else:
        raise NumericalError(
            f"IRLS did not converge in {MAX_IRLS_ITERS} iterations")

    weighted = design * mu[:, None]
    cov_unscaled = np.linalg.inv(design.T @ weighted)
    pearson = float(np.sum((y - mu) ** 2 / mu))
    dispersion = pearson / (n - p) if n > p else float("nan")
    return BaselineModel(
        coef=coef, cov_unscaled=cov_unscaled, dispersion=dispersion,
        fitted=mu, pearson_chi2=pearson, n_obs=n, n_params=p, n_iter=it)


def predict_quasi_poisson(model: BaselineModel, design):
    """Mean curve with 95% intervals on new design rows.

    Returns (mean, lower, upper). The interval is the delta-method normal
    band on the linear predictor, widened by the square root of the
    dispersion, then exponentiated; the mean itself ignores dispersion.
    """
    design = np.asarray(design, dtype=float)
    if design.ndim != 2 or design.shape[1] != model.n_params:
        raise ValueError(
            f"design must have {model.n_params} columns, got shape {design.shape}")
    eta = design @ model.coef
    var_eta = np.einsum("ij,jk,ik->i", design, model.cov_unscaled, design)
    half = 1.96 * np.sqrt(var_eta * model.dispersion)
    return np.exp(eta), np.exp(eta - half), np.exp(eta + half)
