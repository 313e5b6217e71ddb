"""Inference engine for a partially observed SIRS epidemic chain.

The hidden dynamics are a continuous-time Markov chain over susceptible and
infected counts with daily-varying environmental forcing; observations are
binomially thinned infected counts. The package simulates the chain exactly
or by tau-leaping, estimates the likelihood with a bootstrap particle filter,
samples the posterior by particle-marginal Metropolis-Hastings, and turns
posterior draws into forecasts and diagnostics. A quasi-Poisson regression
baseline is included for comparison.

Simulation kernels come in two interchangeable builds: a compiled Cython core
and a pure-Python twin that consumes identical random streams. See
``hiddensirs.simulate.BACKEND`` for which one is active.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("hiddensirs")
except PackageNotFoundError:
    __version__ = "0.0.0+uninstalled"

from .errors import ConfigError, DataError, HiddenSirsError, NumericalError
from .forcing import DailyForcing, ForcingDesign, constant_design, sinusoid_design
from .model import (
    HiddenState,
    ModelParams,
    PriorSpec,
    TransformedParams,
    from_transformed,
    hazard_rates,
    log_prior,
    reproduction_ratio,
    to_transformed,
)
from .observe import Observation, emission_log_pmf, sample_initial_state, sample_observation
from .rng import Streams
from .baseline import BaselineModel, fit_quasi_poisson, predict_quasi_poisson
from .covariates import (
    CovariateSeries,
    build_forcing,
    covariate_design,
    prepare_covariate,
    smooth_covariate,
)
from .pmmh import (
    ChainSchedule,
    PhaseReport,
    PipelineResult,
    PosteriorDraw,
    ProposalSpec,
    SmcLikelihood,
    effective_sample_size,
    mh_step,
    run_chain,
    run_pipeline,
)
from .smc import (
    FilterResult,
    ParticleSystem,
    resample_multinomial,
    resample_systematic,
    run_filter,
)
from .forecast import (
    Decomposition,
    PredictionRun,
    ResidualSeries,
    posterior_predict,
    standardized_residuals,
    transmission_decomposition,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DataError",
    "HiddenSirsError",
    "NumericalError",
    "DailyForcing",
    "ForcingDesign",
    "constant_design",
    "sinusoid_design",
    "HiddenState",
    "ModelParams",
    "PriorSpec",
    "TransformedParams",
    "from_transformed",
    "hazard_rates",
    "log_prior",
    "reproduction_ratio",
    "to_transformed",
    "Observation",
    "emission_log_pmf",
    "sample_initial_state",
    "sample_observation",
    "Streams",
    "BaselineModel",
    "fit_quasi_poisson",
    "predict_quasi_poisson",
    "CovariateSeries",
    "build_forcing",
    "covariate_design",
    "prepare_covariate",
    "smooth_covariate",
    "ChainSchedule",
    "PhaseReport",
    "PipelineResult",
    "PosteriorDraw",
    "ProposalSpec",
    "SmcLikelihood",
    "effective_sample_size",
    "mh_step",
    "run_chain",
    "run_pipeline",
    "FilterResult",
    "ParticleSystem",
    "resample_multinomial",
    "resample_systematic",
    "run_filter",
    "Decomposition",
    "PredictionRun",
    "ResidualSeries",
    "posterior_predict",
    "standardized_residuals",
    "transmission_decomposition",
]
