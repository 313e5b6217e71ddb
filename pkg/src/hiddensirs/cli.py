"""Command-line pipelines: simulate, fit, predict, diagnose, baseline.

Each pipeline loads one config, seeds every random stream from it, writes its
output files plus a manifest into the output directory, and exits 0. Config
problems exit 2, data problems 3, numerical failures 4. The manifest is a
loadable config, so `--config manifest.ini` reruns a pipeline byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import warnings

import numpy as np

from . import __version__
from .config import RunConfig, load_config, write_manifest
from .covariates import covariate_design, prepare_covariate
from .errors import ConfigError, DataError, NumericalError
from .fileio import (
    read_cases,
    read_covariates,
    read_posterior,
    read_trajectories,
    write_baseline,
    write_cases,
    write_decomposition,
    write_ess,
    write_hidden_quantiles,
    write_posterior,
    write_predictions,
    write_residuals,
    write_trajectories,
)
from .forcing import ForcingDesign, sinusoid_design
from .baseline import fit_quasi_poisson, predict_quasi_poisson
from .forecast import posterior_predict, standardized_residuals, transmission_decomposition
from .model import (
    ModelParams,
    TransformedParams,
    component_names,
    from_transformed,
    to_transformed,
)
from .observe import sample_initial_state, sample_observation
from .pmmh import effective_sample_size, run_pipeline
from .rng import Streams
from .simulate import simulate_path


def _build_design(config: RunConfig, covariates_path=None, window=None,
                  stats_window=None) -> ForcingDesign:
    """The forcing recipe for a window, from either forcing mode."""
    wstart, wend = window if window is not None else config.window
    if config.forcing_mode == "sinusoid":
        return sinusoid_design(wstart, wend - wstart, period_days=config.period_days)
    path = covariates_path or config.covariate_file
    if path is None:
        raise ConfigError(
            "covariates mode needs a covariate file: set [forcing] covariate_file "
            "or pass --covariates")
    samples = read_covariates(path)
    series = []
    for name in config.covariate_names:
        if name not in samples:
            raise DataError(f"{path}: no samples for covariate {name!r} "
                            f"(found: {', '.join(sorted(samples))})")
        days, values, _ = samples[name]
        series.append(prepare_covariate(
            name, days, values, window=(wstart, wend), lag_days=config.lag_days,
            knot_spacing_days=config.knot_spacing_days, stats_window=stats_window))
    return covariate_design(series)


def _obs_times(config: RunConfig):
    wstart, wend = config.window
    return [float(t) for t in range(wstart, wend, config.obs_interval_days)]


def _out(config: RunConfig, name: str) -> str:
    os.makedirs(config.out_dir, exist_ok=True)
    return os.path.join(config.out_dir, name)


def cmd_simulate(args) -> None:
    config = load_config(args.config, seed=args.seed, out_dir=args.out_dir)
    design = _build_design(config, args.covariates)
    forcing = design.build(config.model.alpha_coeffs)
    times = _obs_times(config)
    gen = Streams(config.seed).child(0).generator()
    params = config.model
    state = sample_initial_state(params.phi_s, params.phi_i, params.n_pop, gen)
    obs = [(times[0], sample_observation(state.i, params.rho, gen))]
    hidden = [(times[0], state.s, state.i)]
    if len(times) > 1:
        path = simulate_path(state, times[0], np.asarray(times[1:]), forcing,
                             params, config.sim, gen)
        for t, (s, i) in zip(times[1:], path):
            obs.append((t, sample_observation(i, params.rho, gen)))
            hidden.append((t, int(s), int(i)))
    write_cases(_out(config, "cases.csv"), obs)
    with open(_out(config, "hidden_states.csv"), "w") as fh:
        fh.write("day,s,i\n")
        for t, s, i in hidden:
            fh.write(f"{t!r},{s},{i}\n")
    write_manifest(config, __version__, _out(config, "manifest.ini"))
    print(f"wrote {len(obs)} observations to {config.out_dir}")


def cmd_fit(args) -> None:
    config = load_config(args.config, seed=args.seed, out_dir=args.out_dir)
    obs = read_cases(args.data)
    design = _build_design(config, args.covariates)
    init = to_transformed(config.model)
    result = run_pipeline(
        obs, design, config.model.n_pop, config.prior, config.schedule, init,
        Streams(config.seed), sim=config.sim, resampling=config.resampling,
        threads=args.threads)
    write_posterior(_out(config, "posterior.csv"), result.draws)
    write_trajectories(_out(config, "trajectories.csv"), result.draws,
                       [t for t, _ in obs])
    write_manifest(config, __version__, _out(config, "manifest.ini"))
    rates = ", ".join(f"{r.name} {r.acceptance_rate:.2f}" for r in result.reports)
    print(f"kept {len(result.draws)} draws (acceptance: {rates}) in {config.out_dir}")


def _median_params(draws, n_pop: int) -> ModelParams:
    matrix = np.array([d.theta.values for d in draws])
    med = TransformedParams(values=np.median(matrix, axis=0), n_alpha=draws[0].theta.n_alpha)
    return from_transformed(med, n_pop)


def cmd_predict(args) -> None:
    config = load_config(args.config, seed=args.seed, out_dir=args.out_dir)
    draws = read_posterior(args.posterior, config.model.n_pop)
    data = read_cases(args.data)
    t_fit = float(data[-1][0])
    cutoffs = sorted(float(c) for c in args.cutoff_day) or [t_fit]
    root = Streams(config.seed)
    for cutoff in cutoffs:
        if cutoff < t_fit:
            raise ConfigError(
                f"cutoff day {cutoff:g} precedes the fitted data's last day {t_fit:g}")
        t_end = cutoff + config.horizon_days
        # reporting continues on the data's cadence, anchored at its last day
        future = [t_fit + j * config.obs_interval_days
                  for j in range(1, int((t_end - t_fit) / config.obs_interval_days) + 1)]
        future = [t for t in future if cutoff < t <= t_end]
        design = _build_design(config, args.covariates,
                               window=(config.window[0], int(np.ceil(t_end)) + 1),
                               stats_window=None if config.forcing_mode == "sinusoid"
                               else config.window)
        run = posterior_predict(draws, design, (t_fit, t_end), future, config.sim,
                                root.child(int(round(cutoff))))
        tag = f"{int(cutoff)}" if float(cutoff).is_integer() else f"{cutoff:g}"
        write_predictions(_out(config, f"predictions_cutoff{tag}.csv"), run)
        write_hidden_quantiles(_out(config, f"hidden_cutoff{tag}.csv"), run,
                               day_from=cutoff)
    write_manifest(config, __version__, _out(config, "manifest.ini"))
    print(f"wrote predictions for {len(cutoffs)} cutoff(s) in {config.out_dir}")


def cmd_diagnose(args) -> None:
    config = load_config(args.config, seed=args.seed, out_dir=args.out_dir)
    draws = read_posterior(args.posterior, config.model.n_pop)
    data = read_cases(args.data)
    root = Streams(config.seed)

    names = component_names(draws[0].theta.n_alpha)
    matrix = np.array([d.theta.values for d in draws])
    ess = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # fixed components are constant series
        for j in range(matrix.shape[1]):
            ess.append(effective_sample_size(matrix[:, j]))
    write_ess(_out(config, "ess.csv"), names, ess)

    medians = _median_params(draws, config.model.n_pop)
    design = _build_design(config, args.covariates)
    forcing = design.build(medians.alpha_coeffs)
    residuals = standardized_residuals(
        data, medians, forcing, config.sim, root.child(0),
        n_sims=config.residual_sims)
    write_residuals(_out(config, "residuals.csv"), residuals)

    traj_path = os.path.join(os.path.dirname(os.path.abspath(args.posterior)),
                             "trajectories.csv")
    if not os.path.exists(traj_path):
        raise DataError(
            f"no trajectories.csv beside {args.posterior}; the decomposition needs "
            "the sampled hidden paths a fit writes")
    times, states = read_trajectories(traj_path)
    if states.shape[0] != len(draws):
        raise DataError(
            f"{traj_path} holds {states.shape[0]} trajectories for {len(draws)} draws")
    full = [dataclasses.replace(d, trajectory=states[j]) for j, d in enumerate(draws)]
    dec = transmission_decomposition(full, design, times, root.child(1))
    write_decomposition(_out(config, "decomposition.csv"), dec)
    write_manifest(config, __version__, _out(config, "manifest.ini"))
    print(f"wrote ess.csv, residuals.csv, decomposition.csv in {config.out_dir}")


def cmd_baseline(args) -> None:
    config = load_config(args.config, seed=args.seed, out_dir=args.out_dir)
    data = read_cases(args.data)
    design = _build_design(config, args.covariates)
    days = np.array([t for t, _ in data])
    counts = np.array([float(y) for _, y in data])
    rows = (days - design.start_day).astype(int)
    if np.any(rows < 0) or np.any(rows >= design.columns.shape[0]):
        bad = days[(rows < 0) | (rows >= design.columns.shape[0])][0]
        raise DataError(f"observation day {bad:g} lies outside the forcing window "
                        f"[{design.start_day}, {design.end_day})")
    X = np.column_stack([np.ones(days.size), design.columns[rows]])
    model = fit_quasi_poisson(counts, X)
    mean, lower, upper = predict_quasi_poisson(model, X)
    terms = ["intercept"] + (list(config.covariate_names)
                             if config.forcing_mode == "covariates"
                             else [f"col_{j}" for j in range(1, X.shape[1])])
    write_baseline(_out(config, "baseline_model.csv"),
                   _out(config, "baseline_predictions.csv"),
                   model, terms, days, mean, lower, upper)
    write_manifest(config, __version__, _out(config, "manifest.ini"))
    print(f"baseline dispersion {model.dispersion:.3f}; wrote files in {config.out_dir}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hiddensirs",
        description="Hidden SIRS chain: simulate, fit, predict, diagnose, baseline.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, *, data=False, posterior=False, cutoff=False):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--covariates", default=None)
        if data:
            p.add_argument("--data", required=True)
        if posterior:
            p.add_argument("--posterior", required=True)
        if cutoff:
            p.add_argument("--cutoff-day", action="append", default=[])
        p.set_defaults(fn=fn)

    add("simulate", cmd_simulate)
    add("fit", cmd_fit, data=True)
    add("predict", cmd_predict, data=True, posterior=True, cutoff=True)
    add("diagnose", cmd_diagnose, data=True, posterior=True)
    add("baseline", cmd_baseline, data=True)
    args = parser.parse_args(argv)
    try:
        args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
