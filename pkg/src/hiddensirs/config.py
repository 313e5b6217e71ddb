"""Run configuration: sectioned key-value files in, resolved settings out.

One file drives every pipeline. The same format is written back as the run
manifest, so a manifest is itself a loadable config and reruns are exact.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import ModelParams, PriorSpec, component_names
from .pmmh import ChainSchedule
from .simulate import SimConfig

__all__ = ["RunConfig", "load_config", "write_manifest"]

_KNOWN_KEYS = {
    "run": {"seed", "out_dir", "obs_interval_days", "horizon_days", "residual_sims"},
    "model": {"n_pop", "beta", "gamma", "mu", "rho", "phi_s", "phi_i", "alpha"},
    "prior": None,  # validated against component names, which depend on alpha length
    "forcing": {"mode", "window_start", "window_end", "lag_days", "knot_spacing_days",
                "covariates", "covariate_file", "period_days"},
    "schedule": {"burn_in", "secondary", "final", "thin", "particles", "resampling"},
    "sim": {"method", "tau_days", "critical_size", "max_tau_halvings"},
    "provenance": None,  # manifests carry it; never read back
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline needs, with the raw key-values kept for the manifest."""

    seed: int
    out_dir: str
    obs_interval_days: int
    horizon_days: int
    residual_sims: int
    model: ModelParams
    prior: PriorSpec
    forcing_mode: str
    window: tuple
    lag_days: int
    knot_spacing_days: float
    covariate_names: tuple
    covariate_file: str
    period_days: float
    schedule: ChainSchedule
    resampling: str
    sim: SimConfig


def _fail(section, key, detail):
    raise ConfigError(f"[{section}] {key}: {detail}")


def _get(cp, section, key, parse, default=None, required=False):
    if not cp.has_option(section, key):
        if required:
            _fail(section, key, "missing required key")
        return default
    raw = cp.get(section, key).strip()
    try:
        return parse(raw)
    except (ValueError, TypeError) as exc:
        _fail(section, key, f"cannot parse {raw!r} ({exc})")


def _floats(raw):
    vals = [float(tok) for tok in raw.replace(",", " ").split()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _names(raw):
    return raw.replace(",", " ").split()


def load_config(path, *, seed=None, out_dir=None) -> RunConfig:
    """Parse a config file, applying any command-line overrides.

    seed and out_dir arguments take precedence over the file. Every error is
    a ConfigError naming the section and key.
    """
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}")

    for section in cp.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        known = _KNOWN_KEYS[section]
        if known is not None:
            stray = set(cp.options(section)) - known
            if stray:
                raise ConfigError(
                    f"unknown key(s) in [{section}]: {', '.join(sorted(stray))}")

    if seed is None:
        seed = _get(cp, "run", "seed", int, required=True)
    seed = int(seed)
    if not 0 <= seed < 2**64:
        _fail("run", "seed", f"must fit in 64 bits, got {seed}")
    if out_dir is None:
        out_dir = _get(cp, "run", "out_dir", str, default="out")
    obs_interval = _get(cp, "run", "obs_interval_days", int, default=14)
    horizon_days = _get(cp, "run", "horizon_days", int, default=28)
    residual_sims = _get(cp, "run", "residual_sims", int, default=5000)
    if obs_interval < 1:
        _fail("run", "obs_interval_days", "must be at least 1")
    if horizon_days < 0:
        _fail("run", "horizon_days", "must be nonnegative")

    alpha = _get(cp, "model", "alpha", _floats, required=True)
    try:
        model = ModelParams(
            beta=_get(cp, "model", "beta", float, required=True),
            gamma=_get(cp, "model", "gamma", float, required=True),
            mu=_get(cp, "model", "mu", float, required=True),
            rho=_get(cp, "model", "rho", float, required=True),
            alpha_coeffs=alpha,
            phi_s=_get(cp, "model", "phi_s", float, required=True),
            phi_i=_get(cp, "model", "phi_i", float, required=True),
            n_pop=_get(cp, "model", "n_pop", int, required=True),
        )
    except ValueError as exc:
        raise ConfigError(f"[model] {exc}")

    names = component_names(len(alpha))
    if cp.has_section("prior"):
        stray = set(cp.options("prior")) - set(names) - {"fixed"}
        if stray:
            raise ConfigError(f"unknown key(s) in [prior]: {', '.join(sorted(stray))}")
    means, sds = np.zeros(len(names)), np.ones(len(names))
    fixed = np.zeros(len(names), dtype=bool)
    fixed_names = _get(cp, "prior", "fixed", _names, default=[])
    for fname in fixed_names:
        if fname not in names:
            _fail("prior", "fixed", f"unknown component {fname!r}")
        fixed[names.index(fname)] = True
    for j, cname in enumerate(names):
        pair = _get(cp, "prior", cname, _floats)
        if pair is None:
            if not fixed[j]:
                _fail("prior", cname, "missing prior (mean sd) for a free component")
            continue
        if len(pair) != 2:
            _fail("prior", cname, f"expected 'mean sd', got {pair}")
        means[j], sds[j] = pair
    try:
        prior = PriorSpec(means=means, sds=sds, fixed_mask=fixed)
    except ValueError as exc:
        raise ConfigError(f"[prior] {exc}")

    mode = _get(cp, "forcing", "mode", str, required=True)
    if mode not in ("sinusoid", "covariates"):
        _fail("forcing", "mode", f"must be 'sinusoid' or 'covariates', got {mode!r}")
    wstart = _get(cp, "forcing", "window_start", int, required=True)
    wend = _get(cp, "forcing", "window_end", int, required=True)
    if wend <= wstart:
        _fail("forcing", "window_end", f"window [{wstart}, {wend}) is empty")
    lag = _get(cp, "forcing", "lag_days", int, default=21)
    if lag < 0:
        _fail("forcing", "lag_days", f"must be nonnegative, got {lag}")
    knot_spacing = _get(cp, "forcing", "knot_spacing_days", float, default=30.0)
    cov_names = tuple(_get(cp, "forcing", "covariates", _names, default=[]))
    cov_file = _get(cp, "forcing", "covariate_file", str)
    period = _get(cp, "forcing", "period_days", float, default=365.0)
    if mode == "covariates":
        if not cov_names:
            _fail("forcing", "covariates", "covariates mode needs covariate names")
        if len(cov_names) + 1 != len(alpha):
            raise ConfigError(
                f"[forcing] {len(cov_names)} covariates need {len(cov_names) + 1} "
                f"alpha coefficients (intercept first); [model] alpha has {len(alpha)}")
        if cov_file is not None and not os.path.exists(cov_file):
            _fail("forcing", "covariate_file", f"file not found: {cov_file}")
    elif len(alpha) != 2:
        raise ConfigError(
            f"[forcing] sinusoid mode needs exactly 2 alpha coefficients "
            f"(intercept, amplitude); [model] alpha has {len(alpha)}")

    try:
        schedule = ChainSchedule(
            burn_in_iters=_get(cp, "schedule", "burn_in", int, required=True),
            secondary_iters=_get(cp, "schedule", "secondary", int, required=True),
            final_iters=_get(cp, "schedule", "final", int, required=True),
            thin=_get(cp, "schedule", "thin", int, default=10),
            n_particles=_get(cp, "schedule", "particles", int, default=100),
        )
    except ValueError as exc:
        raise ConfigError(f"[schedule] {exc}")
    resampling = _get(cp, "schedule", "resampling", str, default="multinomial")
    if resampling not in ("multinomial", "systematic"):
        _fail("schedule", "resampling", f"unknown scheme {resampling!r}")

    try:
        sim = SimConfig(
            method=_get(cp, "sim", "method", str, default="tau-leap"),
            tau_days=_get(cp, "sim", "tau_days", float, default=1.0),
            critical_size=_get(cp, "sim", "critical_size", int, default=10),
            max_tau_halvings=_get(cp, "sim", "max_tau_halvings", int, default=30),
        )
    except ValueError as exc:
        raise ConfigError(f"[sim] {exc}")

    return RunConfig(
        seed=seed, out_dir=str(out_dir), obs_interval_days=obs_interval,
        horizon_days=horizon_days, residual_sims=residual_sims,
        model=model, prior=prior, forcing_mode=mode, window=(wstart, wend),
        lag_days=lag, knot_spacing_days=knot_spacing, covariate_names=cov_names,
        covariate_file=cov_file, period_days=period, schedule=schedule,
        resampling=resampling, sim=sim)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def manifest_text(config: RunConfig, version: str) -> str:
    """Serialize the resolved settings as a loadable config.

    out_dir is deliberately left out: where the files land is not part of
    the recipe, so reruns into a different directory stay byte-identical.
    """
    m = config.model
    names = component_names(len(m.alpha_coeffs))
    lines = [
        "[run]",
        f"seed = {config.seed}",
        f"obs_interval_days = {config.obs_interval_days}",
        f"horizon_days = {config.horizon_days}",
        f"residual_sims = {config.residual_sims}",
        "",
        "[model]",
        f"n_pop = {m.n_pop}",
        f"beta = {_fmt(m.beta)}",
        f"gamma = {_fmt(m.gamma)}",
        f"mu = {_fmt(m.mu)}",
        f"rho = {_fmt(m.rho)}",
        f"phi_s = {_fmt(m.phi_s)}",
        f"phi_i = {_fmt(m.phi_i)}",
        "alpha = " + " ".join(_fmt(a) for a in m.alpha_coeffs),
        "",
        "[prior]",
    ]
    for j, cname in enumerate(names):
        if not config.prior.fixed_mask[j]:
            lines.append(f"{cname} = {_fmt(config.prior.means[j])} {_fmt(config.prior.sds[j])}")
    fixed = [names[j] for j in range(len(names)) if config.prior.fixed_mask[j]]
    if fixed:
        lines.append("fixed = " + " ".join(fixed))
    lines += [
        "",
        "[forcing]",
        f"mode = {config.forcing_mode}",
        f"window_start = {config.window[0]}",
        f"window_end = {config.window[1]}",
        f"lag_days = {config.lag_days}",
        f"knot_spacing_days = {_fmt(config.knot_spacing_days)}",
        f"period_days = {_fmt(config.period_days)}",
    ]
    if config.covariate_names:
        lines.append("covariates = " + " ".join(config.covariate_names))
    if config.covariate_file is not None:
        lines.append(f"covariate_file = {config.covariate_file}")
    s = config.schedule
    lines += [
        "",
        "[schedule]",
        f"burn_in = {s.burn_in_iters}",
        f"secondary = {s.secondary_iters}",
        f"final = {s.final_iters}",
        f"thin = {s.thin}",
        f"particles = {s.n_particles}",
        f"resampling = {config.resampling}",
        "",
        "[sim]",
        f"method = {config.sim.method}",
        f"tau_days = {_fmt(config.sim.tau_days)}",
        f"critical_size = {config.sim.critical_size}",
        f"max_tau_halvings = {config.sim.max_tau_halvings}",
        "",
        "[provenance]",
        f"version = {version}",
        "",
    ]
    return "\n".join(lines)


def write_manifest(config: RunConfig, version: str, path) -> None:
    with open(path, "w") as fh:
        fh.write(manifest_text(config, version))
