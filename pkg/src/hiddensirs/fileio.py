"""CSV readers and writers for every pipeline artifact.

All numbers serialize through repr, which round-trips exactly, so a rerun
with the same seed produces byte-identical files. Missing values are written
as the literal marker NA, never as NaN.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .model import TransformedParams, component_names, from_transformed
from .pmmh import PosteriorDraw

__all__ = [
    "read_cases", "write_cases",
    "read_covariates", "write_covariates",
    "write_posterior", "read_posterior",
    "write_trajectories", "read_trajectories",
    "write_predictions", "write_hidden_quantiles",
    "write_residuals", "write_ess", "write_decomposition",
    "write_baseline",
]

MISSING = "NA"
_NATURAL = ("beta", "gamma", "mu", "rho", "phi_s", "phi_i")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _rows(path, expected_header):
    """Yield (line_number, fields) after checking the header line."""
    try:
        fh = open(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    with fh:
        header = fh.readline().rstrip("\n")
        if header != expected_header:
            raise DataError(
                f"{path}:1: expected header {expected_header!r}, found {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            yield lineno, line.split(",")


def _field(path, lineno, fields, idx, parse, what):
    try:
        return parse(fields[idx])
    except (ValueError, IndexError):
        got = fields[idx] if idx < len(fields) else "<missing>"
        raise DataError(f"{path}:{lineno}: cannot parse {what} from {got!r}")


def read_cases(path):
    """(day, count) pairs from a `day,count` file; days must strictly increase."""
    obs = []
    for lineno, fields in _rows(path, "day,count"):
        if len(fields) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 fields, found {len(fields)}")
        day = _field(path, lineno, fields, 0, float, "day")
        count = _field(path, lineno, fields, 1, int, "count")
        if count < 0:
            raise DataError(f"{path}:{lineno}: negative count {count}")
        if obs and day <= obs[-1][0]:
            raise DataError(f"{path}:{lineno}: day {day:g} does not increase")
        obs.append((day, count))
    if not obs:
        raise DataError(f"{path}: no observations")
    return obs


def write_cases(path, obs) -> None:
    with open(path, "w") as fh:
        fh.write("day,count\n")
        for day, count in obs:
            fh.write(f"{_fmt(day)},{int(count)}\n")


def read_covariates(path):
    """Samples grouped by covariate name: {name: (days, values, source_ids)}."""
    by_name = {}
    for lineno, fields in _rows(path, "day,source_id,name,value"):
        if len(fields) != 4:
            raise DataError(f"{path}:{lineno}: expected 4 fields, found {len(fields)}")
        day = _field(path, lineno, fields, 0, float, "day")
        value = _field(path, lineno, fields, 3, float, "value")
        source, name = fields[1], fields[2]
        if not name:
            raise DataError(f"{path}:{lineno}: empty covariate name")
        by_name.setdefault(name, []).append((day, value, source))
    if not by_name:
        raise DataError(f"{path}: no covariate samples")
    out = {}
    for name, triples in by_name.items():
        days = np.array([t[0] for t in triples])
        values = np.array([t[1] for t in triples])
        sources = tuple(t[2] for t in triples)
        out[name] = (days, values, sources)
    return out


def write_covariates(path, rows) -> None:
    """rows: iterable of (day, source_id, name, value)."""
    with open(path, "w") as fh:
        fh.write("day,source_id,name,value\n")
        for day, source, name, value in rows:
            fh.write(f"{_fmt(day)},{source},{name},{_fmt(value)}\n")


def _posterior_header(n_alpha: int) -> str:
    cols = component_names(n_alpha) + list(_NATURAL) + ["log_lik_hat", "S_T", "I_T"]
    return ",".join(cols)


def write_posterior(path, draws) -> None:
    """One row per retained draw: transformed vector, natural values, fit score, final state."""
    draws = list(draws)
    if not draws:
        raise ValueError("no draws to write")
    n_alpha = draws[0].theta.n_alpha
    with open(path, "w") as fh:
        fh.write(_posterior_header(n_alpha) + "\n")
        for d in draws:
            final = d.final_state
            vals = ([_fmt(v) for v in d.theta.values]
                    + [_fmt(getattr(d.natural, f)) for f in _NATURAL]
                    + [_fmt(d.log_lik_hat), str(final.s), str(final.i)])
            fh.write(",".join(vals) + "\n")


def read_posterior(path, n_pop: int):
    """Reconstruct draws from a posterior file.

    The trajectory of each returned draw is the single stored final state;
    that is all prediction needs. log_prior is not stored and comes back NaN.
    """
    try:
        with open(path) as fh:
            header = fh.readline().rstrip("\n")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    cols = header.split(",")
    n_alpha = sum(1 for c in cols if c.startswith("alpha_"))
    expected = _posterior_header(max(n_alpha, 1))
    if header != expected:
        raise DataError(f"{path}:1: expected header {expected!r}, found {header!r}")
    n_comp = 6 + n_alpha
    draws = []
    for lineno, fields in _rows(path, expected):
        if len(fields) != n_comp + len(_NATURAL) + 3:
            raise DataError(f"{path}:{lineno}: expected {n_comp + len(_NATURAL) + 3} "
                            f"fields, found {len(fields)}")
        vec = [_field(path, lineno, fields, j, float, cols[j])
               for j in range(n_comp)]
        log_lik = _field(path, lineno, fields, n_comp + len(_NATURAL), float, "log_lik_hat")
        s_t = _field(path, lineno, fields, n_comp + len(_NATURAL) + 1, int, "S_T")
        i_t = _field(path, lineno, fields, n_comp + len(_NATURAL) + 2, int, "I_T")
        theta = TransformedParams(values=np.array(vec), n_alpha=n_alpha)
        try:
            natural = from_transformed(theta, n_pop)
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}")
        if s_t < 0 or i_t < 0 or s_t + i_t > n_pop:
            raise DataError(f"{path}:{lineno}: final state ({s_t}, {i_t}) violates the "
                            f"population bound {n_pop}")
        draws.append(PosteriorDraw(
            theta=theta, natural=natural, log_lik_hat=log_lik, log_prior=float("nan"),
            trajectory=np.array([[s_t, i_t]], dtype=np.int64), accepted=True))
    if not draws:
        raise DataError(f"{path}: no posterior draws")
    return draws


def write_trajectories(path, draws, obs_times) -> None:
    """Long-format sampled hidden paths: draw,day,s,i."""
    draws = list(draws)
    with open(path, "w") as fh:
        fh.write("draw,day,s,i\n")
        for j, d in enumerate(draws):
            if d.trajectory is None or len(d.trajectory) != len(obs_times):
                raise ValueError(f"draw {j} has no full trajectory to write")
            for t, (s, i) in zip(obs_times, d.trajectory):
                fh.write(f"{j},{_fmt(t)},{int(s)},{int(i)}\n")


def read_trajectories(path):
    """(obs_times, states) with states shaped (n_draws, n_times, 2)."""
    per_draw = {}
    for lineno, fields in _rows(path, "draw,day,s,i"):
        if len(fields) != 4:
            raise DataError(f"{path}:{lineno}: expected 4 fields, found {len(fields)}")
        j = _field(path, lineno, fields, 0, int, "draw")
        day = _field(path, lineno, fields, 1, float, "day")
        s = _field(path, lineno, fields, 2, int, "s")
        i = _field(path, lineno, fields, 3, int, "i")
        per_draw.setdefault(j, []).append((day, s, i))
    if not per_draw:
        raise DataError(f"{path}: no trajectories")
    if sorted(per_draw) != list(range(len(per_draw))):
        raise DataError(f"{path}: draw indices are not contiguous from 0")
    times = [d for d, _, _ in per_draw[0]]
    states = np.empty((len(per_draw), len(times), 2), dtype=np.int64)
    for j in range(len(per_draw)):
        rows = per_draw[j]
        if [d for d, _, _ in rows] != times:
            raise DataError(f"{path}: draw {j} covers different days than draw 0")
        states[j] = [(s, i) for _, s, i in rows]
    return np.asarray(times), states


def write_predictions(path, run) -> None:
    """Long-format count distributions: day,count,probability."""
    with open(path, "w") as fh:
        fh.write("day,count,probability\n")
        for t, values, probs in zip(run.obs_times, run.count_values, run.count_probs):
            for v, p in zip(values, probs):
                fh.write(f"{_fmt(t)},{int(v)},{_fmt(p)}\n")


def write_hidden_quantiles(path, run, day_from=None) -> None:
    with open(path, "w") as fh:
        fh.write("day,s_q025,s_q50,s_q975,i_q025,i_q50,i_q975\n")
        for j, day in enumerate(run.hidden_days):
            if day_from is not None and day < day_from:
                continue
            s, i = run.s_quantiles[j], run.i_quantiles[j]
            fh.write(",".join([_fmt(day)] + [_fmt(v) for v in s] + [_fmt(v) for v in i]) + "\n")


def write_residuals(path, series) -> None:
    """day,observed,sim_mean,sim_sd,residual with NA for flagged entries."""
    with open(path, "w") as fh:
        fh.write("day,observed,sim_mean,sim_sd,residual\n")
        for j, t in enumerate(series.times):
            resid = MISSING if series.flagged[j] else _fmt(series.residuals[j])
            fh.write(f"{_fmt(t)},{int(series.observed[j])},{_fmt(series.sim_mean[j])},"
                     f"{_fmt(series.sim_sd[j])},{resid}\n")


def write_ess(path, names, values) -> None:
    with open(path, "w") as fh:
        fh.write("component,ess\n")
        for name, v in zip(names, values):
            fh.write(f"{name},{_fmt(v)}\n")


def write_decomposition(path, dec) -> None:
    with open(path, "w") as fh:
        fh.write("day,alpha_q025,alpha_q50,alpha_q975,beta_i_q025,beta_i_q50,beta_i_q975\n")
        for j, t in enumerate(dec.times):
            a, b = dec.alpha_quantiles[j], dec.beta_i_quantiles[j]
            fh.write(",".join([_fmt(t)] + [_fmt(v) for v in a] + [_fmt(v) for v in b]) + "\n")


def write_baseline(model_path, pred_path, model, terms, days, mean, lower, upper) -> None:
    """Coefficient table (dispersion as a term with NA standard error) plus the mean curve."""
    with open(model_path, "w") as fh:
        fh.write("term,estimate,se\n")
        for term, est, se in zip(terms, model.coef, model.coef_se):
            fh.write(f"{term},{_fmt(est)},{_fmt(se)}\n")
        fh.write(f"dispersion,{_fmt(model.dispersion)},{MISSING}\n")
    with open(pred_path, "w") as fh:
        fh.write("day,mean,lower,upper\n")
        for d, m, lo, hi in zip(days, mean, lower, upper):
            fh.write(f"{_fmt(d)},{_fmt(m)},{_fmt(lo)},{_fmt(hi)}\n")
