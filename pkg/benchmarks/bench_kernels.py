"""Timing comparison between the compiled kernels and their pure-Python twins.

The backend is fixed at import time, so each backend runs in its own
subprocess with HIDDENSIRS_BACKEND set. Every workload is seeded identically
in both children; besides the timings, the parent checks that the result
checksums agree, which is the bit-identity claim the fallback makes.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np


def _checksum(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.asarray(a).tobytes())
    return h.hexdigest()[:16]


def _reference_setup():
    from hiddensirs import ModelParams, Streams, sample_initial_state, sinusoid_design

    params = ModelParams(beta=1.25e-5, gamma=0.1, mu=0.0009, rho=0.015,
                         alpha_coeffs=np.array([-7.0, 3.5]),
                         phi_s=2100.0, phi_i=15.0, n_pop=10000)
    design = sinusoid_design(0, 1096)
    forcing = design.build(params.alpha_coeffs)
    times = np.arange(0.0, 1095.0, 14.0)
    g = Streams(4321).child(0).generator()
    state = sample_initial_state(params.phi_s, params.phi_i, params.n_pop, g)
    return params, forcing, times, state


def bench_exact_path():
    from hiddensirs import Streams
    from hiddensirs.simulate import SimConfig, simulate_path

    params, forcing, times, state = _reference_setup()
    config = SimConfig(method="direct-exact")

    def run():
        g = Streams(4321).child(1).generator()
        return simulate_path(state, times[0], times[1:], forcing, params, config, g)

    return run, lambda path: _checksum(path)


def bench_tau_leap_path():
    from hiddensirs import Streams
    from hiddensirs.simulate import SimConfig, simulate_path

    params, forcing, times, state = _reference_setup()
    config = SimConfig(method="tau-leap", tau_days=1.0, critical_size=10)

    def run():
        g = Streams(4321).child(2).generator()
        return simulate_path(state, times[0], times[1:], forcing, params, config, g)

    return run, lambda path: _checksum(path)


def bench_filter():
    from hiddensirs import Streams, run_filter, sample_observation
    from hiddensirs.simulate import SimConfig, simulate_path

    params, forcing, times, state = _reference_setup()
    g = Streams(4321).child(3).generator()
    hidden = simulate_path(state, times[0], times[1:], forcing, params,
                           SimConfig(method="direct-exact"), g)
    hidden = np.vstack([[state.s, state.i], hidden])
    obs = [(float(t), int(sample_observation(int(i), params.rho, g)))
           for t, i in zip(times, hidden[:, 1])]
    config = SimConfig(method="tau-leap", tau_days=1.0, critical_size=10)

    def run():
        return run_filter(obs, forcing, params, 100, config, Streams(555))

    return run, lambda r: _checksum(np.float64(r.log_lik_hat), r.sampled_trajectory)


WORKLOADS = {
    "exact-path-3yr": bench_exact_path,
    "tau-leap-path-3yr": bench_tau_leap_path,
    "filter-K100-3yr": bench_filter,
}


def child_main(repeats: int) -> None:
    import hiddensirs.simulate as sim

    results = {}
    for name, make in WORKLOADS.items():
        run, summarize = make()
        run()  # warm caches before timing
        elapsed = []
        out = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            out = run()
            elapsed.append(time.perf_counter() - t0)
        results[name] = {"seconds": float(np.median(elapsed)),
                         "checksum": summarize(out)}
    json.dump({"backend": sim.BACKEND, "results": results}, sys.stdout)


def parent_main(repeats: int) -> int:
    reports = {}
    for backend in ("compiled", "python"):
        env = dict(os.environ, HIDDENSIRS_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--child",
             "--repeats", str(repeats)],
            env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            print(f"{backend}: unavailable ({proc.stderr.strip().splitlines()[-1]})")
            continue
        reports[backend] = json.loads(proc.stdout)

    if not reports:
        print("no backend could be benchmarked")
        return 1

    have_both = len(reports) == 2
    width = max(len(n) for n in WORKLOADS)
    header = f"{'workload':<{width}}  {'compiled':>10}  {'python':>10}  {'ratio':>7}  match"
    print(header)
    print("-" * len(header))
    all_match = True
    for name in WORKLOADS:
        cells = {}
        for backend, rep in reports.items():
            cells[backend] = rep["results"][name]
        c = cells.get("compiled")
        p = cells.get("python")
        ratio = f"{p['seconds'] / c['seconds']:7.1f}" if have_both else "      -"
        match = ""
        if have_both:
            same = c["checksum"] == p["checksum"]
            all_match = all_match and same
            match = "yes" if same else "NO"
        print(f"{name:<{width}}  "
              f"{c['seconds']*1e3 if c else float('nan'):>8.2f}ms  "
              f"{p['seconds']*1e3 if p else float('nan'):>8.2f}ms  {ratio}  {match}")
    if have_both and not all_match:
        print("\nbackends disagree; the pure-Python twins are out of sync")
        return 1
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing repeats per workload, median reported")
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        child_main(args.repeats)
    else:
        sys.exit(parent_main(args.repeats))
