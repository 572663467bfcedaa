"""Command-line front end: compute and emit data tables.

Five subcommands cover the pipelines end to end:

* ``spectrum``  transmission versus probe-cavity detuning (CSV)
* ``eigen``     eigenvalue branches versus atom-cavity detuning (JSON)
* ``drop``      photon-counting drops: per-bin counts, events, P(C), Gamma
* ``sweep``     mean events per drop versus detuning, Monte Carlo + theory
* ``fit``       parameter extraction from a CSV trace (JSON)

Every command is a pure function of (config, seed, inputs): rerunning with
the same arguments reproduces the output files byte for byte at any
``--jobs`` setting.  Exit codes: 0 success, 2 configuration error (nothing
written), 3 numerical failure.
"""

import argparse
import dataclasses
import functools
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import config as cfg
from . import fitting
from . import model
from . import transit

__all__ = ["main"]


def _fmt(v):
    return "%.12g" % float(v)


def _out_path(run, name):
    os.makedirs(run.out_dir, exist_ok=True)
    return os.path.join(run.out_dir, name)


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_spectrum(run, args):
    spec = model.transmission_spectrum(
        run.system, (run.spectrum.delta_min, run.spectrum.delta_max),
        run.spectrum.points)
    lines = ["# schema: spectrum-v1", "delta_mhz,t_f"]
    lines += [f"{_fmt(d)},{_fmt(t)}"
              for d, t in zip(spec.delta_mhz, spec.t_f)]
    path = _out_path(run, "spectrum.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(path)
    return 0


def cmd_eigen(run, args):
    grid = np.linspace(run.eigen.delta_ac_min, run.eigen.delta_ac_max,
                       run.eigen.points)
    freq = np.empty((3, len(grid)))
    decay = np.empty((3, len(grid)))
    labels = None
    prev = None
    for i, dac in enumerate(grid):
        # probe on the cavity: delta_AC = -delta_A
        params = dataclasses.replace(run.system, delta=0.0, delta_A=-dac)
        es = model.eigenvalues(params, frame=run.eigen.frame)
        if prev is None:
            order = np.arange(3)
            labels = ["branch-%d" % j if lab is None else lab
                      for j, lab in enumerate(es.labels)]
        else:
            # keep branches continuous: match on eigenvector overlap
            overlap = np.abs(prev.conj().T @ es.vectors)
            rows, cols = linear_sum_assignment(-overlap)
            order = cols[np.argsort(rows)]
        freq[:, i] = es.values.real[order]
        decay[:, i] = es.values.imag[order]
        prev = es.vectors[:, order]
    doc = {
        "schema": "eigen-v1",
        "frame": run.eigen.frame,
        "delta_ac_mhz": [float(x) for x in grid],
        "branches": [
            {"label": labels[j],
             "freq_mhz": [float(x) for x in freq[j]],
             "decay_mhz": [float(x) for x in decay[j]]}
            for j in range(3)
        ],
        "params": {"g_tw_mhz": abs(run.system.g_tw),
                   "kappa_i_mhz": run.system.kappa_i,
                   "kappa_ex_mhz": run.system.kappa_ex,
                   "h_mhz": run.system.h,
                   "gamma_mhz": run.system.gamma},
    }
    path = _out_path(run, "eigen.json")
    _write_json(path, doc)
    print(path)
    return 0


def _run_drops(run):
    dc = run.drop
    worker = functools.partial(
        transit.simulate_drop, run.seed,
        params=run.system, geom=run.geometry, cloud=run.cloud,
        chain=run.chain, rho_min=dc.rho_min,
        shell_depth_lb=dc.shell_depth_lb,
        window_ms=(dc.window_start_ms, dc.window_stop_ms))
    streams = range(dc.drops)
    if run.jobs > 1:
        with ProcessPoolExecutor(max_workers=run.jobs) as pool:
            return list(pool.map(worker, streams))
    return [worker(s) for s in streams]


def cmd_drop(run, args):
    dc = run.drop
    series_list = _run_drops(run)

    lines = ["# schema: counts-v1", "drop,bin_time_us,counts_1,counts_2"]
    for d, series in enumerate(series_list):
        t = series.bin_times()
        c1 = np.asarray(series.counts_1)
        c2 = np.asarray(series.counts_2)
        lines += [f"{d},{_fmt(t[i])},{c1[i]},{c2[i]}"
                  for i in range(series.n_bins)]

    events = []
    for d, series in enumerate(series_list):
        for ev in transit.threshold_events(series, dc.c0):
            events.append({"drop": d, "t_us": ev.t_us,
                           "n_bins": ev.stop_bin - ev.start_bin,
                           "peak_counts": ev.peak_counts,
                           "total_counts": ev.total_counts})

    joined = transit.concatenate_series(series_list)
    ref_mean = (run.chain.background_mean
                + 2.0 * run.chain.dark_rate * run.chain.bin_dt * 1e-6)
    window = (dc.histogram_start_ms * 1e3, dc.histogram_stop_ms * 1e3)
    per_drop_hist = [transit.count_histogram(s, window_us=window,
                                             ref_mean=ref_mean)
                     for s in series_list]
    support = max(len(h.counts) for h in per_drop_hist)
    p = np.zeros(support)
    for h in per_drop_hist:
        p[:len(h.counts)] += h.p * h.n_bins
    n_hist_bins = sum(h.n_bins for h in per_drop_hist)
    p /= n_hist_bins
    from scipy.stats import poisson as poisson_dist
    p_ref = poisson_dist.pmf(np.arange(support), ref_mean)

    lags, gamma = transit.cross_correlation(joined, max_lag=dc.max_lag_us)
    expected = run.chain.expected_cmax(run.system.kappa_ex, run.nbar0)

    doc = {
        "schema": "events-v1",
        "seed": run.seed,
        "drops": dc.drops,
        "c0": dc.c0,
        "events": events,
        "events_per_drop": len(events) / dc.drops,
        "histogram": {
            "window_ms": [dc.histogram_start_ms, dc.histogram_stop_ms],
            "counts": list(range(support)),
            "p": [float(x) for x in p],
            "p_ref": [float(x) for x in p_ref],
            "ref_mean": ref_mean,
            "n_bins": n_hist_bins,
        },
        "gamma": {"lag_us": [float(x) for x in lags],
                  "value": [float(x) for x in gamma]},
        "expected_cmax": expected,
        "cmax_consistency": expected / run.chain.c_max,
    }

    counts_path = _out_path(run, "drop_counts.csv")
    with open(counts_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    summary_path = _out_path(run, "drop_summary.json")
    _write_json(summary_path, doc)
    print(counts_path)
    print(summary_path)
    return 0


def cmd_sweep(run, args):
    sw = run.sweep
    dets = np.asarray(sw.detunings)
    i0 = int(np.argmin(np.abs(dets)))
    rows = []
    for g0m in sw.g0m:
        res = transit.detuning_sweep(
            dets, g0m, sw.drops, c0=sw.c0, seed=run.seed,
            params_base=run.system, geom=run.geometry, cloud=run.cloud,
            chain=run.chain, rho_min=sw.rho_min,
            shell_depth_lb=sw.shell_depth_lb, rho_fixed=sw.rho_fixed,
            normalize=sw.normalize, jobs=run.jobs)
        theory = np.full(len(dets), np.nan)
        if sw.theory:
            curve = transit.theory_sweep(
                dets, g0m, sw.averaging, geom=run.geometry,
                kappa_i=run.system.kappa_i, kappa_ex=run.system.kappa_ex,
                h=run.system.h, gamma=run.system.gamma,
                rho_min=sw.rho_min, shell_depth_lb=sw.shell_depth_lb)
            if curve[i0] > 0:
                # put the deterministic curve on the same scale as the data
                scale = (1.0 if sw.normalize
                         else res.events_per_drop[i0]) / curve[i0]
                theory = curve * scale
        for i, dac in enumerate(dets):
            rows.append((g0m, dac, res.events_per_drop[i], res.stderr[i],
                         theory[i]))
    lines = ["# schema: sweep-v1",
             "g0m_mhz,delta_ac_mhz,events_per_drop,stderr,theory"]
    for g0m, dac, ev, err, th in rows:
        th_txt = "" if np.isnan(th) else _fmt(th)
        lines.append(f"{_fmt(g0m)},{_fmt(dac)},{_fmt(ev)},{_fmt(err)},{th_txt}")
    path = _out_path(run, "sweep.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(path)
    return 0


def _read_width_csv(path):
    import csv as _csv
    with open(path, newline="") as fh:
        reader = _csv.DictReader(row for row in fh if not row.startswith("#"))
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        cols = {c.strip() for c in reader.fieldnames}
        ycol = next((c for c in ("events_per_drop", "transmission", "value")
                     if c in cols), None)
        if "delta_ac_mhz" in cols:
            xcol = "delta_ac_mhz"
        elif "detuning_mhz" in cols:
            xcol = "detuning_mhz"
        else:
            xcol = None
        if xcol is None or ycol is None:
            raise ValueError(f"{path}: need a detuning column and a value column")
        ecol = next((c for c in ("stderr", "sigma") if c in cols), None)
        x, y, err = [], [], []
        for row in reader:
            x.append(float(row[xcol]))
            y.append(float(row[ycol]))
            if ecol and row.get(ecol) not in (None, ""):
                err.append(float(row[ecol]))
    sigma = np.array(err) if len(err) == len(x) and err else None
    return np.array(x), np.array(y), sigma


def cmd_fit(run, args):
    with open(args.input, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    extra = {"input": os.path.basename(args.input),
             "input_sha256": digest, "model": args.model}
    if args.model == "cavity":
        trace = fitting.read_trace_csv(args.input)
        result = fitting.fit_empty_cavity(trace)
    else:
        x, y, sigma = _read_width_csv(args.input)
        table = None
        if args.averaged:
            table = fitting.calibration_table(
                np.arange(25.0, 80.1, 5.0), geom=run.geometry,
                kappa_i=run.system.kappa_i, kappa_ex=run.system.kappa_ex,
                h=run.system.h, gamma=run.system.gamma)
        result = fitting.fit_detuning_width(
            x, y, sigma, kappa_i=run.system.kappa_i,
            kappa_ex=run.system.kappa_ex, h=run.system.h,
            gamma=run.system.gamma, table=table)
    doc = {
        "schema": "fit-v1",
        "params": {k: float(v) for k, v in result.params.items()},
        "sigmas": {k: float(v) for k, v in result.sigmas.items()},
        "residual_norm": result.residual_norm,
        "converged": result.converged,
        "iterations": result.iterations,
        "flags": list(result.flags),
    }
    doc.update(extra)
    path = _out_path(run, "fit.json")
    _write_json(path, doc)
    print(path)
    return 0


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "eigen": cmd_eigen,
    "drop": cmd_drop,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
}


def _parser():
    parser = argparse.ArgumentParser(
        prog="toroidsim",
        description="Single-atom microtoroid transmission and counting "
                    "simulations.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("spectrum", "transmission spectrum CSV"),
        ("eigen", "eigenvalue branches JSON"),
        ("drop", "photon-counting drops: counts CSV + summary JSON"),
        ("sweep", "events per drop vs detuning CSV"),
        ("fit", "fit a CSV trace, write JSON"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH",
                       help="INI run configuration")
        p.add_argument("--set", metavar="SECTION.KEY=VALUE", action="append",
                       default=[], help="override one config value")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--jobs", type=int, help="parallel workers")
        if name == "fit":
            p.add_argument("input", help="CSV trace to fit")
            p.add_argument("--model", choices=("cavity", "width"),
                           default="cavity")
            p.add_argument("--averaged", action="store_true",
                           help="width model: invert through the "
                            "position-averaged calibration table")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        run = cfg.load_config(args.config, args.set)
        if args.seed is not None:
            run = dataclasses.replace(run, seed=args.seed)
        if args.out is not None:
            run = dataclasses.replace(run, out_dir=args.out)
        if args.jobs is not None:
            if args.jobs < 1:
                raise cfg.ConfigError("--jobs must be at least 1")
            run = dataclasses.replace(run, jobs=args.jobs)
    except cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](run, args)
    except (fitting.FitError, model.DegenerateParametersError,
            np.linalg.LinAlgError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
