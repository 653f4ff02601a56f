"""Command-line entry point.

Every subcommand writes ``<name>.csv`` (and for experiments
``<name>.json``, ``<name>.plot.txt``) into the output directory, plus
``<name>.meta.json`` holding wall-clock time and host details. Everything
except the metadata file is a pure function of the configuration.

Exit status: 0 on success, 2 when an acceptance rule fails, 1 on error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from ._backend import BACKEND
from .errors import NearCritError
from .estimators import (ExperimentReport, ModelConfig, cell_coupling_samples, check_envelope,
                         envelope_max_ratio, estimate_cell_coupling, estimate_convergence,
                         estimate_integral_coupling, fit_rate, fit_record, integral_envelope_shape,
                         interleaved_half, limit_samples, log_envelope_check)
from .hawkes import rescaled_paths, simulate_with_retry
from .kernels import Regime, make_kernel, scale_kernel
from .resolvent import l2_distance_on_unit, solve_resolvent
from .rng import Streams

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


# ------------------------------------------------------------ value parsing

def parse_T_list(text) -> list[float]:
    """``"50,100,200"`` or ``"64..4096"`` (powers of two between the ends)."""
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(v) for v in text]
    text = str(text).strip()
    if ".." in text:
        lo, hi = (float(v) for v in text.split("..", 1))
        if lo <= 0 or hi < lo:
            raise ValueError(f"bad range {text!r}")
        out, v = [], lo
        while v <= hi * (1 + 1e-12):
            out.append(v)
            v *= 2.0
        return out
    return [float(v) for v in text.split(",") if v.strip()]


def parse_int_list(text) -> list[int]:
    if isinstance(text, list):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _regime(text) -> str:
    return Regime.parse(str(text)).value


# Options per subcommand: name -> (converter, default, help).
COMMON = {
    "seed": (int, None, "master seed (falls back to NEARCRIT_SEED, then 0)"),
    "out": (str, "nearcrit-out", "output directory"),
    "threads": (int, None, "worker processes (default: number of CPUs)"),
}
MODEL = {
    "kernel": (str, "exponential", "kernel family: exponential or gamma2"),
    "beta": (float, 1.0, "kernel rate"),
    "regime": (_regime, "-", "sub, critical or super (also -, 0, +)"),
    "mu": (float, 1.0, "baseline intensity"),
}
OPTIONS = {
    "simulate": {**MODEL, "T": (float, 100.0, "time scale"),
                 "grid": (int, 1000, "number of unit-grid intervals")},
    "resolvent": {**MODEL, "T": (parse_T_list, "64..4096", "time scales: a,b,c or a..b"),
                  "n": (int, 4096, "output grid size")},
    "couple-diagnostics": {"T": (parse_T_list, "25,50,100,200", "time scales"),
                           "k": (int, 10, "cells per unit"),
                           "reps": (int, 10000, "cells per time scale")},
    "limit": {"regime": MODEL["regime"], "mu": MODEL["mu"], "m": (float, 1.0, "mean of the kernel"),
              "T": (float, 100.0, "time scale of the driving field"),
              "k": (int, None, "Euler steps (default floor(T^0.8)+1)"),
              "reps": (int, 100, "replications"),
              "driver": (str, "coupled", "coupled or reference")},
    "rates": {**MODEL, "T": (parse_T_list, "25,50,100,200", "time scales for the cell sweep"),
              "k": (int, 10, "cells per unit for the cell sweep"),
              "reps": (int, 10000, "cells per time scale"),
              "integral-T": (float, 200.0, "time scale for the integral sweep"),
              "k-list": (parse_int_list, None, "cell counts for the integral sweep "
                                               "(default floor(T^(1/3)), floor(T^(2/3)), T)"),
              "integral-reps": (int, 500, "replications per cell count")},
    "converge": {**MODEL, "T": (parse_T_list, "50,100,200,400", "time scales"),
                 "reps": (int, 200, "replications per time scale")},
    "report": {"input": (str, None, "directory of JSON reports (default: --out)")},
}
HELP = {
    "simulate": "simulate one Hawkes path and write its rescaled paths",
    "resolvent": "solve the scaled resolvent and fit its convergence rate",
    "couple-diagnostics": "check the Gaussianized cell increments",
    "limit": "simulate the limit diffusion",
    "rates": "estimate the cell and integral coupling errors",
    "converge": "estimate the sup distance between intensity and limit",
    "report": "summarise JSON reports in a directory",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nearcrit", description="Experiments on near-critical Hawkes processes and their diffusion limits.")
    parser.add_argument("--version", action="version", version=f"nearcrit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, opts in OPTIONS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", default=None, help="JSON file of option values; flags win")
        for key, (_, default, text) in {**opts, **COMMON}.items():
            shown = f" (default: {default})" if default is not None else ""
            p.add_argument(f"--{key}", dest=key.replace("-", "_"), default=argparse.SUPPRESS,
                           help=text + shown)
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags; values converted and checked."""
    opts = {**OPTIONS[command], **COMMON}
    raw = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    merged: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in loaded.items():
            norm = key.replace("_", "-")
            if norm == "subcommand":
                if value != command:
                    raise UsageError(f"config key 'subcommand' is {value!r}, not {command!r}")
                continue
            if norm not in opts:
                raise UsageError(f"unknown config key {key!r}")
            merged[norm] = value
    for key, value in raw.items():
        merged[key.replace("_", "-")] = value
    cfg = {}
    for key, (conv, default, _) in opts.items():
        value = merged.get(key, default)
        if value is None:
            cfg[key] = None
            continue
        try:
            cfg[key] = conv(value)
        except (ValueError, TypeError) as exc:
            raise UsageError(f"bad value for {key!r}: {value!r} ({exc})") from exc
    if cfg.get("seed") is None:
        env = os.environ.get("NEARCRIT_SEED")
        try:
            cfg["seed"] = int(env) if env else 0
        except ValueError as exc:
            raise UsageError(f"bad NEARCRIT_SEED {env!r}") from exc
    if cfg.get("threads") is None:
        cfg["threads"] = os.cpu_count() or 1
    for key in ("reps", "integral-reps", "grid", "n", "k"):
        if cfg.get(key) is not None and cfg[key] < 1:
            raise UsageError(f"{key!r} must be positive")
    if cfg.get("driver") not in (None, "coupled", "reference"):
        raise UsageError(f"bad value for 'driver': {cfg['driver']!r}")
    if cfg.get("kernel") not in (None, "exponential", "gamma2"):
        raise UsageError(f"bad value for 'kernel': {cfg['kernel']!r}")
    return cfg


# ------------------------------------------------------------ output

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def csv_text(table: str, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: nearcrit.{table}/v1\r\n")
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / name, "w", newline="") as fh:
        fh.write(text)


def _plot_text(xs, ys, ses, env) -> str:
    lines = ["# x y stderr envelope"]
    for x, y, s, e in zip(xs, ys, ses, env):
        lines.append(" ".join(_fmt(float(v)) for v in (x, y, s, e)))
    return "\n".join(lines) + "\n"


def _config_echo(command: str, cfg: dict) -> dict:
    return {"subcommand": command, **{k: v for k, v in cfg.items() if k not in ("out", "threads")}}


def _finish(out: Path, name: str, report: ExperimentReport | None, started: float) -> int:
    if report is not None:
        _write(out, f"{name}.json", report.to_json())
    meta = {"wall_clock_seconds": time.time() - started, "version": __version__, "backend": BACKEND,
            "python": platform.python_version(), "host": platform.node(),
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    _write(out, f"{name}.meta.json", json.dumps(meta, sort_keys=True, indent=2) + "\n")
    if report is not None:
        for rule, ok in sorted(report.verdicts.items()):
            print(f"{'PASS' if ok else 'FAIL'} {rule}")
        return EXIT_OK if report.passed else EXIT_FAIL
    return EXIT_OK


def _model(cfg) -> ModelConfig:
    return ModelConfig(cfg["kernel"], cfg["beta"], cfg["regime"], cfg["mu"])


# ------------------------------------------------------------ subcommands

def cmd_simulate(cfg, out: Path, started: float) -> int:
    T = cfg["T"]
    sk = scale_kernel(make_kernel(cfg["kernel"], cfg["beta"]), cfg["regime"], T)
    _, hp, _ = simulate_with_retry(sk, cfg["mu"], Streams(cfg["seed"], 0))
    grid = np.linspace(0.0, 1.0, cfg["grid"] + 1)
    rp = rescaled_paths(hp, grid)
    rows = zip(rp.t, rp.Lambda, rp.H_scaled, rp.martingale)
    _write(out, "simulate.csv", csv_text("simulate", ["t", "Lambda", "H_scaled", "martingale_scaled"], rows))
    return _finish(out, "simulate", None, started)


def cmd_resolvent(cfg, out: Path, started: float) -> int:
    base = make_kernel(cfg["kernel"], cfg["beta"])
    tables, dists = [], []
    for T in cfg["T"]:
        rt = solve_resolvent(scale_kernel(base, cfg["regime"], T), max(cfg["n"], int(16 * T)))
        tables.append(rt)
        dists.append(l2_distance_on_unit(rt))
    report = ExperimentReport("resolvent", _config_echo("resolvent", cfg), cfg["seed"])
    positive = [(T, d) for T, d in zip(cfg["T"], dists) if d > 0]
    slope = math.nan
    if len(positive) >= 3:
        fit = fit_rate([p[0] for p in positive], [p[1] for p in positive])
        slope = fit.slope
        report.fits["l2_distance"] = fit_record(fit)
        report.verdicts["l2_slope_at_most_-0.45"] = fit.slope <= -0.45
    elif len(cfg["T"]) >= 3:
        # the exponential critical resolvent equals its limit exactly
        report.verdicts["l2_slope_at_most_-0.45"] = max(dists) <= 1e-12
    header = ["T", "regime", "l2_distance", "sup_psi", "fitted_slope", "error_estimate"]
    rows = [(T, cfg["regime"], d, rt.sup_psi, slope, rt.error_estimate)
            for T, d, rt in zip(cfg["T"], dists, tables)]
    report.rows = [dict(zip(header, r)) for r in rows]
    _write(out, "resolvent.csv", csv_text("resolvent", header, rows))
    last = tables[-1]
    step = max(1, (last.grid.size - 1) // 4096)
    plot = ["# t psi rho d"] + [" ".join(_fmt(float(v)) for v in (t, p, r, d)) for t, p, r, d in
                                zip(last.grid[::step], last.psi_values[::step], last.rho_values[::step],
                                    last.d_values[::step])]
    _write(out, "resolvent.plot.txt", "\n".join(plot) + "\n")
    return _finish(out, "resolvent", report, started)


def cmd_couple(cfg, out: Path, started: float) -> int:
    k = cfg["k"]
    rows = []
    report = ExperimentReport("couple-diagnostics", _config_echo("couple-diagnostics", cfg), cfg["seed"])
    pvals = []
    for T in cfg["T"]:
        xi, delta = cell_coupling_samples(T, k, cfg["reps"], cfg["seed"])
        sq = (xi - delta) ** 2
        p = float(stats.kstest(xi * k, "norm").pvalue)
        pvals.append(p)
        row = (T, k, float(np.mean(xi)), float(np.var(xi, ddof=1)), float(np.mean(sq)),
               float(np.std(sq, ddof=1) / math.sqrt(sq.size)), p)
        rows.append(row)
    header = ["T", "k", "xi_mean", "xi_var", "mean_sq_cell_diff", "stderr", "ks_pvalue"]
    report.rows = [dict(zip(header, r)) for r in rows]
    report.verdicts["ks_not_rejected_at_1pct"] = all(p >= 0.01 for p in pvals)
    if len(rows) >= 3:
        fit = fit_rate([r[0] for r in rows], [r[4] for r in rows], [r[5] for r in rows])
        report.fits["mean_sq_cell_diff"] = fit_record(fit)
        report.verdicts["slope_in_[-2.3,-1.7]"] = -2.3 <= fit.slope <= -1.7
    _write(out, "couple-diagnostics.csv", csv_text("couple_diagnostics", header, rows))
    return _finish(out, "couple-diagnostics", report, started)


def cmd_limit(cfg, out: Path, started: float) -> int:
    model = ModelConfig("exponential", 1.0 / cfg["m"], cfg["regime"], cfg["mu"])
    X = limit_samples(model, cfg["T"], cfg["reps"], cfg["seed"], cfg["driver"], cfg["k"], cfg["threads"])
    k = X.shape[1] - 1
    grid = np.arange(k + 1) / k
    rows = ((r, grid[j], X[r, j]) for r in range(X.shape[0]) for j in range(k + 1))
    _write(out, "limit.csv", csv_text("limit", ["replication", "t", "X"], rows))
    return _finish(out, "limit", None, started)


def cmd_rates(cfg, out: Path, started: float) -> int:
    report = ExperimentReport("rates", _config_echo("rates", cfg), cfg["seed"])
    cell = estimate_cell_coupling(cfg["T"], cfg["k"], cfg["reps"], cfg["seed"])
    rows = [("cell", T, cfg["k"], e.mean, e.stderr) for T, e in zip(cfg["T"], cell.estimates)]
    report.fits["cell_T"] = fit_record(cell.fit)
    report.verdicts["cell_slope_in_[-2.3,-1.7]"] = -2.3 <= cell.fit.slope <= -1.7

    T = cfg["integral-T"]
    k_list = cfg["k-list"] or [int(math.floor(T ** (1 / 3))), int(math.floor(T ** (2 / 3) + 1e-9)), int(T)]
    integ = estimate_integral_coupling(T, k_list, cfg["integral-reps"], seed=cfg["seed"],
                                       model=_model(cfg), threads=cfg["threads"])
    ys = [e.mean for e in integ.estimates]
    ses = [e.stderr for e in integ.estimates]
    shape = integral_envelope_shape(T, k_list)
    fit_idx = interleaved_half(len(k_list))
    env = check_envelope(ys, ses, shape, envelope_max_ratio(ys, shape, fit_idx), fit_idx)
    rows += [("integral", T, k, e.mean, e.stderr) for k, e in zip(k_list, integ.estimates)]
    report.fits["integral_envelope_constant"] = env.constant
    if len(k_list) == 3:
        report.verdicts["integral_interior_k_minimal"] = ys[1] <= min(ys[0], ys[2])
    report.verdicts["integral_within_envelope"] = env.passed
    report.verdicts["no_incomplete_replications"] = sum(integ.incomplete) == 0
    header = ["experiment", "T", "k", "estimate", "stderr"]
    report.rows = [dict(zip(header, r)) for r in rows]
    _write(out, "rates.csv", csv_text("rates", header, rows))
    _write(out, "rates.plot.txt", _plot_text(k_list, ys, ses, env.envelope))
    return _finish(out, "rates", report, started)


CONVERGE_QUANTITIES = ("intensity", "integrated", "counts", "martingale")


def cmd_converge(cfg, out: Path, started: float) -> int:
    report = ExperimentReport("converge", _config_echo("converge", cfg), cfg["seed"])
    res = estimate_convergence(_model(cfg), cfg["T"], cfg["reps"], cfg["seed"], threads=cfg["threads"])
    rows = []
    plot = []
    for name in CONVERGE_QUANTITIES:
        ests = getattr(res, name)
        for T, k, e, inc in zip(res.T_list, res.k_list, ests, res.incomplete):
            rows.append((name, T, k, e.mean, e.stderr, e.n, inc))
        if len(res.T_list) >= 2:
            dec, env = log_envelope_check(ests, res.T_list)
            report.verdicts[f"{name}_decreasing"] = dec
            report.verdicts[f"{name}_within_log_envelope"] = env.passed
            report.fits[f"{name}_log_constant"] = env.constant
            plot.append(f"# {name}\n" + _plot_text(res.T_list, [e.mean for e in ests],
                                                   [e.stderr for e in ests], env.envelope))
        if len(res.T_list) >= 3 and all(e.mean > 0 for e in ests):
            fit = res.fit(name)
            report.fits[f"{name}_vs_log_T"] = fit_record(fit)
    header = ["quantity", "T", "k", "estimate", "stderr", "replications", "incomplete"]
    report.rows = [dict(zip(header, r)) for r in rows]
    _write(out, "converge.csv", csv_text("converge", header, rows))
    if plot:
        _write(out, "converge.plot.txt", "\n".join(plot))
    return _finish(out, "converge", report, started)


def cmd_report(cfg, out: Path, started: float) -> int:
    src = Path(cfg["input"] or cfg["out"])
    files = sorted(p for p in src.glob("*.json") if not p.name.endswith(".meta.json"))
    if not files:
        raise UsageError(f"no reports in {src}")
    rows, ok = [], True
    for p in files:
        data = json.loads(p.read_text())
        for rule, verdict in sorted(data.get("verdicts", {}).items()):
            rows.append((data.get("experiment", p.stem), rule, "pass" if verdict else "fail"))
            ok = ok and bool(verdict)
    text = csv_text("report", ["experiment", "rule", "verdict"], rows)
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "resolvent": cmd_resolvent, "couple-diagnostics": cmd_couple,
            "limit": cmd_limit, "rates": cmd_rates, "converge": cmd_converge, "report": cmd_report}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        started = time.time()
        return COMMANDS[args.command](cfg, Path(cfg["out"]), started)
    except UsageError as exc:
        print(f"nearcrit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except NearCritError as exc:
        print(f"nearcrit {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
