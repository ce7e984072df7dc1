"""Command-line entry point.

Every run resolves its parameters (flags over config file over defaults),
validates them, writes ``manifest.json`` and then the report bundle. A
manifest can be replayed with ``logeuler replay path/to/manifest.json``.
Exit status: 0 success, 2 invalid input, 1 runtime failure.
"""

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import check_open_interval, check_positive
from .exceptions import ConfigurationError, DomainError, InconclusiveError, LogEulerError
from .experiments import (flow_convergence_experiment, lq_rate_experiment,
                          propagation_experiment, uniform_start_points, write_bundle,
                          write_json, yudovich_propagation_experiment)
from .field import GridSpec, ScalarField, lp_norm, mode, random_log_field, three_mode
from .io import read_field, write_csv, write_snapshot
from .seminorms import SeminormReport, hlog_fourier, hlog_physical, wlog_seminorm, xgp_seminorm
from .solver import SolverConfig, Trajectory, simulate
from .stochastic import EnsembleConfig, FlowEnsemble, backward_flow, feynman_kac

log = logging.getLogger("logeuler")

COMMAND_HELP = {
    "simulate": "evolve a datum and write norm diagnostics",
    "seminorm": "evaluate a logarithmic semi-norm of a datum",
    "propagation": "track W^2_{log,theta} or H^{log,p} growth along a solution",
    "inviscid-limit": "L^2 distance between viscous and inviscid solutions over a nu sweep",
    "lq-rate": "the same sweep measured in L^q",
    "flow-convergence": "mean-square distance between stochastic and deterministic flows",
    "feynman-kac": "Monte Carlo vorticity from backward flows vs the spectral solution",
}
COMMANDS = ("simulate", "seminorm", "propagation", "inviscid-limit", "lq-rate",
            "flow-convergence", "feynman-kac")

DEFAULT_INIT = {
    "simulate": "three-mode", "seminorm": "random", "propagation": "three-mode",
    "inviscid-limit": "random", "lq-rate": "random", "flow-convergence": "shear",
    "feynman-kac": "shear",
}


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _optional_int(v):
    return None if v in (None, "", "none", "None") else int(v)


def _optional_float(v):
    return None if v in (None, "", "none", "None") else float(v)


def _flag(v):
    if isinstance(v, bool):
        return v
    return str(v).strip().lower() in ("1", "true", "yes", "on")


# name -> (converter, default, help)
PARAMS = {
    "N": (int, 128, "grid size (even, >= 8)"),
    "nu": (float, 0.0, "viscosity"),
    "nu_list": (_float_list, "1e-2,1e-3,1e-4", "comma-separated decreasing viscosities"),
    "alpha": (float, 1.0, "logarithmic order of the datum / H^{log,alpha}"),
    "theta": (float, 0.5, "W^2_{log,theta} order, in (0,1)"),
    "gamma": (float, 0.5, "X^{gamma,p} order"),
    "p": (float, 2.0, "X^{gamma,p} exponent or Yudovich-propagation order"),
    "q": (float, 2.0, "L^q norm of the inviscid-limit error"),
    "T": (float, 1.0, "final time"),
    "t": (_optional_float, None, "evaluation time for feynman-kac (default T)"),
    "dt": (float, 1e-2, "time step"),
    "cfl": (float, 0.5, "CFL number"),
    "M": (int, 1000, "Monte Carlo samples"),
    "sde_dt": (_optional_float, None, "SDE step (default T/20)"),
    "seed": (int, 0, "master seed"),
    "kind": (str, None, "seminorm kind or propagation kind"),
    "init": (str, None, "shear | three-mode | zero | random | file:PATH"),
    "margin": (float, 0.1, "regularity margin of the random datum"),
    "kmax": (_optional_int, None, "band limit of the random datum (default N/3)"),
    "start_grid": (int, 16, "flow-convergence start points per side"),
    "interpolation": (str, "bilinear", "velocity interpolation for the SDE"),
    "snapshots": (_flag, False, "also write field snapshots"),
}


def _parser():
    parser = argparse.ArgumentParser(prog="logeuler", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="flat key-value or JSON config file")
    common.add_argument("--out", default=None, help="output directory (default $LOGEULER_OUT or .)")
    common.add_argument("--threads", type=int, default=None, help="worker thread cap")
    common.add_argument("-v", "--verbose", action="store_true")
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, parents=[common], help=COMMAND_HELP[cmd])
        for name, (_, default, text) in PARAMS.items():
            flag = "--" + name.replace("_", "-")
            if name == "snapshots":
                p.add_argument(flag, action="store_true", default=argparse.SUPPRESS, help=text)
            else:
                p.add_argument(flag, dest=name, default=argparse.SUPPRESS, help=text)
    rp = sub.add_parser("replay", parents=[common], help="re-run a manifest.json")
    rp.add_argument("manifest")
    return parser


def read_config(path):
    """Parse a flat config file: a JSON object or ``key = value`` lines."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc.strerror}") from exc
    text_stripped = text.strip()
    if text_stripped.startswith("{"):
        try:
            data = json.loads(text_stripped)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc.msg})") from exc
    else:
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            sep = "=" if "=" in line else ":"
            if sep not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value")
            key, value = line.split(sep, 1)
            data[key.strip()] = value.strip()
    out = {}
    for key, value in data.items():
        name = key.lstrip("-").replace("-", "_")
        if name not in PARAMS:
            raise ConfigurationError(f"{path}: unknown key {key!r}")
        out[name] = value
    return out


def resolve(command, flags, config_path=None):
    """Merge defaults < config file < flags and convert every value."""
    merged = {name: spec[1] for name, spec in PARAMS.items()}
    merged["kind"] = "wlog"
    merged["init"] = DEFAULT_INIT[command]
    if config_path:
        merged.update(read_config(config_path))
    merged.update(flags)
    params = {}
    for name, value in merged.items():
        conv = PARAMS[name][0]
        try:
            params[name] = conv(value) if value is not None else None
        except (TypeError, ValueError) as exc:
            raise DomainError(f"invalid value for {name}: {value!r}") from exc
    if command in ("inviscid-limit", "lq-rate", "flow-convergence"):
        params["nu_list"] = _float_list(params["nu_list"])
    else:
        params.pop("nu_list")
    if params["t"] is None:
        params["t"] = params["T"]
    if params["sde_dt"] is None:
        params["sde_dt"] = params["T"] / 20
    if params["kmax"] is None:
        params["kmax"] = params["N"] // 3
    return params


def validate(command, params):
    """Check every precondition before any compute starts."""
    GridSpec(params["N"])
    if params["nu"] < 0:
        raise DomainError("ν must be >= 0")
    check_positive(params["T"], "T")
    check_positive(params["dt"], "dt")
    check_positive(params["cfl"], "cfl")
    check_positive(params["margin"], "margin")
    if params["M"] < 1:
        raise DomainError("M must be >= 1")
    check_positive(params["sde_dt"], "sde_dt")
    if params["interpolation"] not in ("bilinear", "spectral"):
        raise DomainError("interpolation must be 'bilinear' or 'spectral'")
    init = params["init"]
    if init not in ("shear", "three-mode", "zero", "random") and not init.startswith("file:"):
        raise DomainError(f"unknown initial datum {init!r}")
    if init == "random" or command in ("inviscid-limit", "lq-rate"):
        check_positive(params["alpha"], "α")
    if command == "seminorm":
        kinds = ("wlog", "hlog-fourier", "hlog-physical", "xgp")
        if params["kind"] not in kinds:
            raise DomainError(f"kind must be one of {kinds}")
        if params["kind"] == "wlog":
            check_open_interval(params["theta"], 0.0, 1.0, "theta", symbol="θ")
        if params["kind"] == "xgp":
            check_positive(params["gamma"], "γ")
            check_positive(params["p"], "p")
    if command == "propagation":
        if params["kind"] not in ("wlog", "yudovich"):
            raise DomainError("propagation kind must be 'wlog' or 'yudovich'")
        if params["kind"] == "wlog":
            check_open_interval(params["theta"], 0.0, 1.0, "theta", symbol="θ")
        elif not params["p"] > 1:
            raise DomainError("p must be > 1")
    if command in ("inviscid-limit", "lq-rate", "flow-convergence"):
        nus = params["nu_list"]
        if len(nus) < 1 or any(not 0 < n < 1 for n in nus):
            raise DomainError("every ν in nu-list must lie in (0,1)")
        if any(b >= a for a, b in zip(nus, nus[1:])):
            raise DomainError("nu-list must be strictly decreasing")
    if command == "lq-rate" and not 1 <= params["q"] < math.inf:
        raise DomainError("q must lie in [1,∞)")
    if command == "flow-convergence" and params["start_grid"] < 1:
        raise DomainError("start-grid must be >= 1")
    if command == "feynman-kac":
        if params["nu"] <= 0:
            raise DomainError("feynman-kac needs ν > 0")
        if not 0 < params["t"] <= params["T"]:
            raise DomainError("t must lie in (0,T]")


def initial_datum(params):
    init, N = params["init"], params["N"]
    if init == "shear":
        return mode(N, (1, 0))
    if init == "three-mode":
        return three_mode(N)
    if init == "zero":
        return ScalarField(np.zeros((N, N)))
    if init == "random":
        return random_log_field(params["alpha"], params["margin"], params["seed"], N,
                                params["kmax"])
    f = read_field(init[len("file:"):])
    if f.N != N:
        raise ConfigurationError(f"{init}: file holds N={f.N}, run requests N={N}")
    return f


def _solver_config(params, **kw):
    base = SolverConfig(nu=params["nu"], dt=params["dt"], T=params["T"], cfl=params["cfl"])
    return replace(base, **kw) if kw else base


def _run_simulate(params, f, out, threads):
    traj = simulate(f, _solver_config(params))
    write_csv(out / "simulate.csv", Trajectory.DIAGNOSTIC_HEADER, traj.diagnostics)
    final = traj.snapshots[-1]
    write_json(out / "simulate.json", {
        "N": traj.N, "nu": params["nu"], "T": params["T"], "steps": traj.steps,
        "under_resolved": traj.under_resolved,
        "l2_drift": lp_norm(final, 2) / max(traj.diagnostics[0][1], 1e-300) - 1.0,
        "final": dict(zip(Trajectory.DIAGNOSTIC_HEADER, traj.diagnostics[-1]))})
    write_snapshot(out / "simulate_final.fld", final)
    if params["snapshots"]:
        write_snapshot(out / "simulate_all.fld", np.stack([s.values for s in traj.snapshots]))
    return 0


def _run_seminorm(params, f, out, threads):
    kind = params["kind"]
    if kind == "wlog":
        rep = wlog_seminorm(f, params["theta"])
    elif kind == "hlog-fourier":
        rep = hlog_fourier(f, params["alpha"])
    elif kind == "hlog-physical":
        rep = hlog_physical(f, params["alpha"])
    else:
        rep = xgp_seminorm(f, params["gamma"], params["p"])
    write_csv(out / "seminorm.csv", SeminormReport.CSV_HEADER, [rep.csv_row()])
    write_json(out / "seminorm.json", {"kind": rep.kind, "params": rep.params,
                                        "value": rep.value, "N": rep.N,
                                        "metadata": rep.metadata})
    return 0


def _run_propagation(params, f, out, threads):
    times = [params["T"] * (i + 1) / 10 for i in range(10)]
    cfg = _solver_config(params, nu=0.0)
    if params["kind"] == "wlog":
        rep = propagation_experiment(f, cfg, params["theta"], times)
    else:
        rep = yudovich_propagation_experiment(f, params["p"], params["T"], cfg, times)
    write_bundle(out, "propagation", rep)
    return 0


def _run_lq(params, f, out, threads, q=None):
    rep = lq_rate_experiment(f, params["alpha"], params["nu_list"], params["T"],
                             q if q is not None else params["q"],
                             _solver_config(params, nu=0.0), threads=threads)
    name = "inviscid_limit" if q is not None else "lq_rate"
    write_bundle(out, name, rep)
    if rep.under_resolved:
        log.warning("spectral tail above 1%: results outside the verified regime")
    return 0


def _run_flow(params, f, out, threads):
    rep = flow_convergence_experiment(
        f, params["nu_list"], params["T"], params["M"], _solver_config(params, nu=0.0),
        sde_dt=params["sde_dt"], seed=params["seed"],
        start_points=uniform_start_points(params["start_grid"]), threads=threads)
    write_bundle(out, "flow_convergence", rep)
    if len(rep.nus) >= 2 and rep.inconclusive:
        raise InconclusiveError("Monte Carlo standard error exceeds 25% of the smallest distance; "
                                "increase M")
    return 0


def _run_fk(params, f, out, threads):
    T, t = params["T"], params["t"]
    n_snap = max(1, math.ceil(T / params["sde_dt"] - 1e-9))
    times = tuple(T * (i + 1) / n_snap for i in range(n_snap))
    if not any(abs(s - t) <= 1e-12 * max(1.0, t) for s in times):
        times = tuple(sorted(set(times) | {t}))
    traj = simulate(f, _solver_config(params, snapshot_times=times))
    ens = backward_flow(traj, t, EnsembleConfig(M=params["M"], sde_dt=params["sde_dt"],
                                                seed=params["seed"],
                                                interpolation=params["interpolation"]))
    fk = feynman_kac(traj.initial, ens)
    ref = traj.at(t).values
    diff = fk.field.values - ref
    rms = float(np.sqrt(np.mean(diff ** 2)))
    x1, x2 = GridSpec(params["N"]).nodes()
    rows = zip(x1.ravel(), x2.ravel(), fk.field.values.ravel(), ref.ravel(), fk.stderr.ravel())
    write_csv(out / "feynman_kac.csv", ("x1", "x2", "mc_mean", "spectral", "stderr"), rows)
    write_json(out / "feynman_kac.json", {
        "N": params["N"], "nu": params["nu"], "t": t, "M": params["M"],
        "rms_error": rms, "mean_stderr": fk.mean_stderr,
        "error_in_stderr_units": rms / fk.mean_stderr if fk.has_error_estimate else None})
    write_snapshot(out / "feynman_kac_mean.fld", fk.field)
    write_csv(out / "feynman_kac_ensemble.csv", FlowEnsemble.SUMMARY_HEADER, ens.summary_rows())
    if params["snapshots"]:
        write_snapshot(out / "feynman_kac_ensemble.fld", ens.layers(), kind="ensemble")
    return 0


RUNNERS = {
    "simulate": _run_simulate,
    "seminorm": _run_seminorm,
    "propagation": _run_propagation,
    "inviscid-limit": lambda p, f, o, t: _run_lq(p, f, o, t, q=2.0),
    "lq-rate": _run_lq,
    "flow-convergence": _run_flow,
    "feynman-kac": _run_fk,
}


def _set_threads(threads):
    if threads is None:
        return 1
    if threads < 1:
        raise DomainError("threads must be >= 1")
    import numba
    numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    return threads


def manifest(command, params):
    return {"command": command, "params": params, "version": __version__}


def run(command, params, out, threads=None):
    """Validate, write the manifest and execute; returns the exit status."""
    validate(command, params)
    threads = _set_threads(threads)
    datum = initial_datum(params)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "manifest.json", manifest(command, params))
    return RUNNERS[command](params, datum, out, threads)


def _load_manifest(path):
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read manifest {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc.msg})") from exc
    if data.get("command") not in COMMANDS or not isinstance(data.get("params"), dict):
        raise ConfigurationError(f"{path}: not a run manifest")
    return data["command"], resolve(data["command"], data["params"])


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    out = args.out or os.environ.get("LOGEULER_OUT") or "."
    try:
        if args.command == "replay":
            command, params = _load_manifest(args.manifest)
        else:
            command = args.command
            flags = {k: v for k, v in vars(args).items() if k in PARAMS}
            params = resolve(command, flags, args.config)
        return run(command, params, out, args.threads)
    except ValueError as exc:
        print(f"logeuler: error: {exc}", file=sys.stderr)
        return 2
    except (LogEulerError, RuntimeError, FloatingPointError) as exc:
        print(f"logeuler: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
