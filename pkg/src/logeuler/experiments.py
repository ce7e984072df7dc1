"""Numerical experiments on solutions and flows, and their report bundles.

Each experiment returns a report dataclass; :func:`write_bundle` turns any
report into one CSV, a JSON summary and optional snapshots. Nothing in a
bundle depends on wall-clock time or thread count.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import DomainError
from .field import ScalarField, lp_norm
from .io import write_csv, write_snapshot
from .rates import RateFit, fit_rate
from .seminorms import default_h_grid, hlog_fourier, wlog_seminorm
from .solver import SolverConfig, simulate
from .stochastic import EnsembleConfig, backward_flow, flow_l2_distance, flow_l2_distance_stderr

INCONCLUSIVE_FRACTION = 0.25


def _map(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


@dataclass
class PropagationReport:
    """Semi-norm history along an Euler run against the propagation bound.

    ``c_hat[i]`` is the smallest constant C for which
    ``[w(t)]^2 <= [w0]^2 + C t |w0|_2 |w0|_4^2`` holds at ``times[i]``
    (0 at t = 0).
    """

    kind: str
    order: float
    N: int
    times: list
    seminorms: list
    c_hat: list
    bound: list
    tail_fraction: list
    argmax_h: list = field(default_factory=list)
    norms: dict = field(default_factory=dict)

    @property
    def sup_c_hat(self):
        return max(self.c_hat)

    @property
    def under_resolved(self):
        return any(tf > 0.01 for tf in self.tail_fraction)

    def rows(self):
        return list(zip(self.times, self.seminorms, self.c_hat, self.bound, self.tail_fraction))

    CSV_HEADER = ("t", "seminorm", "c_hat", "bound", "tail_fraction")

    def summary(self):
        return {"kind": self.kind, "order": self.order, "N": self.N,
                "sup_c_hat": self.sup_c_hat, "under_resolved": self.under_resolved,
                "norms": self.norms}


def _euler_config(config, times):
    times = tuple(sorted(float(t) for t in times if t > 0))
    T = max(times) if times else config.T
    return replace(config, nu=0.0, T=T, snapshot_times=times)


def propagation_experiment(omega0, config=None, theta=0.5, times=None, h_grid=None):
    """Track the W^2_{log,theta} semi-norm along an Euler run.

    The bound column is the right-hand side with the largest observed
    constant, ``[w0]^2 + sup(c_hat) t |w0|_2 |w0|_4^2``.
    """
    config = config or SolverConfig()
    times = times if times is not None else [0.1 * i for i in range(1, 11)]
    traj = simulate(omega0, _euler_config(config, times))
    w0 = traj.initial
    hs = h_grid or default_h_grid(w0.N)
    l2, l4 = lp_norm(w0, 2), lp_norm(w0, 4)
    scale = l2 * l4 ** 2
    reports = [wlog_seminorm(s, theta, hs) for s in traj.snapshots]
    sq = [r.value ** 2 for r in reports]
    c_hat = [0.0] + [(s - sq[0]) / (t * scale) if scale > 0 else 0.0
                     for t, s in zip(traj.times[1:], sq[1:])]
    sup = max(c_hat)
    bound = [sq[0] + sup * t * scale for t in traj.times]
    return PropagationReport(
        "wlog", theta, w0.N, list(traj.times), sq, c_hat, bound,
        [row[5] for row in traj.diagnostics], [r.metadata["argmax_h"] for r in reports],
        {"l2": l2, "l4": l4, "linf": lp_norm(w0, np.inf)})


def propagation_resolution_study(make_datum, Ns=(128, 256), config=None, theta=0.5, times=None):
    """Run :func:`propagation_experiment` at each N; ``make_datum(N)`` builds the datum."""
    return {N: propagation_experiment(make_datum(N), config, theta, times) for N in Ns}


def yudovich_propagation_experiment(omega0, p, T, config=None, times=None):
    """Track the Fourier H^{log,p} semi-norm against t^{p/2} |w0|_inf^{1+p/2} + [w0].

    ``c_hat`` is the smallest prefactor on the growth term,
    ``max(0, [w(t)] - [w0]) / (t^{p/2} |w0|_inf^{1+p/2})``, defined as 0 at t = 0.
    """
    p = float(p)
    if not p > 1:
        raise DomainError("p must be > 1")
    config = config or SolverConfig(T=T)
    times = times if times is not None else [T * (i + 1) / 10 for i in range(10)]
    traj = simulate(omega0, _euler_config(config, times))
    linf = lp_norm(traj.initial, np.inf)
    vals = [hlog_fourier(s, p).value for s in traj.snapshots]
    c_hat = [0.0]
    for t, v in zip(traj.times[1:], vals[1:]):
        growth = t ** (p / 2) * linf ** (1 + p / 2)
        c_hat.append(max(0.0, v - vals[0]) / growth if growth > 0 else 0.0)
    sup = max(c_hat)
    bound = [sup * t ** (p / 2) * linf ** (1 + p / 2) + vals[0] for t in traj.times]
    return PropagationReport("hlog-fourier", p, traj.N, list(traj.times), vals, c_hat, bound,
                             [row[5] for row in traj.diagnostics], [],
                             {"linf": linf, "l2": lp_norm(traj.initial, 2)})


@dataclass
class InviscidLimitReport:
    """Sweep of sup_t |w^nu(t) - w(t)|_{L^q} over viscosities."""

    alpha: float
    q: float
    rate_exponent: float
    nus: list
    errors: list
    products: list
    fit: RateFit
    tail_fraction: list
    N: int
    T: float

    CSV_HEADER = ("nu", "error", "error_times_log_rate", "tail_fraction")

    @property
    def c_hat(self):
        return max(self.products)

    @property
    def monotone(self):
        return all(b <= a for a, b in zip(self.errors, self.errors[1:]))

    @property
    def under_resolved(self):
        return any(tf > 0.01 for tf in self.tail_fraction)

    def rows(self):
        return list(zip(self.nus, self.errors, self.products, self.tail_fraction))

    def summary(self):
        return {"alpha": self.alpha, "q": self.q, "rate_exponent": self.rate_exponent,
                "c_hat": self.c_hat, "monotone": self.monotone,
                "under_resolved": self.under_resolved, "N": self.N, "T": self.T,
                "fit": {k: v for k, v in self.fit.as_dict().items() if k != "table"}}


def lq_rate_exponent(alpha, q):
    """min(alpha/2, alpha/q), the decay exponent of the L^q rate."""
    return min(alpha / 2.0, alpha / q)


def _sup_difference(a, b, q):
    return max(lp_norm(x.values - y.values, q) for x, y in zip(a.snapshots, b.snapshots))


def lq_rate_experiment(omega0, alpha, nu_list, T, q, config=None, times=None,
                       reference_nu=0.0, threads=1):
    """Viscosity sweep measured in L^q, bound-checked with exponent min(alpha/2, alpha/q)."""
    q = float(q)
    if not (1 <= q < math.inf):
        raise DomainError("q must lie in [1, inf)")
    alpha = float(alpha)
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    nus = [float(n) for n in nu_list]
    if any(n <= 0 or n >= 1 for n in nus):
        raise DomainError("viscosities must lie in (0, 1)")
    if any(b >= a for a, b in zip(nus, nus[1:])):
        raise DomainError("nu_list must be strictly decreasing")
    config = config or SolverConfig(T=T)
    times = tuple(times) if times is not None else tuple(T * (i + 1) / 20 for i in range(20))
    base = replace(config, T=T, snapshot_times=times)
    runs = _map(lambda nu: simulate(omega0, replace(base, nu=nu)),
                [reference_nu] + nus, threads)
    ref = runs[0]
    errors = [_sup_difference(r, ref, q) for r in runs[1:]]
    rate = lq_rate_exponent(alpha, q)
    products = [e * abs(math.log(nu)) ** rate for e, nu in zip(errors, nus)]
    tails = [max(row[5] for row in r.diagnostics) for r in runs[1:]]
    table = list(zip(nus, errors))
    if len(table) >= 3 and all(e > 0 for e in errors):
        fit = fit_rate(table, "loglog")
    else:
        fit = RateFit("loglog", float("nan"), float("nan"), float("nan"), table)
    return InviscidLimitReport(alpha, q, rate, nus, errors, products, fit, tails, ref.N, T)


def inviscid_limit_experiment(omega0, alpha, nu_list, T, config=None, times=None,
                              reference_nu=0.0, threads=1):
    """L^2 viscosity sweep; the bound check uses |log nu|^(alpha/2)."""
    return lq_rate_experiment(omega0, alpha, nu_list, T, 2.0, config, times, reference_nu, threads)


def shear_inviscid_error(nu, T):
    """Exact sup_t |w^nu - w|_{L^2} for w0 = cos(2 pi x1)."""
    return (1.0 - math.exp(-4 * math.pi ** 2 * nu * T)) / math.sqrt(2.0)


@dataclass
class FlowConvergenceReport:
    nus: list
    distances: list
    stderrs: list
    fit: RateFit
    T: float
    M: int

    CSV_HEADER = ("nu", "distance", "stderr")

    @property
    def monotone(self):
        return all(b < a for a, b in zip(self.distances, self.distances[1:]))

    @property
    def inconclusive(self):
        return any(se > INCONCLUSIVE_FRACTION * d for d, se in zip(self.distances, self.stderrs))

    def rows(self):
        return list(zip(self.nus, self.distances, self.stderrs))

    def summary(self):
        return {"T": self.T, "M": self.M, "monotone": self.monotone,
                "inconclusive": self.inconclusive,
                "fit": {k: v for k, v in self.fit.as_dict().items() if k != "table"}}


def uniform_start_points(n):
    """n x n cell-centred start points."""
    x = (np.arange(n) + 0.5) / n
    a, b = np.meshgrid(x, x, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


def flow_convergence_experiment(omega0, nu_list, T, M, config=None, sde_dt=None, seed=0,
                                start_points=None, threads=1):
    """Distance between stochastic and deterministic flows over a viscosity sweep."""
    nus = [float(n) for n in nu_list]
    if any(n <= 0 for n in nus):
        raise DomainError("viscosities must be positive")
    sde_dt = sde_dt or T / 20
    n_snap = max(1, math.ceil(T / sde_dt - 1e-9))
    times = tuple(T * (i + 1) / n_snap for i in range(n_snap))
    config = replace(config or SolverConfig(T=T), T=T, snapshot_times=times)
    pts = uniform_start_points(16) if start_points is None else np.asarray(start_points, float)
    ens_cfg = EnsembleConfig(M=int(M), sde_dt=sde_dt, seed=seed, start_points=pts)
    euler = simulate(omega0, replace(config, nu=0.0))
    flow0 = backward_flow(euler, T, replace(ens_cfg, M=1))

    def one(nu):
        traj = simulate(omega0, replace(config, nu=nu))
        ens = backward_flow(traj, T, ens_cfg)
        return flow_l2_distance(ens, flow0), flow_l2_distance_stderr(ens, flow0)

    results = _map(one, nus, threads)
    d = [r[0] for r in results]
    se = [r[1] for r in results]
    fit = fit_rate(list(zip(nus, d)), "power") if len(nus) >= 3 else \
        RateFit("power", float("nan"), float("nan"), float("nan"), list(zip(nus, d)))
    return FlowConvergenceReport(nus, d, se, fit, T, int(M))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path, payload):
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def write_bundle(outdir, name, report, snapshots=None):
    """Write ``<name>.csv``, ``<name>.json`` and optional ``<name>_<i>.fld`` files."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f"{name}.csv", report.CSV_HEADER, report.rows())
    write_json(out / f"{name}.json", report.summary())
    written = [out / f"{name}.csv", out / f"{name}.json"]
    for i, snap in enumerate(snapshots or []):
        p = out / f"{name}_{i:03d}.fld"
        write_snapshot(p, snap if not isinstance(snap, ScalarField) else snap.values)
        written.append(p)
    return written
