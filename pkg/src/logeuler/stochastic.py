"""Backward stochastic Lagrangian flows and the Feynman-Kac reconstruction.

The backward SDE ``dX_{t,s} = u(s, X_{t,s}) ds + sqrt(2 nu) dW_s``, ``X_{t,t} = x``
is integrated in the reversed time ``tau = t - s`` with the drift sign
flipped. Every Gaussian increment comes from a Philox counter keyed by
(point, sample, step), so ensembles are bit-identical under any partition of
the work.
"""

import math
from dataclasses import dataclass

import numba
import numpy as np

from .exceptions import ConfigurationError, DomainError, InsufficientDataError
from .field import GridSpec, ScalarField, biot_savart, geodesic_distance, sample_bilinear
from .rng import philox_normal_pair, seed_to_key

GAP_FACTOR = 10.0
_BLOCK = 256


@dataclass(frozen=True)
class EnsembleConfig:
    M: int = 1000
    sde_dt: float = 1e-2
    seed: int = 0
    interpolation: str = "bilinear"
    start_points: object = None

    def __post_init__(self):
        if int(self.M) < 1:
            raise DomainError("M must be >= 1")
        if not self.sde_dt > 0:
            raise DomainError("sde_dt must be positive")
        if self.interpolation not in ("bilinear", "spectral"):
            raise DomainError("interpolation must be 'bilinear' or 'spectral'")


@dataclass
class FlowEnsemble:
    """Terminal positions ``X_{t,0}(x; j)`` shaped (points, M, 2), in [0,1)^2."""

    positions: np.ndarray
    start_points: np.ndarray
    t: float
    nu: float
    M: int
    seed: int
    N: int = None

    @property
    def on_full_grid(self):
        return self.N is not None and self.start_points.shape[0] == self.N * self.N

    def displacements(self):
        d = self.positions - self.start_points[:, None, :]
        return d - np.round(d)

    SUMMARY_HEADER = ("x1", "x2", "mean_x1", "mean_x2", "var", "M")

    def layers(self):
        """Positions as (2M, N, N) layers, X1 then X2 for each sample (full grid only)."""
        if not self.on_full_grid:
            raise ConfigurationError("layer export needs the full grid of start points")
        pos = self.positions.reshape(self.N, self.N, self.M, 2)
        return np.ascontiguousarray(pos.transpose(2, 3, 0, 1).reshape(2 * self.M, self.N, self.N))

    def summary_rows(self):
        """(x1, x2, mean X1, mean X2, var, M) per start point."""
        d = self.displacements()
        mean = (self.start_points + d.mean(axis=1)) % 1.0
        var = d.var(axis=1).sum(axis=-1) if self.M > 1 else np.zeros(len(d))
        return [(x[0], x[1], m[0], m[1], v, self.M)
                for x, m, v in zip(self.start_points, mean, var)]


def grid_points(N):
    x1, x2 = GridSpec(N).nodes()
    return np.column_stack([x1.ravel(), x2.ravel()])


def _time_weights(times, s):
    """Snapshot interval index and linear weight for each time in ``s``."""
    i = np.clip(np.searchsorted(times, s, side="right") - 1, 0, times.size - 2)
    w = np.clip((s - times[i]) / (times[i + 1] - times[i]), 0.0, 1.0)
    return i.astype(np.int64), w


@numba.njit(cache=True)
def _bilinear_velocity(vel, i, w, x, y):
    N = vel.shape[2]
    sx = x * N
    sy = y * N
    ix = int(math.floor(sx))
    iy = int(math.floor(sy))
    a = sx - ix
    b = sy - iy
    ix %= N
    iy %= N
    jx = (ix + 1) % N
    jy = (iy + 1) % N
    c00 = (1 - a) * (1 - b)
    c10 = a * (1 - b)
    c01 = (1 - a) * b
    c11 = a * b
    lo0 = c00 * vel[i, 0, ix, iy] + c10 * vel[i, 0, jx, iy] + c01 * vel[i, 0, ix, jy] + c11 * vel[i, 0, jx, jy]
    hi0 = (c00 * vel[i + 1, 0, ix, iy] + c10 * vel[i + 1, 0, jx, iy]
           + c01 * vel[i + 1, 0, ix, jy] + c11 * vel[i + 1, 0, jx, jy])
    lo1 = c00 * vel[i, 1, ix, iy] + c10 * vel[i, 1, jx, iy] + c01 * vel[i, 1, ix, jy] + c11 * vel[i, 1, jx, jy]
    hi1 = (c00 * vel[i + 1, 1, ix, iy] + c10 * vel[i + 1, 1, jx, iy]
           + c01 * vel[i + 1, 1, ix, jy] + c11 * vel[i + 1, 1, jx, jy])
    return (1 - w) * lo0 + w * hi0, (1 - w) * lo1 + w * hi1


@numba.njit(cache=True)
def _spectral_velocity(modes, coefs, i, w, x, y):
    """Velocity from a sparse Fourier series: coefs (S, 2, K) complex, modes (K, 2)."""
    u0 = 0.0
    u1 = 0.0
    for m in range(modes.shape[0]):
        ph = 2.0 * math.pi * (modes[m, 0] * x + modes[m, 1] * y)
        cr = math.cos(ph)
        ci = math.sin(ph)
        c0 = (1 - w) * coefs[i, 0, m] + w * coefs[i + 1, 0, m]
        c1 = (1 - w) * coefs[i, 1, m] + w * coefs[i + 1, 1, m]
        u0 += c0.real * cr - c0.imag * ci
        u1 += c1.real * cr - c1.imag * ci
    return u0, u1


@numba.njit(cache=True, inline="always")
def _velocity(use_spectral, vel, modes, coefs, i, w, x, y):
    if use_spectral:
        return _spectral_velocity(modes, coefs, i, w, x, y)
    return _bilinear_velocity(vel, i, w, x, y)


@numba.njit(cache=True, parallel=True)
def _integrate(starts, M, delta, si, sw, mi, mw, vel, modes, coefs, use_spectral,
               noise, k0, k1, out):
    P = starts.shape[0]
    n_steps = si.size
    sq = noise * math.sqrt(delta)
    for p in numba.prange(P):
        for j in range(M):
            x = starts[p, 0]
            y = starts[p, 1]
            for n in range(n_steps):
                ux, uy = _velocity(use_spectral, vel, modes, coefs, si[n], sw[n], x, y)
                if noise > 0.0:
                    z1, z2 = philox_normal_pair(p, j, n, 0, k0, k1)
                    x = x - ux * delta + sq * z1
                    y = y - uy * delta + sq * z2
                else:
                    xm = x - 0.5 * delta * ux
                    ym = y - 0.5 * delta * uy
                    vx, vy = _velocity(use_spectral, vel, modes, coefs, mi[n], mw[n], xm, ym)
                    x = x - delta * vx
                    y = y - delta * vy
                x -= math.floor(x)
                y -= math.floor(y)
            out[p, j, 0] = x
            out[p, j, 1] = y


def _sparse_modes(traj, idx, tol=1e-14):
    """Nonzero velocity modes of the selected snapshots."""
    stack = []
    for i in idx:
        u = biot_savart(traj.snapshots[i], tol=1e-10)
        stack.append((u.u1.spectrum.coefficients, u.u2.spectrum.coefficients))
    amp = np.zeros(stack[0][0].shape)
    for a, b in stack:
        amp = np.maximum(amp, np.maximum(np.abs(a), np.abs(b)))
    keep = amp > tol * max(amp.max(), 1e-300)
    k1, k2 = traj.snapshots[0].grid.wavenumbers
    modes = np.column_stack([k1[keep], k2[keep]]).astype(np.float64)
    coefs = np.array([[a[keep], b[keep]] for a, b in stack], dtype=np.complex128)
    return modes, coefs


def backward_flow(traj, t, config):
    """Sample ``X_{t,0}(x)`` for every start point and sample.

    nu = 0 reduces to deterministic midpoint (RK2) characteristics; the M
    identical samples then share memory.
    """
    t = float(t)
    times = np.asarray(traj.times, dtype=float)
    if t < 0 or t > times[-1] * (1 + 1e-12):
        raise InsufficientDataError(f"trajectory covers [0, {times[-1]}], requested t={t}")
    upto = int(np.searchsorted(times, t - 1e-12 * max(1.0, t))) + 1
    idx = list(range(min(max(upto, 2), len(times))))
    if len(idx) < 2:
        raise InsufficientDataError("need at least two snapshots")
    gaps = np.diff(times[idx])
    if gaps.max() > GAP_FACTOR * config.sde_dt * (1 + 1e-9):
        raise InsufficientDataError(
            f"snapshot gap {gaps.max():g} exceeds {GAP_FACTOR:g} x sde_dt = {GAP_FACTOR * config.sde_dt:g}")
    N = traj.N
    starts = grid_points(N) if config.start_points is None else \
        np.ascontiguousarray(np.asarray(config.start_points, dtype=float).reshape(-1, 2) % 1.0)
    nu = float(traj.config.nu)
    M = int(config.M)
    n_steps = max(1, math.ceil(t / config.sde_dt - 1e-9)) if t > 0 else 0
    delta = t / n_steps if n_steps else 0.0
    sub_times = np.ascontiguousarray(times[idx])
    use_spectral = config.interpolation == "spectral"
    if use_spectral:
        modes, coefs = _sparse_modes(traj, idx)
        vel = np.zeros((2, 2, 2, 2))
    else:
        vel = traj.velocity_stack(idx)
        modes, coefs = np.zeros((0, 2)), np.zeros((2, 2, 0), dtype=np.complex128)
    k0, k1 = seed_to_key(config.seed)
    samples = M if nu > 0 else 1
    s_now = t - delta * np.arange(n_steps)
    si, sw = _time_weights(sub_times, s_now)
    mi, mw = _time_weights(sub_times, s_now - 0.5 * delta)
    out = np.empty((starts.shape[0], samples, 2))
    _integrate(starts, samples, delta, si, sw, mi, mw, vel, modes, coefs,
               use_spectral, math.sqrt(2.0 * nu), k0, k1, out)
    if samples != M:
        out = np.broadcast_to(out, (starts.shape[0], M, 2))
    return FlowEnsemble(out, starts, t, nu, M, int(config.seed),
                        N if config.start_points is None else None)


@dataclass
class FeynmanKacResult:
    field: ScalarField
    stderr: np.ndarray
    M: int

    @property
    def has_error_estimate(self):
        return self.M >= 2

    @property
    def mean_stderr(self):
        return float(np.mean(self.stderr))


def feynman_kac(omega0, ens):
    """Monte Carlo average of ``omega0(X_{t,0}(x; j))`` with per-point standard errors."""
    if not ens.on_full_grid:
        raise ConfigurationError("Feynman-Kac reconstruction needs the full grid of start points")
    if not isinstance(omega0, ScalarField):
        omega0 = ScalarField(omega0)
    if omega0.N != ens.N:
        raise ConfigurationError("datum and ensemble grids differ")
    P = ens.positions.shape[0]
    mean = np.empty(P)
    err = np.full(P, np.nan)
    v = omega0.values
    for b in range(0, P, _BLOCK):
        vals = sample_bilinear(v, ens.positions[b:b + _BLOCK])
        mean[b:b + _BLOCK] = vals.mean(axis=1)
        if ens.M >= 2:
            err[b:b + _BLOCK] = vals.std(axis=1, ddof=1) / math.sqrt(ens.M)
    N = ens.N
    return FeynmanKacResult(ScalarField(mean.reshape(N, N)), err.reshape(N, N), ens.M)


def flow_l2_distance(ens_nu, flow_0):
    """Mean over start points and samples of the squared geodesic distance."""
    if ens_nu.start_points.shape != flow_0.start_points.shape or \
            not np.array_equal(ens_nu.start_points, flow_0.start_points):
        raise ConfigurationError("ensembles have different start points")
    if flow_0.nu != 0:
        raise ConfigurationError("the reference flow must be deterministic (nu = 0)")
    if abs(ens_nu.t - flow_0.t) > 1e-12:
        raise ConfigurationError("ensembles were integrated to different times")
    ref = flow_0.positions[:, :1, :]
    total = 0.0
    P = ens_nu.positions.shape[0]
    for b in range(0, P, _BLOCK):
        d = geodesic_distance(ens_nu.positions[b:b + _BLOCK], ref[b:b + _BLOCK])
        total += float(np.sum(d * d))
    return total / (P * ens_nu.M)


def flow_l2_distance_stderr(ens_nu, flow_0):
    """Standard error of :func:`flow_l2_distance` treating all paths as independent."""
    ref = flow_0.positions[:, :1, :]
    d2 = geodesic_distance(ens_nu.positions, ref) ** 2
    return float(d2.std(ddof=1) / math.sqrt(d2.size)) if d2.size > 1 else float("nan")
