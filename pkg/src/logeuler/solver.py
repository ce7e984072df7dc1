"""Pseudo-spectral vorticity solver for 2D Euler (nu = 0) and Navier-Stokes.

The state is held as half-plane (rfft) coefficients in the unit-torus
normalisation. Time stepping is classical RK4 applied under the exact
integrating factor exp(-nu (2 pi |k|)^2 t), so the diffusion term is
integrated without error and the step size is governed by advection only.
The quadratic term is dealiased by the two-thirds rule.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .exceptions import DomainError, InstabilityError, PreconditionError, StepSizeError
from .field import GridSpec, ScalarField, Spectrum, biot_savart, lp_norm

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e3
TAIL_FLAG_FRACTION = 0.01


@dataclass(frozen=True)
class SolverConfig:
    """Time-integration settings.

    ``snapshot_times`` defaults to 20 uniform times in (0, T]; t = 0 is always
    recorded.
    """

    nu: float = 0.0
    dt: float = 1e-2
    T: float = 1.0
    dealias: bool = True
    cfl: float = 0.5
    snapshot_times: tuple = None

    def __post_init__(self):
        if self.nu < 0:
            raise DomainError("nu must be >= 0")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not self.T >= 0:
            raise DomainError("T must be >= 0")
        if not self.cfl > 0:
            raise DomainError("cfl must be positive")
        times = self.snapshot_times
        if times is None:
            times = tuple(self.T * (i + 1) / 20 for i in range(20)) if self.T > 0 else ()
        times = tuple(float(t) for t in times)
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError("snapshot_times must be strictly increasing")
        if times and (times[0] < 0 or times[-1] > self.T * (1 + 1e-12)):
            raise DomainError("snapshot_times must lie within [0, T]")
        object.__setattr__(self, "snapshot_times", times)


class _Ops:
    """Spectral operators on an N x N grid in rfft layout."""

    def __init__(self, N, dealias=True):
        self.N = N
        k1 = np.fft.fftfreq(N, 1.0 / N)[:, None]
        k2 = np.fft.rfftfreq(N, 1.0 / N)[None, :]
        self.k1 = np.broadcast_to(k1, (N, N // 2 + 1))
        self.k2 = np.broadcast_to(k2, (N, N // 2 + 1))
        ksq = self.k1 ** 2 + self.k2 ** 2
        nyq = (np.abs(self.k1) == N // 2) | (np.abs(self.k2) == N // 2)
        inv = np.zeros_like(ksq)
        inv[ksq > 0] = 1.0 / (2 * np.pi * ksq[ksq > 0])
        inv[nyq] = 0.0
        self.stream = 1j * inv
        self.d1 = np.where(nyq, 0.0, 2j * np.pi * self.k1)
        self.d2 = np.where(nyq, 0.0, 2j * np.pi * self.k2)
        self.lap = (2 * np.pi) ** 2 * ksq
        if dealias:
            cut = N / 3.0
            self.mask = (np.abs(self.k1) <= cut) & (np.abs(self.k2) <= cut)
        else:
            self.mask = np.ones(ksq.shape, dtype=bool)
        self.mask[0, 0] = False
        tail_cut = 2.0 * N / 9.0 if dealias else N / 3.0
        self.tail = np.maximum(np.abs(self.k1), np.abs(self.k2)) > tail_cut

    def to_physical(self, c):
        return sfft.irfft2(c, s=(self.N, self.N), norm="forward")

    def to_spectral(self, v):
        return sfft.rfft2(v, norm="forward")

    def velocity(self, w):
        psi = self.stream * w
        return self.to_physical(-self.k2 * psi), self.to_physical(self.k1 * psi)

    def nonlinear(self, w):
        """Spectrum of u . grad(omega) and max |u| over the grid."""
        u1, u2 = self.velocity(w)
        adv = u1 * self.to_physical(self.d1 * w) + u2 * self.to_physical(self.d2 * w)
        umax = float(np.sqrt(np.max(u1 * u1 + u2 * u2)))
        return self.to_spectral(adv) * self.mask, umax


_OPS_CACHE = {}


def _ops(N, dealias):
    key = (N, dealias)
    if key not in _OPS_CACHE:
        _OPS_CACHE[key] = _Ops(N, dealias)
    return _OPS_CACHE[key]


def _to_half(spec):
    return np.ascontiguousarray(spec.coefficients[:, : spec.N // 2 + 1])


def _from_half(c, grid):
    ops = _ops(grid.N, True)
    return ScalarField(ops.to_physical(c), grid)


def nonlinear_term(omega, dealias=True):
    """Spectrum of the transport term u . grad(omega), u = biot_savart(omega)."""
    spec = omega.spectrum if isinstance(omega, ScalarField) else omega
    if abs(spec.mean) > 1e-12 * max(1.0, float(np.max(np.abs(spec.coefficients)))):
        raise PreconditionError("vorticity must have zero mean")
    ops = _ops(spec.N, dealias)
    nl, _ = ops.nonlinear(_to_half(spec))
    return _from_half(nl, spec.grid).spectrum


def _rk4_if(ops, w, h, nu, k1=None):
    """One integrating-factor RK4 step of dw/dt = -NL(w) - nu lap w."""
    if k1 is None:
        k1 = -ops.nonlinear(w)[0]
    if nu > 0:
        e_half = np.exp(-nu * ops.lap * (h / 2))
        e_full = e_half * e_half
    else:
        e_half = e_full = 1.0
    k2 = -ops.nonlinear(e_half * (w + (h / 2) * k1))[0]
    k3 = -ops.nonlinear(e_half * w + (h / 2) * k2)[0]
    k4 = -ops.nonlinear(e_full * w + h * e_half * k3)[0]
    out = e_full * (w + (h / 6) * k1) + (h / 3) * e_half * (k2 + k3) + (h / 6) * k4
    out[0, 0] = 0.0
    return out


def step(omega, config, N=None):
    """Advance a spectrum by one step of ``config.dt``.

    Raises :class:`StepSizeError` when dt exceeds the CFL bound.
    """
    spec = omega.spectrum if isinstance(omega, ScalarField) else omega
    ops = _ops(spec.N, config.dealias)
    w = _to_half(spec)
    nl, umax = ops.nonlinear(w)
    if config.dt * umax * spec.N > config.cfl:
        raise StepSizeError(
            f"dt={config.dt} exceeds CFL bound {config.cfl / (spec.N * umax):.3g}")
    return _from_half(_rk4_if(ops, w, config.dt, config.nu, k1=-nl), spec.grid).spectrum


@dataclass
class Trajectory:
    """Snapshots and diagnostics of one run.

    ``diagnostics`` rows are (t, L2, L4, Linf, energy, tail_fraction).
    """

    config: SolverConfig
    initial: ScalarField
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    steps: int = 0

    DIAGNOSTIC_HEADER = ("t", "l2", "l4", "linf", "energy", "tail_fraction")

    @property
    def N(self):
        return self.initial.N

    @property
    def under_resolved(self):
        return any(row[5] > TAIL_FLAG_FRACTION for row in self.diagnostics)

    def at(self, t):
        """Snapshot recorded at time ``t``."""
        for ti, snap in zip(self.times, self.snapshots):
            if abs(ti - t) <= 1e-12 * max(1.0, abs(t)):
                return snap
        raise KeyError(f"no snapshot at t={t}")

    def velocity_stack(self, indices=None):
        """Velocity snapshots as an array (n_snapshots, 2, N, N)."""
        indices = range(len(self.snapshots)) if indices is None else list(indices)
        out = np.empty((len(indices), 2, self.N, self.N))
        for i, k in enumerate(indices):
            u = biot_savart(self.snapshots[k], tol=1e-10)
            out[i, 0] = u.u1.values
            out[i, 1] = u.u2.values
        return out

    def diagnostics_rows(self):
        return [tuple(row[:5]) for row in self.diagnostics]


def _diagnostics(t, field_, ops):
    spec = field_.spectrum
    c = spec.coefficients
    ksq = field_.grid.kmag ** 2
    energy = 0.5 * float(np.sum(np.abs(c[ksq > 0]) ** 2 / (4 * np.pi ** 2 * ksq[ksq > 0])))
    total = spec.energy()
    half = np.abs(c[:, : field_.N // 2 + 1]) ** 2
    weight = np.full(half.shape, 2.0)
    weight[:, 0] = 1.0
    weight[:, -1] = 1.0
    tail = float(np.sum((weight * half)[ops.tail]) / total) if total > 0 else 0.0
    return (t, lp_norm(field_, 2), lp_norm(field_, 4), lp_norm(field_, np.inf), energy, tail)


def simulate(omega0, config):
    """Integrate from ``omega0`` to ``config.T`` and record snapshots.

    With dealiasing on, the initial datum is first truncated to the retained
    band, so the trajectory starts from its Galerkin projection.
    """
    if not isinstance(omega0, ScalarField):
        omega0 = ScalarField(omega0)
    if abs(omega0.spectrum.mean) > 1e-12 * max(1.0, float(np.max(np.abs(omega0.values)))):
        raise PreconditionError("initial vorticity must have zero mean")
    N = omega0.N
    grid = GridSpec(N)
    ops = _ops(N, config.dealias)
    w = _to_half(omega0.spectrum).copy()
    w[0, 0] = 0.0
    if config.dealias:
        w = w * ops.mask
    start = ScalarField(ops.to_physical(w), grid)
    traj = Trajectory(config, start)
    traj.times.append(0.0)
    traj.snapshots.append(start)
    traj.diagnostics.append(_diagnostics(0.0, start, ops))
    linf0 = traj.diagnostics[0][3]

    def advance(w, h):
        nl, umax = ops.nonlinear(w)
        if h * umax * N > config.cfl:
            m = math.ceil(h * umax * N / config.cfl)
            for _ in range(m):
                w = advance(w, h / m)
            return w
        traj.steps += 1
        return _rk4_if(ops, w, h, config.nu, k1=-nl)

    t = 0.0
    for target in config.snapshot_times:
        if target <= t:
            continue
        n = max(1, math.ceil((target - t) / config.dt - 1e-9))
        h = (target - t) / n
        for _ in range(n):
            w = advance(w, h)
            if not np.all(np.isfinite(w)):
                raise InstabilityError(f"non-finite vorticity before t={target}")
        t = target
        snap = ScalarField(ops.to_physical(w), grid)
        row = _diagnostics(t, snap, ops)
        if row[3] > BLOWUP_FACTOR * max(linf0, 1e-300) and linf0 > 0:
            raise InstabilityError(f"|omega|_inf grew beyond {BLOWUP_FACTOR:g} x initial at t={t}")
        traj.times.append(t)
        traj.snapshots.append(snap)
        traj.diagnostics.append(row)
    if traj.under_resolved:
        log.info("trajectory N=%d nu=%g under-resolved: spectral tail above %.0f%%",
                 N, config.nu, 100 * TAIL_FLAG_FRACTION)
    return traj
