"""Periodic fields on the unit torus [0,1)^2.

Fourier convention: ``f(x) = sum_k fhat(k) exp(2 pi i k.x)`` with integer
wavenumbers, so ``fhat = fft2(f) / N**2`` and Parseval carries no factors of
2 pi. Grid node ``values[i, j]`` sits at ``x = (i / N, j / N)``; axis 0 is the
first coordinate.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._validation import check_grid_values, check_positive
from .exceptions import DomainError, InvalidFieldError, PreconditionError
from .rng import philox4x32, seed_to_key, uniform_open

ZERO_MEAN_TOL = 1e-13


@dataclass(frozen=True)
class GridSpec:
    """Uniform N x N grid on the unit torus."""

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 8 or self.N % 2:
            raise DomainError(f"N must be an even integer >= 8, got {self.N}")

    @property
    def spacing(self):
        return 1.0 / self.N

    @cached_property
    def wavenumbers(self):
        """Integer wavenumbers (k1, k2) in numpy FFT order, each (N, N)."""
        k = np.fft.fftfreq(self.N, 1.0 / self.N)
        return np.meshgrid(k, k, indexing="ij")

    @cached_property
    def kmag(self):
        k1, k2 = self.wavenumbers
        return np.hypot(k1, k2)

    @cached_property
    def displacements(self):
        """Geodesic displacement (d1, d2) of each grid shift, components in [-1/2, 1/2)."""
        d = (((np.arange(self.N) + self.N // 2) % self.N) - self.N // 2) / self.N
        return np.meshgrid(d, d, indexing="ij")

    @cached_property
    def shift_radius(self):
        """Geodesic length |z| of each grid shift."""
        d1, d2 = self.displacements
        return np.hypot(d1, d2)

    def nodes(self):
        x = np.arange(self.N) / self.N
        return np.meshgrid(x, x, indexing="ij")


def geodesic_distance(x, y):
    """Distance on the unit torus between points of shape (..., 2)."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    d -= np.round(d)
    return np.hypot(d[..., 0], d[..., 1])


class Spectrum:
    """Fourier coefficients of a periodic field in numpy FFT order."""

    def __init__(self, coefficients, grid=None):
        coefficients = np.asarray(coefficients, dtype=np.complex128)
        if coefficients.ndim != 2 or coefficients.shape[0] != coefficients.shape[1]:
            raise InvalidFieldError(f"bad spectrum shape {coefficients.shape}")
        if not np.all(np.isfinite(coefficients)):
            raise InvalidFieldError("spectrum contains non-finite coefficients")
        self.grid = grid or GridSpec(coefficients.shape[0])
        coefficients.setflags(write=False)
        self.coefficients = coefficients

    @property
    def N(self):
        return self.grid.N

    def __getitem__(self, k):
        """Coefficient at integer wavevector ``k = (k1, k2)``."""
        return self.coefficients[k[0] % self.N, k[1] % self.N]

    @property
    def mean(self):
        return self.coefficients[0, 0]

    def energy(self):
        """sum_k |fhat(k)|^2, the squared L2 norm by Parseval."""
        return float(np.sum(np.abs(self.coefficients) ** 2))

    def hermitian_defect(self):
        """max |fhat(-k) - conj(fhat(k))|; zero for spectra of real fields."""
        c = self.coefficients
        flipped = np.roll(c[::-1, ::-1], 1, axis=(0, 1))
        return float(np.max(np.abs(flipped - np.conj(c))))

    def to_csv(self, path):
        k1, k2 = self.grid.wavenumbers
        c = self.coefficients
        rows = np.column_stack([k1.ravel(), k2.ravel(), c.real.ravel(), c.imag.ravel()])
        np.savetxt(path, rows, delimiter=",", header="k1,k2,re,im", comments="",
                   fmt=["%d", "%d", "%.17g", "%.17g"])


class ScalarField:
    """Real samples on the grid with a lazily cached spectrum.

    Instances are immutable; the sample array is marked read-only.
    """

    def __init__(self, values, grid=None):
        values = check_grid_values(values).copy()
        self.grid = grid or GridSpec(values.shape[0])
        if self.grid.N != values.shape[0]:
            raise InvalidFieldError("grid size does not match values")
        values.setflags(write=False)
        self.values = values

    @classmethod
    def from_function(cls, func, N):
        grid = GridSpec(N)
        x1, x2 = grid.nodes()
        return cls(np.broadcast_to(func(x1, x2), (N, N)), grid)

    @property
    def N(self):
        return self.grid.N

    @cached_property
    def spectrum(self):
        # cached_property may run twice under a race; both results are identical.
        return forward_transform(self)

    @property
    def is_zero_mean(self):
        return abs(self.spectrum.mean) <= ZERO_MEAN_TOL

    def zero_mean(self):
        return ScalarField(self.values - self.values.mean(), self.grid)

    def __add__(self, other):
        return ScalarField(self.values + _values(other), self.grid)

    def __sub__(self, other):
        return ScalarField(self.values - _values(other), self.grid)

    def __mul__(self, scalar):
        return ScalarField(self.values * float(scalar), self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(-self.values, self.grid)

    def __repr__(self):
        return f"ScalarField(N={self.N})"


def _values(x):
    return x.values if isinstance(x, ScalarField) else x


@dataclass(frozen=True)
class VelocityField:
    """Divergence-free velocity, as produced by :func:`biot_savart`."""

    u1: ScalarField
    u2: ScalarField

    @property
    def grid(self):
        return self.u1.grid

    def divergence_defect(self):
        """max_k |k . uhat(k)| relative to max |uhat|."""
        k1, k2 = self.grid.wavenumbers
        a, b = self.u1.spectrum.coefficients, self.u2.spectrum.coefficients
        scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
        return float(np.max(np.abs(k1 * a + k2 * b)) / scale)

    def curl(self):
        """d1 u2 - d2 u1; equals -omega for u = biot_savart(omega)."""
        k1, k2 = self.grid.wavenumbers
        a, b = self.u1.spectrum.coefficients, self.u2.spectrum.coefficients
        return inverse_transform(Spectrum(2j * np.pi * (k1 * b - k2 * a), self.grid))

    def gradient_l2(self):
        """||grad u||_{L^2}: sqrt of sum over i, j of ||d_j u_i||^2."""
        k1, k2 = self.grid.wavenumbers
        kk = (2 * np.pi) ** 2 * (k1 ** 2 + k2 ** 2)
        a, b = self.u1.spectrum.coefficients, self.u2.spectrum.coefficients
        return float(np.sqrt(np.sum(kk * (np.abs(a) ** 2 + np.abs(b) ** 2))))

    def energy(self):
        return 0.5 * (self.u1.spectrum.energy() + self.u2.spectrum.energy())


def forward_transform(f):
    """Spectrum of a real field (unit-torus normalisation)."""
    values = check_grid_values(_values(f))
    grid = f.grid if isinstance(f, ScalarField) else GridSpec(values.shape[0])
    return Spectrum(np.fft.fft2(values) / values.size, grid)


def inverse_transform(spec):
    """Real field from a spectrum; the imaginary residue is discarded."""
    values = np.fft.ifft2(spec.coefficients).real * spec.coefficients.size
    return ScalarField(values, spec.grid)


def _nyquist_mask(grid):
    k1, k2 = grid.wavenumbers
    h = grid.N // 2
    return (np.abs(k1) == h) | (np.abs(k2) == h)


def biot_savart(omega, tol=1e-12):
    """Velocity ``u = grad^perp (-Delta)^{-1} omega`` with grad^perp = (-d2, d1).

    In Fourier variables ``uhat = i k^perp omegahat / (2 pi |k|^2)``,
    ``k^perp = (-k2, k1)``.

    Accepts a :class:`Spectrum` or :class:`ScalarField`. Nyquist modes carry
    no well-defined derivative on an even grid and are dropped.
    """
    spec = omega.spectrum if isinstance(omega, ScalarField) else omega
    c = spec.coefficients
    if abs(c[0, 0]) > tol * max(1.0, float(np.max(np.abs(c)))):
        raise PreconditionError(
            "vorticity must have zero mean: the inverse Laplacian is undefined on the mean")
    grid = spec.grid
    k1, k2 = grid.wavenumbers
    k2sum = k1 ** 2 + k2 ** 2
    k2sum[0, 0] = 1.0
    factor = 1j * c / (2 * np.pi * k2sum)
    factor[0, 0] = 0.0
    factor[_nyquist_mask(grid)] = 0.0
    u1 = inverse_transform(Spectrum(-k2 * factor, grid))
    u2 = inverse_transform(Spectrum(k1 * factor, grid))
    return VelocityField(u1, u2)


def autocorrelation(f):
    """C_f(z) = int f(x + z) f(x) dx on the grid shifts, via |fhat|^2."""
    if not isinstance(f, ScalarField):
        f = ScalarField(f)
    power = np.abs(f.spectrum.coefficients) ** 2
    return ScalarField(np.fft.ifft2(power).real * power.size, f.grid)


def shift_l2_difference(f, z):
    """||f(. + z) - f||_{L^2}^2 for an integer grid shift ``z = (i, j)``.

    Evaluated as 2 (C_f(0) - C_f(z)).
    """
    c = autocorrelation(f).values
    N = c.shape[0]
    return max(0.0, 2.0 * (c[0, 0] - c[z[0] % N, z[1] % N]))


def shift_l2_differences(f):
    """All shift differences at once, as an (N, N) array indexed by shift."""
    c = autocorrelation(f).values
    return np.maximum(2.0 * (c[0, 0] - c), 0.0)


def lp_norm(f, p):
    """Grid quadrature of ``(int |f|^p)^(1/p)``; ``p`` may be ``np.inf``."""
    v = np.abs(_values(f))
    p = float(p)
    if p == np.inf:
        return float(np.max(v))
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    if p == 2 and isinstance(f, ScalarField):
        return float(np.sqrt(f.spectrum.energy()))
    m = float(np.max(v))
    if m == 0.0:
        return 0.0
    return m * float(np.mean((v / m) ** p)) ** (1.0 / p)


def _mode_key(k1, k2):
    """Canonical representative of the Hermitian pair {k, -k}."""
    flip = (k1 < 0) | ((k1 == 0) & (k2 < 0))
    return np.where(flip, -k1, k1), np.where(flip, -k2, k2), flip


def random_log_field(alpha, margin, seed, N=128, kmax=None):
    """Random zero-mean field sitting exactly at logarithmic order ``alpha``.

    ``|fhat(k)|^2`` is proportional to ``|k|^-2 log(2 + |k|)^-(1 + alpha + margin)``
    with phases drawn per wavevector from a counter-based stream, so the same
    ``seed`` yields the same underlying function at every resolution (modes
    with ``|k_i| < N/2`` and, if given, ``|k| <= kmax``). The result is scaled
    to unit sup norm on the grid.
    """
    alpha = check_positive(alpha, "alpha")
    margin = check_positive(margin, "margin")
    grid = GridSpec(N)
    k1, k2 = grid.wavenumbers
    kmag = grid.kmag
    c1, c2, flip = _mode_key(k1.astype(np.int64), k2.astype(np.int64))
    counters = np.stack([c1.ravel(), c2.ravel(), np.zeros(N * N, np.int64),
                         np.full(N * N, 0x4C4F47, np.int64)], axis=-1) % (1 << 32)
    words = philox4x32(counters, seed_to_key(seed))
    phase = 2 * np.pi * uniform_open(words[:, 0], words[:, 1]).reshape(N, N)
    phase = np.where(flip, -phase, phase)
    keep = (np.abs(k1) < N // 2) & (np.abs(k2) < N // 2) & (kmag > 0)
    if kmax is not None:
        keep &= kmag <= kmax
    amp = np.zeros_like(kmag)
    amp[keep] = 1.0 / (kmag[keep] * np.log(2.0 + kmag[keep]) ** ((1.0 + alpha + margin) / 2))
    values = np.fft.ifft2(amp * np.exp(1j * phase)).real * N * N
    values -= values.mean()
    return ScalarField(values / np.max(np.abs(values)), grid)


def mode(N, k, kind="cos", amplitude=1.0):
    """Single Fourier mode ``amplitude * cos|sin(2 pi k.x)``."""
    trig = {"cos": np.cos, "sin": np.sin}[kind]
    return ScalarField.from_function(
        lambda x1, x2: amplitude * trig(2 * np.pi * (k[0] * x1 + k[1] * x2)), N)


def three_mode(N):
    """Smooth zero-mean datum cos(2 pi x1) + cos(2 pi x2) + sin(2 pi (x1 + x2))."""
    return ScalarField.from_function(
        lambda x1, x2: np.cos(2 * np.pi * x1) + np.cos(2 * np.pi * x2)
        + np.sin(2 * np.pi * (x1 + x2)), N)


def sample_bilinear(values, points):
    """Periodic bilinear interpolation of grid samples at points of shape (..., 2)."""
    N = values.shape[0]
    s = np.asarray(points, dtype=float) * N
    i0 = np.floor(s).astype(np.int64)
    fr = s - i0
    i0 %= N
    i1 = (i0 + 1) % N
    a, b = fr[..., 0], fr[..., 1]
    return ((1 - a) * (1 - b) * values[i0[..., 0], i0[..., 1]]
            + a * (1 - b) * values[i1[..., 0], i0[..., 1]]
            + (1 - a) * b * values[i0[..., 0], i1[..., 1]]
            + a * b * values[i1[..., 0], i1[..., 1]])
