"""Logarithmic-order semi-norms on the unit torus.

Double integrals over ``(x, h)`` are discretised as grid sums: the inner
integral over ``x`` is exact on the grid (via the autocorrelation), the outer
integral over the shift is a midpoint sum over grid displacements with the
zero shift left out.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_field_stack, check_open_interval, check_positive
from .exceptions import ConfigurationError, DomainError, PreconditionError
from .field import GridSpec, ScalarField, VelocityField, shift_l2_differences

INNER_CUTOFF = 0.5
OUTER_CUTOFF = 2.0 / 3.0
DIFF_QUOTIENT_RANGE = 1.0 / 36.0
DENOMINATOR_FLOOR = 1e-14


@dataclass
class SeminormReport:
    kind: str
    params: dict
    value: float
    N: int
    metadata: dict = field(default_factory=dict)

    CSV_HEADER = ("kind", "alpha", "theta", "gamma", "p", "h", "value", "N", "quadrature")

    def csv_row(self):
        p = self.params
        meta = ";".join(f"{k}={v}" for k, v in sorted(self.metadata.items()))
        return (self.kind, p.get("alpha", ""), p.get("theta", ""), p.get("gamma", ""),
                p.get("p", ""), self.metadata.get("argmax_h", p.get("h", "")),
                self.value, self.N, meta)

    def __float__(self):
        return float(self.value)


def _as_field(f):
    return f if isinstance(f, ScalarField) else ScalarField(f)


def hlog_fourier(f, alpha):
    """Fourier form: value^2 = sum_k log(2 + |k|)^alpha |fhat(k)|^2 (k = 0 included)."""
    f = _as_field(f)
    alpha = float(alpha)
    if alpha < 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    w = np.log(2.0 + f.grid.kmag) ** alpha
    value = float(np.sqrt(np.sum(w * np.abs(f.spectrum.coefficients) ** 2)))
    return SeminormReport("hlog-fourier", {"alpha": alpha}, value, f.N,
                          {"modes": "all |k_i|<=N/2"})


def shift_weights(grid, alpha, shift_radius=1.0 / 3.0):
    """Quadrature weight (1/N^2) / (|z|^2 log(1/|z|)^(1-alpha)) on 0 < |z| < radius."""
    r = grid.shift_radius
    mask = (r > 0) & (r < shift_radius)
    w = np.zeros_like(r)
    rm = r[mask]
    w[mask] = 1.0 / (grid.N ** 2 * rm ** 2 * np.log(1.0 / rm) ** (1.0 - alpha))
    return w


def hlog_physical(f, alpha, shift_radius=1.0 / 3.0):
    """Gagliardo-type form of the H^{log,alpha} semi-norm."""
    f = _as_field(f)
    alpha = check_positive(alpha, "alpha")
    if not 0 < shift_radius <= 0.5:
        raise DomainError("shift_radius must lie in (0, 1/2]")
    w = shift_weights(f.grid, alpha, shift_radius)
    value = float(np.sqrt(np.sum(w * shift_l2_differences(f))))
    return SeminormReport("hlog-physical", {"alpha": alpha}, value, f.N,
                          {"shifts": int(np.count_nonzero(w)), "radius": shift_radius})


def _correlate(w, g):
    """(w * g)(x) = sum_z w(z) g(x + z) for periodic grid arrays."""
    return np.fft.ifft2(np.conj(np.fft.fft2(w)) * np.fft.fft2(g)).real


def l_alpha(f, alpha, shift_radius=1.0 / 3.0):
    """Pointwise square function L_alpha f, sharing the hlog_physical quadrature.

    L^2(x) = sum_z w(z) (f(x+z)^2 - 2 f(x+z) f(x) + f(x)^2), each sum being a
    periodic correlation; cost O(N^2 log N).
    """
    f = _as_field(f)
    alpha = check_positive(alpha, "alpha")
    v = f.values
    w = shift_weights(f.grid, alpha, shift_radius)
    sq = _correlate(w, v * v) - 2.0 * v * _correlate(w, v) + v * v * w.sum()
    return ScalarField(np.sqrt(np.maximum(sq, 0.0)), f.grid)


def xgp_seminorm(f, gamma, p, shift_radius=1.0 / 3.0):
    """X^{gamma,p} semi-norm with L^p shift differences (direct shift loop)."""
    f = _as_field(f)
    gamma = check_positive(gamma, "gamma")
    p = check_positive(p, "p")
    grid = f.grid
    r = grid.shift_radius
    N = grid.N
    v = f.values
    total = 0.0
    for i, j in zip(*np.nonzero((r > 0) & (r < shift_radius))):
        rz = r[i, j]
        diff = np.mean(np.abs(np.roll(v, (-i, -j), axis=(0, 1)) - v) ** p)
        total += diff / (N ** 2 * rz ** 2 * np.log(1.0 / rz) ** (1.0 - p * gamma))
    value = float(total ** (1.0 / p))
    return SeminormReport("xgp", {"gamma": gamma, "p": p}, value, N, {"radius": shift_radius})


@dataclass(frozen=True)
class KernelSpec:
    """Kernel 1/(|x| + h)^2 near the origin, h-independent beyond 2/3.

    On [1/2, 2/3] the radius is bent by a C^2 quintic smoothstep so that
    ``K_h = 1 / (rho(r) + h psi(r))^2`` with rho, psi as in :func:`_profile`.
    """

    h: float
    d: int = 2

    def __post_init__(self):
        if not 0 < self.h <= 0.5:
            raise DomainError(f"h must lie in (0, 1/2], got {self.h}")
        if self.d != 2:
            raise DomainError("only d = 2 is supported")


def _profile(r):
    """rho, rho', psi, psi' as functions of the geodesic radius."""
    L = OUTER_CUTOFF - INNER_CUTOFF
    t = np.clip((r - INNER_CUTOFF) / L, 0.0, 1.0)
    s = t ** 3 * (10 - 15 * t + 6 * t ** 2)
    ds = 30 * t ** 2 * (1 - t) ** 2
    integral = t - 2.5 * t ** 4 + 3 * t ** 5 - t ** 6
    rho = np.where(r <= INNER_CUTOFF, r, INNER_CUTOFF + L * integral)
    return rho, 1.0 - s, 1.0 - s, -ds / L


@dataclass(frozen=True)
class KernelGrid:
    spec: KernelSpec
    grid: GridSpec
    values: np.ndarray
    gradient: tuple

    @property
    def h(self):
        return self.spec.h


def kernel_at(r, h):
    """K_h at geodesic radius r."""
    rho, _, psi, _ = _profile(np.asarray(r, dtype=float))
    return 1.0 / (rho + h * psi) ** 2


@lru_cache(maxsize=64)
def _kernel_cached(h, N):
    spec = KernelSpec(h)
    grid = GridSpec(N)
    r = grid.shift_radius
    rho, drho, psi, dpsi = _profile(r)
    denom = rho + h * psi
    values = 1.0 / denom ** 2
    dk_dr = -2.0 * (drho + h * dpsi) / denom ** 3
    d1, d2 = grid.displacements
    with np.errstate(invalid="ignore", divide="ignore"):
        g1 = np.where(r > 0, dk_dr * d1 / r, 0.0)
        g2 = np.where(r > 0, dk_dr * d2 / r, 0.0)
    # On the cut locus |z_i| = 1/2 the one-sided derivatives cancel.
    g1[d1 == -0.5] = 0.0
    g2[d2 == -0.5] = 0.0
    for a in (values, g1, g2):
        a.setflags(write=False)
    return KernelGrid(spec, grid, values, (g1, g2))


def build_kernel(spec, grid):
    """Sample K_h and its analytic gradient on the grid displacements."""
    if not isinstance(spec, KernelSpec):
        spec = KernelSpec(float(spec))
    N = grid.N if isinstance(grid, GridSpec) else int(grid)
    return _kernel_cached(float(spec.h), N)


def default_h_grid(N):
    """Dyadic h = 2^-j for j >= 2 down to the grid floor 2/N."""
    hs = []
    j = 2
    while 2.0 ** -j >= 2.0 / N:
        hs.append(2.0 ** -j)
        j += 1
    return tuple(hs)


def kernel_energy(f, h):
    """Double integral of K_h(x - y) |f(x) - f(y)|^2, via the autocorrelation."""
    f = _as_field(f)
    kg = build_kernel(KernelSpec(h), f.grid)
    return float(np.sum(kg.values * shift_l2_differences(f)) / f.N ** 2)


def wlog_seminorm(f, theta, h_grid=None):
    """W^2_{log,theta} semi-norm: max over dyadic h of |log h|^-theta * kernel energy."""
    f = _as_field(f)
    theta = check_open_interval(theta, 0.0, 1.0, "theta", symbol="θ")
    hs = default_h_grid(f.N) if h_grid is None else tuple(float(h) for h in h_grid)
    if not hs:
        raise ConfigurationError("empty h grid")
    for h in hs:
        if not 0 < h <= 0.5:
            raise DomainError(f"h must lie in (0, 1/2], got {h}")
        if h < 2.0 / f.N:
            raise ConfigurationError(f"h = {h} is below the grid resolution 2/N = {2.0 / f.N}")
    diffs = shift_l2_differences(f)
    scores = []
    for h in hs:
        kg = build_kernel(KernelSpec(h), f.grid)
        scores.append(abs(np.log(h)) ** -theta * float(np.sum(kg.values * diffs)) / f.N ** 2)
    best = int(np.argmax(scores))
    return SeminormReport("wlog", {"theta": theta}, float(np.sqrt(scores[best])), f.N,
                          {"argmax_h": hs[best], "h_min": min(hs), "h_count": len(hs)})


def commutator_functional(a, g, h, div_tol=1e-10):
    """Double integral of grad K_h(x-y) . (a(x)-a(y)) |g(x)-g(y)|^2.

    The integrand expands into six terms F(x) G(y), each a periodic
    convolution with a component of grad K_h; the two terms with F = 1 or
    G = 1 vanish by antisymmetry but are kept for round-off parity with the
    direct sum.
    """
    if not isinstance(a, VelocityField):
        raise PreconditionError("a must be a VelocityField")
    if a.divergence_defect() > div_tol:
        raise PreconditionError("a must be divergence-free")
    g = _as_field(g)
    kg = build_kernel(KernelSpec(h), g.grid)
    N = g.N
    gv = g.values
    g2 = gv * gv
    ones = np.ones_like(gv)
    total = 0.0
    for grad_k, ai in zip(kg.gradient, (a.u1.values, a.u2.values)):
        gk = np.fft.fft2(grad_k)

        def conv(G):
            return np.fft.ifft2(gk * np.fft.fft2(G)).real

        total += np.sum(ai * g2 * conv(ones))
        total -= 2.0 * np.sum(ai * gv * conv(gv))
        total += np.sum(ai * conv(g2))
        total -= np.sum(g2 * conv(ai))
        total += 2.0 * np.sum(gv * conv(ai * gv))
        total -= np.sum(conv(ai * g2))
    return float(total / N ** 4)


def diff_quotient_check(f, alpha, n_pairs, seed, return_skipped=False):
    """Largest observed ratio |f(x)-f(y)| / (log(1/|x-y|)^(-alpha/2) (L f(x) + L f(y))).

    Pairs are grid points at geodesic distance in (2/N, 1/36). Pairs whose
    denominator falls below 1e-14 are skipped.
    """
    f = _as_field(f)
    alpha = check_positive(alpha, "alpha")
    N = f.N
    if N < 80:
        raise ConfigurationError(f"N = {N} admits no pairs closer than 1/36 (need N >= 80)")
    span = int(np.ceil(N * DIFF_QUOTIENT_RANGE))
    a, b = np.meshgrid(np.arange(-span, span + 1), np.arange(-span, span + 1), indexing="ij")
    dist = np.hypot(a, b) / N
    ok = (dist > 2.0 / N) & (dist < DIFF_QUOTIENT_RANGE)
    if not ok.any():
        raise ConfigurationError(f"N = {N} admits no pairs closer than 1/36")
    da, db, dd = a[ok], b[ok], dist[ok]
    rng = np.random.default_rng(seed)
    n_pairs = int(n_pairs)
    x = rng.integers(0, N, size=(n_pairs, 2))
    pick = rng.integers(0, da.size, size=n_pairs)
    y1 = (x[:, 0] + da[pick]) % N
    y2 = (x[:, 1] + db[pick]) % N
    L = l_alpha(f, alpha).values
    v = f.values
    num = np.abs(v[x[:, 0], x[:, 1]] - v[y1, y2])
    den = np.log(1.0 / dd[pick]) ** (-alpha / 2) * (L[x[:, 0], x[:, 1]] + L[y1, y2])
    valid = den >= DENOMINATOR_FLOOR
    ratio = float(np.max(num[valid] / den[valid])) if valid.any() else 0.0
    if return_skipped:
        return ratio, int(n_pairs - valid.sum())
    return ratio


_KINDS = ("hlog-fourier", "hlog-physical", "xgp", "wlog")


class LogSeminorm(TransformerMixin, BaseEstimator):
    """Map a stack of fields (n_fields, N, N) to a column of semi-norm values.

    Lets the semi-norms sit inside scikit-learn pipelines as feature
    extractors.

    Parameters
    ----------
    kind : {"hlog-fourier", "hlog-physical", "xgp", "wlog"}
    alpha : float
        Order for the two H^{log,alpha} evaluators.
    theta : float
        Order for "wlog".
    gamma, p : float
        Parameters for "xgp".
    """

    def __init__(self, kind="hlog-physical", alpha=1.0, theta=0.5, gamma=0.5, p=2.0):
        self.kind = kind
        self.alpha = alpha
        self.theta = theta
        self.gamma = gamma
        self.p = p

    def fit(self, X, y=None):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        X = check_field_stack(X)
        self.N_ = X.shape[1]
        self.n_features_in_ = X.shape[1] * X.shape[2]
        return self

    def _one(self, values):
        if self.kind == "hlog-fourier":
            return hlog_fourier(values, self.alpha).value
        if self.kind == "hlog-physical":
            return hlog_physical(values, self.alpha).value
        if self.kind == "xgp":
            return xgp_seminorm(values, self.gamma, self.p).value
        return wlog_seminorm(values, self.theta).value

    def transform(self, X):
        check_is_fitted(self, "N_")
        X = check_field_stack(X)
        if X.shape[1] != self.N_:
            raise ValueError(f"fitted on N={self.N_}, got N={X.shape[1]}")
        return np.array([[self._one(v)] for v in X])

    def get_feature_names_out(self, input_features=None):
        return np.array([self.kind], dtype=object)
