import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from logeuler.exceptions import ConfigurationError, DomainError, PreconditionError
from logeuler.field import (GridSpec, ScalarField, VelocityField, biot_savart, lp_norm, mode,
                            random_log_field, three_mode)
from logeuler.seminorms import (KernelSpec, LogSeminorm, SeminormReport, build_kernel,
                                commutator_functional, default_h_grid, diff_quotient_check,
                                hlog_fourier, hlog_physical, kernel_at, l_alpha, wlog_seminorm,
                                xgp_seminorm)

from conftest import zero_mean_random


def direct_hlog_physical(v, alpha):
    """sum over shifts 0<|z|<1/3 of |z|^-2 log(1/|z|)^(alpha-1) ||f(.+z)-f||^2 / N^2."""
    N = v.shape[0]
    total = 0.0
    for i in range(N):
        for j in range(N):
            z = np.hypot(min(i, N - i), min(j, N - j)) / N
            if 0 < z < 1 / 3:
                d = np.mean((np.roll(v, (-i, -j), axis=(0, 1)) - v) ** 2)
                total += d / (N ** 2 * z ** 2 * np.log(1 / z) ** (1 - alpha))
    return np.sqrt(total)


def direct_commutator(a, g, h):
    N = g.N
    kg = build_kernel(KernelSpec(h), g.grid)
    g1, g2 = kg.gradient
    a1, a2, gv = a.u1.values.ravel(), a.u2.values.ravel(), g.values.ravel()
    idx = np.arange(N)
    ix, jx = np.meshgrid(idx, idx, indexing="ij")
    ix, jx = ix.ravel(), jx.ravel()
    total = 0.0
    for p in range(N * N):
        di = (ix[p] - ix) % N
        dj = (jx[p] - jx) % N
        dg = (gv[p] - gv) ** 2
        total += np.sum((g1[di, dj] * (a1[p] - a1) + g2[di, dj] * (a2[p] - a2)) * dg)
    return total / N ** 4


class TestHlogFourier:
    def test_constant(self):
        f = ScalarField(np.full((16, 16), 1.5))
        for alpha in (0.5, 1.0, 2.0):
            assert hlog_fourier(f, alpha).value ** 2 == pytest.approx(np.log(2) ** alpha * 2.25, rel=1e-14)

    def test_cosine(self):
        assert hlog_fourier(mode(32, (1, 0)), 1.0).value ** 2 == pytest.approx(np.log(3) / 2, rel=1e-14)

    def test_order_zero_is_l2(self):
        f = zero_mean_random(32, 1)
        assert hlog_fourier(f, 0.0).value == pytest.approx(lp_norm(f, 2), rel=1e-13)

    def test_domain(self):
        with pytest.raises(DomainError):
            hlog_fourier(mode(16, (1, 0)), -0.1)


class TestHlogPhysical:
    def test_constant(self):
        assert hlog_physical(ScalarField(np.full((32, 32), 4.0)), 1.0).value < 1e-12

    def test_direct_sum(self):
        f = zero_mean_random(16, 7)
        for alpha in (0.5, 1.0, 2.0):
            assert hlog_physical(f, alpha).value == pytest.approx(direct_hlog_physical(f.values, alpha), rel=1e-12)

    def test_self_convergence(self):
        a = hlog_physical(mode(64, (1, 0)), 0.5).value
        b = hlog_physical(mode(128, (1, 0)), 0.5).value
        assert abs(a - b) / b < 0.05

    def test_homogeneity(self):
        f = zero_mean_random(32, 2)
        assert hlog_physical(f * 2.0, 1.0).value == pytest.approx(2 * hlog_physical(f, 1.0).value, rel=1e-14)

    def test_domain(self):
        for bad in (0.0, -1.0):
            with pytest.raises(DomainError):
                hlog_physical(mode(16, (1, 0)), bad)


class TestLAlpha:
    def test_constant(self):
        assert np.max(l_alpha(ScalarField(np.full((16, 16), 2.0)), 1.0).values) < 1e-12

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 2.0]))
    def test_norm_identity(self, seed, alpha):
        f = zero_mean_random(32, seed)
        assert lp_norm(l_alpha(f, alpha), 2) == pytest.approx(hlog_physical(f, alpha).value, rel=1e-10)

    def test_shear_depends_on_x1_only(self):
        L = l_alpha(mode(64, (1, 0)), 1.0).values
        assert np.max(np.abs(L - L[:, :1])) < 1e-12


class TestXgp:
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    def test_p2_bridge(self, alpha):
        f = zero_mean_random(32, 11)
        assert xgp_seminorm(f, alpha / 2, 2.0).value == pytest.approx(hlog_physical(f, alpha).value, rel=1e-10)

    def test_constant_and_sign(self):
        assert xgp_seminorm(ScalarField(np.ones((16, 16))), 0.5, 3.0).value == 0.0
        f = zero_mean_random(16, 5)
        assert xgp_seminorm(f, 0.5, 3.0).value == xgp_seminorm(-f, 0.5, 3.0).value

    def test_homogeneity(self):
        f = zero_mean_random(16, 6)
        assert xgp_seminorm(f * 3.0, 0.7, 1.5).value == pytest.approx(3 * xgp_seminorm(f, 0.7, 1.5).value, rel=1e-13)

    def test_domain(self):
        f = mode(16, (1, 0))
        with pytest.raises(DomainError):
            xgp_seminorm(f, 0.0, 2.0)
        with pytest.raises(DomainError):
            xgp_seminorm(f, 0.5, 0.0)


class TestKernel:
    def test_inner_value(self):
        assert kernel_at(0.25, 1 / 8) == pytest.approx(64 / 9, rel=1e-14)
        N = 64
        kg = build_kernel(KernelSpec(1 / 8), GridSpec(N))
        assert kg.values[16, 0] == pytest.approx(64 / 9, rel=1e-14)
        r = GridSpec(N).shift_radius
        inner = r < 0.5
        assert np.max(np.abs(kg.values[inner] - 1 / (r[inner] + 1 / 8) ** 2)) < 1e-12

    def test_outer_independent_of_h(self):
        r = np.linspace(2 / 3, np.sqrt(2) / 2, 50)
        assert np.array_equal(kernel_at(r, 0.25), kernel_at(r, 0.01))
        assert np.allclose(kernel_at(r, 0.1), (7 / 12) ** -2)

    @pytest.mark.parametrize("h", [0.5, 0.25, 1 / 64])
    def test_bounds_and_symmetry(self, h):
        kg = build_kernel(KernelSpec(h), GridSpec(32))
        v = kg.values
        assert np.all(v > 0) and np.all(v <= h ** -2 * (1 + 1e-15))
        assert v[0, 0] == pytest.approx(h ** -2)
        flip = np.roll(v[::-1, ::-1], 1, axis=(0, 1))
        assert np.array_equal(v, flip)
        for g in kg.gradient:
            assert np.allclose(g, -np.roll(g[::-1, ::-1], 1, axis=(0, 1)), atol=1e-12)

    def test_gradient_matches_finite_difference(self):
        h = 0.1
        N = 64
        kg = build_kernel(KernelSpec(h), GridSpec(N))
        d1, d2 = GridSpec(N).displacements
        eps = 1e-6
        sel = (np.hypot(d1, d2) > 0.05) & (np.abs(d1) < 0.49) & (np.abs(d2) < 0.49)
        fd = (kernel_at(np.hypot(d1 + eps, d2), h) - kernel_at(np.hypot(d1 - eps, d2), h)) / (2 * eps)
        assert np.max(np.abs(fd[sel] - kg.gradient[0][sel])) < 1e-5 * np.max(np.abs(fd[sel]))

    def test_domain(self):
        for bad in (0.0, 0.6, -1.0):
            with pytest.raises(DomainError):
                KernelSpec(bad)


class TestWlog:
    def test_constant(self):
        assert wlog_seminorm(ScalarField(np.ones((32, 32))), 0.5).value < 1e-12

    def test_h_grid(self):
        assert default_h_grid(128) == (0.25, 0.125, 0.0625, 0.03125, 0.015625)
        with pytest.raises(ConfigurationError):
            wlog_seminorm(mode(32, (1, 0)), 0.5, h_grid=[0.25, 1 / 32])

    @pytest.mark.parametrize("theta", [0.0, 1.0, 1.5, -0.2])
    def test_theta_domain(self, theta):
        with pytest.raises(DomainError, match=r"θ must lie in \(0,1\)"):
            wlog_seminorm(mode(32, (1, 0)), theta)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 0.98), st.floats(0.0, 1.0))
    def test_monotone_in_theta(self, seed, lo, frac):
        f = zero_mean_random(32, seed)
        hi = lo + frac * (0.99 - lo)
        assert wlog_seminorm(f, hi).value <= wlog_seminorm(f, lo).value

    def test_stable_under_refinement(self):
        vals = [wlog_seminorm(random_log_field(0.6, 0.1, 4, N=N, kmax=42), 0.5).value for N in (128, 256)]
        assert abs(vals[1] - vals[0]) / vals[0] < 0.10

    def test_argmax_recorded(self):
        rep = wlog_seminorm(three_mode(64), 0.5)
        assert rep.metadata["argmax_h"] in default_h_grid(64)

    def test_embedding_ratio_bounded(self):
        # wlog^2 against sum log(1+|k|)^(1-theta) |fhat|^2 on a smooth corpus.
        ratios = []
        for k in [(1, 0), (2, 1), (3, 3), (5, 0), (4, 7)]:
            f = mode(64, k)
            c = np.abs(f.spectrum.coefficients) ** 2
            rhs = np.sum(np.log(1 + f.grid.kmag) ** 0.5 * c)
            ratios.append(wlog_seminorm(f, 0.5).value ** 2 / rhs)
        assert max(ratios) < 20 and max(ratios) / min(ratios) < 20


class TestCommutator:
    def _a(self, N):
        return biot_savart(zero_mean_random(N, 99) * 0.3)

    def test_direct_sum(self):
        N = 24
        a = self._a(N)
        g = zero_mean_random(N, 1)
        for h in (0.25, 0.125):
            fast = commutator_functional(a, g, h)
            slow = direct_commutator(a, g, h)
            assert abs(fast - slow) <= 1e-8 * max(abs(slow), 1e-300)

    def test_vanishing_cases(self):
        N = 32
        a = self._a(N)
        assert abs(commutator_functional(a, ScalarField(np.full((N, N), 2.0)), 0.125)) < 1e-12
        const = VelocityField(ScalarField(np.full((N, N), 1.0)), ScalarField(np.full((N, N), -0.5)))
        assert abs(commutator_functional(const, zero_mean_random(N, 3), 0.125)) < 1e-10

    def test_rejects_compressible(self):
        N = 32
        x1, _ = GridSpec(N).nodes()
        a = VelocityField(ScalarField(np.sin(2 * np.pi * x1)), ScalarField(np.zeros((N, N))))
        with pytest.raises(PreconditionError):
            commutator_functional(a, mode(N, (1, 0)), 0.125)


class TestDiffQuotient:
    def test_constant(self):
        assert diff_quotient_check(ScalarField(np.ones((96, 96))), 1.0, 500, 0) == 0.0

    def test_deterministic(self):
        f = random_log_field(1.0, 0.1, 3, N=96)
        assert diff_quotient_check(f, 1.0, 1000, 5) == diff_quotient_check(f, 1.0, 1000, 5)

    def test_small_grid(self):
        with pytest.raises(ConfigurationError):
            diff_quotient_check(mode(64, (1, 0)), 1.0, 10, 0)

    def test_stable_across_seeds(self):
        f = random_log_field(1.0, 0.1, 1, N=256)
        r = [diff_quotient_check(f, 1.0, 20000, s) for s in range(4)]
        assert np.all(np.isfinite(r))
        assert max(r) / min(r) < 1.25

    def test_skipped_count(self):
        ratio, skipped = diff_quotient_check(ScalarField(np.ones((96, 96))), 1.0, 50, 0, return_skipped=True)
        assert ratio == 0.0 and skipped == 50


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 3.0), st.floats(0.0, 2.0))
def test_hlog_monotone_in_alpha(seed, alpha, step):
    f = zero_mean_random(32, seed)
    a2 = alpha + step
    assert hlog_fourier(f, alpha).value <= hlog_fourier(f, a2).value * (1 + 1e-14)
    assert hlog_physical(f, alpha).value <= hlog_physical(f, a2).value * (1 + 1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3))
def test_homogeneity_all(seed, lam):
    f = zero_mean_random(16, seed)
    g = f * lam
    for fn in (lambda u: hlog_fourier(u, 1.0), lambda u: hlog_physical(u, 1.0),
               lambda u: wlog_seminorm(u, 0.5), lambda u: xgp_seminorm(u, 0.4, 3.0)):
        assert fn(g).value == pytest.approx(abs(lam) * fn(f).value, rel=1e-12)


def test_report_csv_row():
    rep = wlog_seminorm(mode(32, (1, 0)), 0.5)
    row = rep.csv_row()
    assert len(row) == len(SeminormReport.CSV_HEADER)
    assert row[0] == "wlog" and row[2] == 0.5 and float(rep) == rep.value


class TestEstimator:
    def test_transform_column(self):
        X = np.stack([zero_mean_random(16, s).values for s in range(3)])
        est = LogSeminorm(kind="hlog-fourier", alpha=1.0).fit(X)
        out = est.transform(X)
        assert out.shape == (3, 1)
        assert out[1, 0] == hlog_fourier(X[1], 1.0).value
        assert list(est.get_feature_names_out()) == ["hlog-fourier"]

    def test_clone_and_pipeline(self):
        X = np.stack([zero_mean_random(16, s).values for s in range(2)])
        est = clone(LogSeminorm(kind="wlog", theta=0.3))
        assert est.get_params()["theta"] == 0.3
        pipe = make_pipeline(LogSeminorm(kind="hlog-physical", alpha=2.0), FunctionTransformer(np.log))
        assert pipe.fit_transform(X).shape == (2, 1)

    def test_bad_kind_and_size(self):
        X = np.zeros((1, 16, 16))
        with pytest.raises(ValueError):
            LogSeminorm(kind="nope").fit(X)
        est = LogSeminorm().fit(X)
        with pytest.raises(ValueError):
            est.transform(np.zeros((1, 32, 32)))
