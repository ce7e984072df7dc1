import json
import math

import numpy as np
import pytest

from logeuler.exceptions import DomainError
from logeuler.experiments import (flow_convergence_experiment, inviscid_limit_experiment,
                                  lq_rate_experiment, lq_rate_exponent, propagation_experiment,
                                  shear_inviscid_error, uniform_start_points, write_bundle,
                                  yudovich_propagation_experiment)
from logeuler.field import ScalarField, mode, random_log_field, three_mode
from logeuler.seminorms import wlog_seminorm
from logeuler.solver import SolverConfig


class TestPropagation:
    def test_shear_is_flat(self):
        rep = propagation_experiment(mode(64, (1, 0)), SolverConfig(), times=[0.25, 0.5])
        assert max(abs(c) for c in rep.c_hat) < 1e-10
        assert rep.times == [0.0, 0.25, 0.5]

    def test_initial_row_exact(self):
        f = three_mode(64)
        rep = propagation_experiment(f, SolverConfig(), times=[0.1, 0.2])
        assert rep.seminorms[0] == wlog_seminorm(f, 0.5).value ** 2
        assert rep.c_hat[0] == 0.0 and rep.bound[0] == rep.seminorms[0]
        assert all(s >= 0 for s in rep.seminorms)
        assert all(b >= s * (1 - 1e-12) for b, s in zip(rep.bound, rep.seminorms))

    def test_smooth_bounded(self):
        rep = propagation_experiment(three_mode(64), SolverConfig())
        assert len(rep.c_hat) == 11
        assert np.isfinite(rep.sup_c_hat) and rep.sup_c_hat < 1.0
        assert len(rep.rows()[0]) == len(rep.CSV_HEADER)
        assert not rep.under_resolved


class TestYudovich:
    def test_shear_constant(self):
        rep = yudovich_propagation_experiment(mode(64, (1, 0)), 2.0, 0.5, SolverConfig())
        assert np.ptp(rep.seminorms) < 1e-12
        assert rep.c_hat[0] == 0.0

    def test_rough_bounded(self):
        f = random_log_field(2.0, 0.1, 3, N=256, kmax=85)
        rep = yudovich_propagation_experiment(f, 2.0, 0.5, SolverConfig())
        assert all(np.isfinite(rep.c_hat)) and rep.sup_c_hat < 10

    def test_domain(self):
        with pytest.raises(DomainError):
            yudovich_propagation_experiment(mode(16, (1, 0)), 1.0, 0.5)


class TestInviscidLimit:
    def test_shear_exact(self):
        nus = [1e-2, 1e-3, 1e-4]
        rep = inviscid_limit_experiment(mode(64, (1, 0)), 1.0, nus, 0.25)
        for nu, e in zip(nus, rep.errors):
            assert e == pytest.approx(shear_inviscid_error(nu, 0.25), rel=1e-8)
        assert rep.monotone
        assert rep.products[0] > rep.products[-1]

    def test_same_nu_gives_zero(self):
        rep = lq_rate_experiment(three_mode(32), 1.0, [1e-3], 0.2, 2.0, reference_nu=1e-3)
        assert rep.errors == [0.0]

    def test_q_handling(self):
        assert lq_rate_exponent(1.0, 4.0) == 0.25
        assert lq_rate_exponent(1.0, 2.0) == 0.5
        with pytest.raises(DomainError):
            lq_rate_experiment(three_mode(32), 1.0, [1e-2, 1e-3], 0.2, math.inf)
        rep = lq_rate_experiment(three_mode(32), 1.0, [1e-2, 1e-3, 1e-4], 0.2, 4.0)
        assert rep.rate_exponent == 0.25
        assert rep.products[0] == pytest.approx(rep.errors[0] * abs(math.log(1e-2)) ** 0.25)

    def test_q2_reduces(self):
        f = three_mode(32)
        a = lq_rate_experiment(f, 1.0, [1e-2, 1e-3, 1e-4], 0.2, 2.0)
        b = inviscid_limit_experiment(f, 1.0, [1e-2, 1e-3, 1e-4], 0.2)
        assert a.errors == b.errors

    def test_threads_bit_identical(self):
        f = three_mode(32)
        a = inviscid_limit_experiment(f, 1.0, [1e-2, 1e-3, 1e-4], 0.2, threads=1)
        b = inviscid_limit_experiment(f, 1.0, [1e-2, 1e-3, 1e-4], 0.2, threads=3)
        assert a.errors == b.errors

    @pytest.mark.parametrize("nus", [[1e-3, 1e-2], [1e-2, 0.0], [2.0]])
    def test_bad_sweeps(self, nus):
        with pytest.raises(DomainError):
            inviscid_limit_experiment(three_mode(32), 1.0, nus, 0.2)


class TestFlowConvergence:
    def test_zero_flow(self):
        nus = [1e-3, 1e-4, 1e-5]
        rep = flow_convergence_experiment(ScalarField(np.zeros((16, 16))), nus, 0.5, 2000,
                                          start_points=uniform_start_points(2), seed=1)
        for nu, d, se in zip(nus, rep.distances, rep.stderrs):
            assert abs(d - 4 * nu * 0.5) < 4 * se
        assert rep.fit.exponent == pytest.approx(1.0, abs=0.02)
        assert rep.monotone and not rep.inconclusive

    def test_repeat_nu_identical(self):
        rep = flow_convergence_experiment(mode(16, (1, 0)), [1e-3, 1e-3], 0.5, 20,
                                          start_points=uniform_start_points(2))
        assert rep.distances[0] == rep.distances[1]

    def test_inconclusive_flag(self):
        rep = flow_convergence_experiment(mode(16, (1, 0)), [1e-2, 1e-3, 1e-4], 0.5, 2,
                                          start_points=uniform_start_points(1))
        assert rep.inconclusive


def test_bundle(tmp_path):
    rep = inviscid_limit_experiment(mode(32, (1, 0)), 1.0, [1e-2, 1e-3, 1e-4], 0.2)
    files = write_bundle(tmp_path, "sweep", rep, snapshots=[mode(32, (1, 0))])
    assert [p.name for p in files] == ["sweep.csv", "sweep.json", "sweep_000.fld"]
    summary = json.loads((tmp_path / "sweep.json").read_text())
    assert summary["rate_exponent"] == 0.5 and summary["monotone"] is True
    assert list(summary) == sorted(summary)
    header = (tmp_path / "sweep.csv").read_text().splitlines()[0]
    assert header == "nu,error,error_times_log_rate,tail_fraction"
