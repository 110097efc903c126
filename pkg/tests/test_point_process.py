import math

import numpy as np
import pytest

from snoise.errors import ExplosionGuardError, InvalidBoundError
from snoise.marks import Exponential, Normal, PointMass
from snoise.point_process import (
    CompensatorSpec,
    MppPath,
    break_ties,
    compensator_mass,
    empty_path,
    simulate_mpp,
    standard,
)
from snoise.stats import ks_against_cdf


class TestMppPath:
    def test_validation_rejects_unsorted(self):
        with pytest.raises(ValueError):
            MppPath([0.5, 0.4], [[1.0], [1.0]], 1.0)

    def test_validation_rejects_nonpositive_start(self):
        with pytest.raises(ValueError):
            MppPath([0.0, 0.4], [[1.0], [1.0]], 1.0)

    def test_validation_rejects_beyond_horizon(self):
        with pytest.raises(ValueError):
            MppPath([0.5], [[1.0]], 0.4)

    def test_cumulative_marks_right_continuous(self):
        p = MppPath([0.5, 0.8], [[1.0], [2.0]], 1.0)
        assert p.cumulative_marks(0.49)[0] == 0.0
        assert p.cumulative_marks(0.5)[0] == 1.0  # jump included at T_i
        assert p.cumulative_marks(1.0)[0] == 3.0

    def test_restrict(self):
        p = MppPath([0.5, 0.8], [[1.0], [2.0]], 1.0)
        r = p.restrict(0.6)
        assert r.n_events == 1 and r.horizon == 0.6
        assert p.restrict(0.0).n_events == 0

    def test_paths_are_frozen(self):
        p = MppPath([0.5], [[1.0]], 1.0)
        with pytest.raises(ValueError):
            p.times[0] = 0.1


def test_break_ties_perturbs_by_one_ulp():
    t = break_ties(np.array([0.5, 0.5, 0.7]))
    assert t[0] == 0.5
    assert t[1] == np.nextafter(0.5, np.inf)
    assert t[2] == 0.7
    assert np.all(np.diff(t) > 0)


class TestSimulateMpp:
    def test_zero_rate_gives_empty_path(self):
        spec = standard(0.0, PointMass(1.0))
        assert simulate_mpp(spec, 10.0, 1).n_events == 0

    def test_mean_count_constant_rate(self):
        # oracle: Poisson mean = int lambda = 2 * 10 = 20
        spec = standard(2.0, PointMass(1.0))
        n = 20000
        counts = np.array([
            simulate_mpp(spec, 10.0, 42, path_index=i).n_events
            for i in range(n)
        ])
        assert abs(counts.mean() - 20.0) <= 3.0 * math.sqrt(20.0 / n)

    def test_mean_count_linear_rate(self):
        # oracle: int_0^2 t dt = 2
        spec = CompensatorSpec(
            rate=lambda t: np.asarray(t, dtype=float),
            rate_bound=2.0, marks=PointMass(1.0))
        n = 20000
        counts = np.array([
            simulate_mpp(spec, 2.0, 7, path_index=i).n_events
            for i in range(n)
        ])
        assert abs(counts.mean() - 2.0) <= 3.0 * math.sqrt(2.0 / n)

    def test_invalid_bound_fails_loudly(self):
        spec = CompensatorSpec(
            rate=lambda t: 1.0 + np.asarray(t, dtype=float),
            rate_bound=1.5, marks=PointMass(1.0))
        with pytest.raises(InvalidBoundError):
            simulate_mpp(spec, 5.0, 3)

    def test_reproducibility_bit_identical(self):
        spec = standard(3.0, Normal(0.0, 1.0))
        a = simulate_mpp(spec, 5.0, 11, path_index=4)
        b = simulate_mpp(spec, 5.0, 11, path_index=4)
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.marks, b.marks)
        c = simulate_mpp(spec, 5.0, 11, path_index=5)
        assert not np.array_equal(a.times, c.times)

    def test_event_cap(self):
        spec = standard(100.0, PointMass(1.0))
        with pytest.raises(ExplosionGuardError):
            simulate_mpp(spec, 10.0, 1, max_events=50)

    def test_mark_law_ks(self):
        spec = standard(2.0, Exponential(1.5))
        pooled = np.concatenate([
            simulate_mpp(spec, 5.0, 21, path_index=i).marks[:, 0]
            for i in range(400)
        ])
        res = ks_against_cdf(pooled, lambda x: spec.marks.cdf(0.0, x))
        assert res.passed, (res.statistic, res.threshold)

    def test_compensated_count_martingale(self):
        # |mean(N_T) - int lambda| <= 3 SE with lambda(t) ramping down
        spec = CompensatorSpec(
            rate=lambda t: 2.0 - 0.5 * np.asarray(t, dtype=float),
            rate_bound=2.0, marks=PointMass(1.0))
        n = 20000
        counts = np.array([
            simulate_mpp(spec, 2.0, 100 + i).n_events for i in range(n)
        ])
        target = 2.0 * 2.0 - 0.5 * 2.0  # int_0^2 (2 - t/2) dt = 3
        assert spec.mean_rate_integral(0.0, 2.0) == pytest.approx(target,
                                                                  abs=1e-9)
        se = counts.std(ddof=1) / math.sqrt(n)
        assert abs(counts.mean() - target) <= 3.0 * se


class TestCompensatorMass:
    def test_total_mass(self):
        spec = standard(1.7, Normal(0.0, 2.0))
        ones = lambda s, x: np.ones(np.asarray(x, dtype=float).shape[:-1])
        val = compensator_mass(spec, 0.0, 3.0, ones)
        assert val == pytest.approx(1.7 * 3.0, abs=1e-8)

    def test_point_mass_first_moment(self):
        spec = standard(1.0, PointMass(2.0))
        val = compensator_mass(spec, 0.0, 3.0,
                               lambda s, x: np.asarray(x, dtype=float)[..., 0])
        assert val == pytest.approx(6.0, abs=1e-10)

    def test_gaussian_cf_closed_form(self):
        # oracle: int (e^{i theta x} - 1) lam phi(x) dx dt = lam T (e^{-theta^2/2} - 1)
        lam, T = 1.3, 2.0
        spec = standard(lam, Normal(0.0, 1.0))
        for theta in (0.7, 1.7):
            val = compensator_mass(
                spec, 0.0, T,
                lambda s, x, theta=theta: np.exp(
                    1j * theta * np.asarray(x, dtype=float)[..., 0]) - 1.0)
            closed = lam * T * (math.exp(-theta**2 / 2.0) - 1.0)
            assert abs(val - closed) < 1e-8

    def test_time_slice_integral(self):
        spec = CompensatorSpec(
            rate=lambda t: 1.0 + np.asarray(t, dtype=float),
            rate_bound=3.0, marks=PointMass(2.0))
        val = spec.slice_integral(1.0, lambda x: np.asarray(x, dtype=float)[..., 0])
        assert val == pytest.approx(4.0)


def test_empty_path_helpers():
    p = empty_path(2.0, mark_dim=3)
    assert p.n_events == 0 and p.mark_dim == 3
    assert np.all(p.cumulative_marks(1.0) == 0.0)
