import cmath
import math

import numpy as np
import pytest

from snoise.affine import (
    HawkesParams,
    affine_cf,
    riccati_solve,
    simulate_hawkes,
)
from snoise.errors import BlowUpError, ExplosionGuardError
from snoise.stats import cf_ratio, empirical_cf


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            HawkesParams(0.0, 0.5, 1.0)
        with pytest.raises(ValueError):
            HawkesParams(1.0, -0.1, 1.0)
        with pytest.raises(ValueError):
            HawkesParams(1.0, 0.5, -1.0)

    def test_branching_ratio(self):
        assert HawkesParams(2.0, 0.5, 1.0).branching_ratio == 0.5


class TestSimulateHawkes:
    def test_zero_intensity_is_absorbing(self):
        hp = simulate_hawkes(HawkesParams(1.0, 0.0, 0.0), 10.0, 1)
        assert hp.events.n_events == 0
        assert hp.intensity(5.0) == 0.0

    def test_shotnoise_identity_at_event_times(self):
        params = HawkesParams(2.0, 0.5, 1.0)
        worst = 0.0
        for i in range(200):
            hp = simulate_hawkes(params, 2.0, 11, path_index=i)
            if hp.events.n_events:
                closed = hp.intensity(hp.events.times)
                worst = max(worst, float(np.abs(closed - hp.intensities).max()))
        assert worst <= 1e-10

    def test_intensity_closed_form_structure(self):
        # deterministic part + sum of unit exponential kicks
        params = HawkesParams(1.5, 0.3, 2.0)
        hp = simulate_hawkes(params, 3.0, 5)
        t = 2.5
        deterministic = (2.0 * math.exp(-1.5 * t)
                         + 0.3 * (1.0 - math.exp(-1.5 * t)))
        kicks = sum(math.exp(-1.5 * (t - ti))
                    for ti in hp.events.times if ti <= t)
        assert hp.intensity(t) == pytest.approx(deterministic + kicks, rel=1e-12)

    def test_reproducibility(self):
        params = HawkesParams(2.0, 0.5, 1.0)
        a = simulate_hawkes(params, 2.0, 9, path_index=3)
        b = simulate_hawkes(params, 2.0, 9, path_index=3)
        assert np.array_equal(a.events.times, b.events.times)

    def test_explosion_guard_supercritical(self):
        # branching ratio 1/kappa = 5: cascades blow past the cap
        params = HawkesParams(0.2, 5.0, 20.0)
        with pytest.raises(ExplosionGuardError):
            simulate_hawkes(params, 50.0, 2, max_events=200)

    def test_unit_marks(self):
        hp = simulate_hawkes(HawkesParams(1.0, 1.0, 1.0), 2.0, 4)
        if hp.events.n_events:
            assert np.all(hp.events.marks == 1.0)


class TestRiccati:
    def test_zero_boundary_is_fixed_point(self):
        sol = riccati_solve(HawkesParams(2.0, 0.5, 1.0), (0.0, 0.0), 1.0)
        assert np.all(sol.phi == 0.0)
        assert np.all(sol.psi2 == 0.0)

    def test_psi1_constant_exactly(self):
        u = (0.7j, 0.3j)
        sol = riccati_solve(HawkesParams(2.0, 0.5, 1.0), u, 1.0)
        assert np.all(sol.psi1 == u[0])

    def test_boundary_values(self):
        u = (0.2j, -0.4j)
        sol = riccati_solve(HawkesParams(1.0, 1.0, 0.5), u, 0.5)
        assert sol.phi[0] == 0.0
        assert sol.psi2[0] == u[1]

    def test_order_four_convergence(self):
        params = HawkesParams(2.0, 0.5, 1.0)
        u = (0.3j, 0.4j)
        ref = riccati_solve(params, u, 1.0, steps=2**14).final
        errs = []
        for steps in (100, 200, 400, 800):
            fin = riccati_solve(params, u, 1.0, steps=steps).final
            errs.append(abs(fin[0] - ref[0]) + abs(fin[2] - ref[2]))
        slopes = [math.log2(errs[i] / errs[i + 1]) for i in range(3)]
        assert all(3.7 <= s <= 4.3 for s in slopes), slopes

    def test_blow_up_guard(self):
        # a large positive real boundary makes psi2' ~ e^{psi2} explode
        with pytest.raises(BlowUpError):
            riccati_solve(HawkesParams(1.0, 1.0, 1.0), (0.0, 6.0), 1.0)

    def test_steps_minimum(self):
        with pytest.raises(ValueError):
            riccati_solve(HawkesParams(1.0, 1.0, 1.0), (0.0, 0.0), 1.0, steps=50)


class TestAffineCf:
    def test_zero_argument(self):
        params = HawkesParams(2.0, 0.5, 1.0)
        assert affine_cf(params, (0.0, 0.0, 1.0), 1.0, (0.0, 0.0)) == 1.0 + 0.0j

    def test_boundary_condition_at_t_equals_T(self):
        params = HawkesParams(2.0, 0.5, 1.0)
        state = (0.7, 3.0, 2.4)
        u = (0.5, 1.1)
        got = affine_cf(params, state, 0.7, u)
        assert got == pytest.approx(cmath.exp(1j * (0.5 * 3.0 + 1.1 * 2.4)))

    def test_counting_transform_vs_monte_carlo(self):
        params = HawkesParams(2.0, 0.5, 1.0)
        n = 20000
        counts = np.array([
            simulate_hawkes(params, 1.0, 3, path_index=i).events.n_events
            for i in range(n)
        ], dtype=float)
        for w in (0.5, 1.0):
            analytic = affine_cf(params, (0.0, 0.0, 1.0), 1.0, (w, 0.0))
            est = empirical_cf(counts, w)
            assert cf_ratio(analytic, est) <= 3.0

    def test_intensity_transform_vs_monte_carlo(self):
        params = HawkesParams(2.0, 0.5, 1.0)
        n = 20000
        lam_T = np.array([
            float(simulate_hawkes(params, 1.0, 13, path_index=i).intensity(1.0))
            for i in range(n)
        ])
        analytic = affine_cf(params, (0.0, 0.0, 1.0), 1.0, (0.0, 0.7))
        est = empirical_cf(lam_T, 0.7)
        assert cf_ratio(analytic, est) <= 3.0

    def test_mean_count_critical_branching(self):
        # kappa = 1, theta_bar = 0: unit branching ratio, E[N_1] = 1 exactly
        params = HawkesParams(1.0, 0.0, 1.0)
        h = 1e-4
        cf_h = affine_cf(params, (0.0, 0.0, 1.0), 1.0, (h, 0.0))
        mean_transform = cf_h.imag / h
        assert mean_transform == pytest.approx(1.0, abs=1e-6)
        n = 20000
        counts = np.array([
            simulate_hawkes(params, 1.0, 88, path_index=i).events.n_events
            for i in range(n)
        ], dtype=float)
        se = counts.std(ddof=1) / math.sqrt(n)
        assert abs(counts.mean() - mean_transform) <= 3.0 * se

    def test_mean_count_via_transform_derivative(self):
        # oracle: E[N_T] = Im CF(h, 0) / h + O(h^2); MC must agree
        params = HawkesParams(2.0, 0.5, 1.0)
        h = 1e-4
        cf_h = affine_cf(params, (0.0, 0.0, 1.0), 1.0, (h, 0.0))
        mean_transform = cf_h.imag / h
        n = 20000
        counts = np.array([
            simulate_hawkes(params, 1.0, 17, path_index=i).events.n_events
            for i in range(n)
        ], dtype=float)
        se = counts.std(ddof=1) / math.sqrt(n)
        assert abs(counts.mean() - mean_transform) <= 3.0 * se

    def test_inconsistent_state_rejected(self):
        params = HawkesParams(2.0, 0.5, 1.0)
        # at t = 1 intensity cannot be below the no-event decay floor
        with pytest.raises(ValueError):
            affine_cf(params, (1.0, 0.0, 0.01), 2.0, (0.5, 0.0))

    def test_state_time_beyond_horizon_rejected(self):
        params = HawkesParams(2.0, 0.5, 1.0)
        with pytest.raises(ValueError):
            affine_cf(params, (2.0, 0.0, 1.0), 1.0, (0.5, 0.0))
