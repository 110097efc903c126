import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snoise.errors import (
    IntegrabilityFailureError,
    KernelNotExponentialError,
    UnsupportedMarksError,
)
from snoise.kernels import custom, exponential, jump_to_level, power_law
from snoise.marks import Exponential, PointMass, SampleOnly
from snoise.point_process import MppPath, empty_path, simulate_mpp, standard
from snoise.shotnoise import (
    FiltrationState,
    ShotNoiseProcess,
    conditional_cf,
    conditional_cf_parts,
    conditional_mean,
    eval_shotnoise,
    ou_recursive_update,
    semimartingale_decompose,
)
from snoise.stats import (
    batch_terminal_shotnoise,
    cf_ratio,
    empirical_cf,
    simulate_standard_batch,
)


def state_at_zero(mark_dim=1):
    return FiltrationState(0.0, empty_path(0.0, mark_dim))


class TestEvalShotnoise:
    def test_empty_path_is_zero(self):
        proc = ShotNoiseProcess(exponential(1.0, 1.0), standard(1.0, PointMass(1.0)))
        assert eval_shotnoise(proc, empty_path(5.0), 3.0) == 0.0

    def test_single_jump_decay(self):
        proc = ShotNoiseProcess(exponential(1.0, 1.0), standard(1.0, PointMass(2.0)))
        path = MppPath([1.0], [[2.0]], 3.0)
        assert eval_shotnoise(proc, path, 2.0) == pytest.approx(2.0 * math.exp(-1.0))

    def test_jump_to_level_accumulates(self):
        proc = ShotNoiseProcess(jump_to_level(), standard(1.0, PointMass(1.0)))
        path = MppPath([1.0, 1.5], [[2.0], [-1.0]], 3.0)
        assert eval_shotnoise(proc, path, 2.0) == pytest.approx(1.0)

    def test_right_continuity_at_event(self):
        proc = ShotNoiseProcess(jump_to_level(), standard(1.0, PointMass(1.0)))
        path = MppPath([1.0], [[2.0]], 3.0)
        assert eval_shotnoise(proc, path, 1.0) == 2.0
        assert eval_shotnoise(proc, path, np.nextafter(1.0, 0.0)) == 0.0


class TestConditionalCf:
    def test_theta_zero_is_exactly_one(self):
        proc = ShotNoiseProcess(power_law(1.0), standard(2.0, Exponential(1.0)))
        st0 = state_at_zero()
        assert conditional_cf(proc, st0, 1.0, 0.0) == 1.0 + 0.0j

    def test_compound_poisson_closed_form(self):
        # standard shot noise with jump-to-level kernel is compound Poisson:
        # E e^{i theta S_T} = exp(lam T (e^{i theta u} - 1))
        lam, u, T = 2.0, 0.7, 1.0
        proc = ShotNoiseProcess(jump_to_level(), standard(lam, PointMass(u)))
        st0 = state_at_zero()
        for theta in np.linspace(-5.0, 5.0, 21):
            got = conditional_cf(proc, st0, T, float(theta))
            closed = cmath.exp(lam * T * (cmath.exp(1j * theta * u) - 1.0))
            assert abs(got - closed) <= 1e-8

    def test_cf_vs_monte_carlo(self):
        kern = exponential(1.0, 1.0)
        spec = standard(1.0, PointMass(1.0))
        proc = ShotNoiseProcess(kern, spec)
        batch = simulate_standard_batch(1.0, PointMass(1.0), 1.0, 100000, 5)
        terminal = batch_terminal_shotnoise(kern, batch)
        got = conditional_cf(proc, state_at_zero(), 1.0, 1.0)
        est = empirical_cf(terminal, 1.0)
        assert cf_ratio(got, est) <= 3.0

    def test_hermitian_symmetry(self):
        proc = ShotNoiseProcess(exponential(1.0, 0.5), standard(1.5, Exponential(1.0)))
        st0 = state_at_zero()
        for theta in (0.3, 1.1, 4.2):
            plus = conditional_cf(proc, st0, 1.0, theta)
            minus = conditional_cf(proc, st0, 1.0, -theta)
            assert abs(minus - plus.conjugate()) <= 1e-12

    def test_modulus_bounded_by_one(self):
        proc = ShotNoiseProcess(power_law(c=2.0), standard(3.0, Exponential(0.5)))
        st0 = state_at_zero()
        for theta in np.linspace(-8.0, 8.0, 9):
            assert abs(conditional_cf(proc, st0, 2.0, float(theta))) <= 1.0

    def test_affine_split_exposed(self):
        proc = ShotNoiseProcess(exponential(1.0, 1.0), standard(1.0, PointMass(1.0)))
        path = MppPath([0.3, 0.6], [[1.0], [1.0]], 1.0)
        state = FiltrationState.at(path, 1.0)
        parts = conditional_cf_parts(proc, state, 2.0, 1.3)
        assert parts.value == conditional_cf(proc, state, 2.0, 1.3)
        # state factor is a pure phase: log is purely imaginary for real theta
        assert parts.log_state.real == 0.0
        expected_phase = 1.3 * sum(
            math.exp(-(2.0 - ti)) for ti in (0.3, 0.6))
        assert parts.log_state.imag == pytest.approx(expected_phase, rel=1e-12)

    def test_sample_only_marks_refused(self):
        marks = SampleOnly(lambda rng, t, n: rng.normal(size=(n, 1)), 1)
        proc = ShotNoiseProcess(jump_to_level(), standard(1.0, marks))
        with pytest.raises(UnsupportedMarksError):
            conditional_cf(proc, state_at_zero(), 1.0, 1.0)

    def test_markov_consistency_exponential(self):
        # two histories with identical (t, S_t) give identical CF
        b, t, T = 0.7, 1.0, 2.0
        proc = ShotNoiseProcess(exponential(1.0, b), standard(1.0, PointMass(1.0)))
        u_match = math.exp(b * 0.5) * (math.exp(-b * 0.8) + math.exp(-b * 0.2))
        hist_a = MppPath([0.5], [[u_match]], t)
        hist_b = MppPath([0.2, 0.8], [[1.0], [1.0]], t)
        s_a = eval_shotnoise(proc, hist_a, t)
        s_b = eval_shotnoise(proc, hist_b, t)
        assert s_a == pytest.approx(s_b, rel=1e-14)
        gap = abs(
            conditional_cf(proc, FiltrationState(t, hist_a), T, 1.0)
            - conditional_cf(proc, FiltrationState(t, hist_b), T, 1.0))
        assert gap <= 1e-12

    def test_markov_counterexample_power_law(self):
        # same (t, S_t), different histories: the CF must distinguish them
        t, T = 1.0, 2.0
        proc = ShotNoiseProcess(power_law(1.0), standard(1.0, PointMass(1.0)))
        u_match = 1.5 * (1.0 / 1.8 + 1.0 / 1.2)
        hist_a = MppPath([0.5], [[u_match]], t)
        hist_b = MppPath([0.2, 0.8], [[1.0], [1.0]], t)
        assert eval_shotnoise(proc, hist_a, t) == pytest.approx(
            eval_shotnoise(proc, hist_b, t), rel=1e-14)
        gap = abs(
            conditional_cf(proc, FiltrationState(t, hist_a), T, 1.0)
            - conditional_cf(proc, FiltrationState(t, hist_b), T, 1.0))
        assert gap > 1e-3

    def test_tower_property(self):
        # averaging the time-t conditional CF over states reproduces the
        # time-0 CF (iterated expectations)
        lam, theta, t, T = 1.5, 0.9, 0.5, 1.0
        kern = exponential(1.0, 1.0)
        spec = standard(lam, Exponential(1.0))
        proc = ShotNoiseProcess(kern, spec)
        n = 10000
        batch = simulate_standard_batch(lam, Exponential(1.0), t, n, 31)

        # honesty link: the batch state factor equals conditional_cf for a few
        states = [FiltrationState(t, batch.path(i).restrict(t)) for i in range(5)]
        parts = [conditional_cf_parts(proc, s, T, theta) for s in states]
        common = parts[0].log_future
        for p in parts:
            assert abs(p.log_future - common) < 1e-12

        ids = batch.path_ids()
        aged = np.asarray(kern.G(T - batch.times, batch.marks), dtype=float)
        state_sums = np.bincount(ids, weights=aged, minlength=n)
        vals = np.exp(1j * theta * state_sums) * cmath.exp(common)
        for i, p in enumerate(parts):
            assert abs(vals[i] - p.value) < 1e-12

        target = conditional_cf(proc, state_at_zero(), T, theta)
        mean = vals.mean()
        se = math.sqrt((vals.real.var(ddof=1) + vals.imag.var(ddof=1)) / n)
        assert abs(mean - target) <= 3.0 * se


class TestConditionalMean:
    def test_horizon_equals_state_time(self):
        proc = ShotNoiseProcess(exponential(1.0, 1.0), standard(1.0, PointMass(1.0)))
        path = MppPath([0.5], [[2.0]], 1.0)
        state = FiltrationState.at(path, 1.0)
        expect = eval_shotnoise(proc, path, 1.0)
        assert conditional_mean(proc, state, 1.0) == pytest.approx(expect)

    def test_closed_form_from_zero(self):
        # oracle: int_0^T lam u e^{-b(T-s)} ds = (lam u / b)(1 - e^{-bT})
        lam, u, b, T = 1.5, 0.7, 0.9, 2.0
        proc = ShotNoiseProcess(exponential(1.0, b), standard(lam, PointMass(u)))
        got = conditional_mean(proc, state_at_zero(), T)
        closed = lam * u / b * (1.0 - math.exp(-b * T))
        assert got == pytest.approx(closed, abs=1e-10)

    def test_closed_form_vs_monte_carlo(self):
        lam, b, T = 1.5, 0.9, 2.0
        kern = exponential(1.0, b)
        proc = ShotNoiseProcess(kern, standard(lam, Exponential(1.0)))
        got = conditional_mean(proc, state_at_zero(), T)
        n = 50000
        batch = simulate_standard_batch(lam, Exponential(1.0), T, n, 13)
        terminal = batch_terminal_shotnoise(kern, batch)
        se = terminal.std(ddof=1) / math.sqrt(n)
        assert abs(terminal.mean() - got) <= 3.0 * se

    def test_pure_decay(self):
        b = 0.8
        proc = ShotNoiseProcess(exponential(1.0, b), standard(0.0, PointMass(1.0)))
        path = MppPath([0.5], [[5.0 * math.exp(0.5 * b)]], 1.0)  # S_1 = 5
        state = FiltrationState.at(path, 1.0)
        got = conditional_mean(proc, state, 3.0)
        assert got == pytest.approx(5.0 * math.exp(-b * 2.0), rel=1e-12)

    def test_requires_exponential_kernel(self):
        proc = ShotNoiseProcess(power_law(1.0), standard(1.0, PointMass(1.0)))
        with pytest.raises(KernelNotExponentialError):
            conditional_mean(proc, state_at_zero(), 1.0)


class TestSemimartingaleDecomposition:
    def test_jump_to_level_has_zero_drift(self):
        proc = ShotNoiseProcess(jump_to_level(), standard(2.0, Exponential(1.0)))
        path = simulate_mpp(proc.spec, 2.0, 3)
        grid = np.linspace(0.0, 2.0, 9)
        dec = semimartingale_decompose(proc, path, grid)
        assert np.all(dec.drift == 0.0)
        expect = [path.cumulative_marks(t)[0] for t in grid]
        assert np.allclose(dec.jump_part, expect, atol=0.0)

    def test_single_jump_closed_form(self):
        # oracle: int_{T1}^t -b u e^{-b(s-T1)} ds = u (e^{-b(t-T1)} - 1)
        b, u, t1 = 0.9, 2.0, 0.4
        proc = ShotNoiseProcess(exponential(1.0, b), standard(1.0, PointMass(u)))
        path = MppPath([t1], [[u]], 2.0)
        grid = np.linspace(0.0, 2.0, 9)
        dec = semimartingale_decompose(proc, path, grid)
        for t, d in zip(grid, dec.drift):
            closed = u * (math.exp(-b * (t - t1)) - 1.0) if t >= t1 else 0.0
            assert d == pytest.approx(closed, abs=1e-9)

    @pytest.mark.parametrize("kernel", [exponential(1.2, 0.7), power_law(1.5)])
    def test_reconstruction_identity_random_paths(self, kernel):
        spec = standard(2.0, Exponential(1.0))
        proc = ShotNoiseProcess(kernel, spec)
        grid = np.linspace(0.0, 2.0, 9)
        worst = 0.0
        for i in range(100):
            path = simulate_mpp(spec, 2.0, 17, path_index=i)
            dec = semimartingale_decompose(proc, path, grid)
            s_vals = np.array([eval_shotnoise(proc, path, t) for t in grid])
            worst = max(worst, float(
                np.abs(dec.drift + dec.jump_part - s_vals).max()))
        assert worst <= 1e-8

    def test_integrability_failure_raised(self):
        # g ~ s^{-3/4} is integrable but g^2 is not: the check must fail
        bad = custom(
            lambda t, x: np.asarray(x, dtype=float)[..., 0]
            * 4.0 * np.asarray(t, dtype=float) ** 0.25,
            lambda t, x: np.asarray(x, dtype=float)[..., 0]
            * np.asarray(t, dtype=float) ** -0.75,
            1, check=False)
        proc = ShotNoiseProcess(bad, standard(1.0, PointMass(1.0)))
        path = MppPath([0.5], [[1.0]], 2.0)
        with np.errstate(divide="ignore"), pytest.raises(IntegrabilityFailureError):
            semimartingale_decompose(proc, path, np.linspace(0.0, 2.0, 5))


class TestOuRecursiveUpdate:
    def test_identity_with_no_jumps(self):
        assert ou_recursive_update(0.0, 1.7, 2.0, []) == 1.7

    def test_halving(self):
        assert ou_recursive_update(math.log(2.0), 1.0, 1.0, []) == pytest.approx(0.5)

    def test_offsets_validated(self):
        with pytest.raises(ValueError):
            ou_recursive_update(1.0, 0.0, 1.0, [(1.5, 1.0)])

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10**6), b=st.floats(0.0, 3.0),
           a=st.floats(0.2, 2.0))
    def test_iterated_updates_match_direct_evaluation(self, seed, b, a):
        spec = standard(2.0, Exponential(1.0))
        proc = ShotNoiseProcess(exponential(a, b), spec)
        path = simulate_mpp(spec, 3.0, seed)
        grid = np.linspace(0.0, 3.0, 13)
        s = 0.0
        for lo, hi in zip(grid[:-1], grid[1:]):
            mask = (path.times > lo) & (path.times <= hi)
            jumps = [(float(ti - lo), float(x[0]))
                     for ti, x in zip(path.times[mask], path.marks[mask])]
            s = ou_recursive_update(b, s, hi - lo, jumps, a=a)
        assert abs(s - eval_shotnoise(proc, path, 3.0)) <= 1e-10


def test_mark_dim_mismatch_rejected():
    from snoise.kernels import random_decay
    with pytest.raises(ValueError):
        ShotNoiseProcess(random_decay(), standard(1.0, PointMass(1.0)))


def test_integrability_value_finite_for_builtin():
    proc = ShotNoiseProcess(exponential(1.0, 1.0), standard(2.0, Exponential(1.0)))
    # oracle: int_0^T int (b a x e^{-bs})^2 lam e^{-x} ... finite, positive
    val = proc.integrability_value(2.0)
    assert math.isfinite(val) and val > 0
    # closed form: lam * E[x^2] * int_0^T b^2 e^{-2bs} ds = 2*2*(1-e^{-4})/2
    closed = 2.0 * 2.0 * (1.0 - math.exp(-4.0)) / 2.0
    assert val == pytest.approx(closed, abs=1e-7)
