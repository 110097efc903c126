import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snoise.errors import (
    DimensionMismatchError,
    NonFiniteError,
    NotSeparableError,
    ZeroAtOriginError,
)
from snoise.kernels import (
    check_absolute_continuity,
    custom,
    eval_G,
    exponential,
    from_table,
    is_markov_kernel,
    jump_to_level,
    power_law,
    random_decay,
)

QUAD_TOL = 1e-8


class TestEvalG:
    def test_exponential_at_origin(self):
        assert eval_G(exponential(1.0, 2.0), 0.0, [3.0]) == pytest.approx(3.0)

    def test_power_law_substitution(self):
        assert eval_G(power_law(1.0), 1.0, [2.0]) == pytest.approx(1.0)

    def test_random_decay(self):
        val = eval_G(random_decay(), math.log(2.0), [4.0, 1.0])
        assert val == pytest.approx(2.0)

    def test_jump_to_level_ignores_age(self):
        k = jump_to_level()
        assert eval_G(k, 0.0, [1.5]) == eval_G(k, 7.0, [1.5]) == 1.5

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            eval_G(random_decay(), 1.0, [1.0])

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            eval_G(exponential(1.0, 1.0), -0.1, [1.0])

    def test_non_finite_detected(self):
        bad = custom(lambda t, x: np.asarray(x, dtype=float)[..., 0] / (np.asarray(t, dtype=float) - 0.5),
                     lambda t, x: np.zeros(np.broadcast(np.asarray(t, dtype=float), np.asarray(x, dtype=float)[..., 0]).shape),
                     1, check=False)
        with np.errstate(divide="ignore"), pytest.raises(NonFiniteError):
            eval_G(bad, 0.5, [1.0])


class TestAbsoluteContinuity:
    @pytest.mark.parametrize("kernel", [
        jump_to_level(), exponential(1.0, 2.0), exponential(-0.5, 0.3),
        power_law(0.7),
    ])
    def test_builtin_residual_within_tol(self, kernel):
        assert check_absolute_continuity(kernel) <= QUAD_TOL

    def test_random_decay_with_varying_decay_rate(self):
        x1 = np.linspace(0.1, 3.0, 50)
        xs = np.column_stack([x1, np.linspace(0.2, 2.5, 50)])
        assert check_absolute_continuity(random_decay(), xs=xs) <= QUAD_TOL


class TestCustomKernels:
    def test_consistent_pair_accepted(self):
        k = custom(
            lambda t, x: np.asarray(x, dtype=float)[..., 0] * np.exp(-1.5 * np.asarray(t, dtype=float)),
            lambda t, x: -1.5 * np.asarray(x, dtype=float)[..., 0] * np.exp(-1.5 * np.asarray(t, dtype=float)),
            1)
        assert eval_G(k, 1.0, [2.0]) == pytest.approx(2.0 * math.exp(-1.5))

    def test_inconsistent_pair_rejected(self):
        with pytest.raises(ValueError, match="inconsistent"):
            custom(
                lambda t, x: np.asarray(x, dtype=float)[..., 0] * np.exp(-1.5 * np.asarray(t, dtype=float)),
                lambda t, x: -0.5 * np.asarray(x, dtype=float)[..., 0] * np.exp(-1.5 * np.asarray(t, dtype=float)),
                1)

    def test_table_kernel_interpolates_and_is_consistent(self):
        ts = [0.0, 0.5, 1.0, 2.0]
        xs = [0.0, 1.0, 2.0, 4.0]
        vals = np.outer([1.0, 0.7, 0.5, 0.3], xs)
        k = from_table(ts, xs, vals)
        assert eval_G(k, 0.5, [2.0]) == pytest.approx(1.4)
        assert eval_G(k, 0.75, [1.0]) == pytest.approx(0.6)  # linear in t
        resid = check_absolute_continuity(
            k, ts=np.linspace(0.0, 2.0, 17), xs=np.linspace(0.5, 3.5, 7))
        assert resid <= QUAD_TOL

    def test_table_shape_validation(self):
        with pytest.raises(ValueError):
            from_table([0.0, 1.0], [0.0, 1.0], np.zeros((3, 2)))


class TestMarkovClassification:
    def test_exponential_is_markov_with_exact_fit(self):
        res = is_markov_kernel(exponential(1.0, 0.5),
                               grid=np.linspace(0.0, 5.0, 11), tol=1e-10)
        assert res.is_markov
        assert res.a == pytest.approx(1.0, abs=1e-12)
        assert res.b == pytest.approx(0.5, abs=1e-12)

    def test_constant_kernel_is_markov_with_b_zero(self):
        res = is_markov_kernel(exponential(2.0, 0.0))
        assert res.is_markov
        assert res.a == pytest.approx(2.0)
        assert res.b == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("c", [0.01, 0.1, 1.0, 10.0])
    def test_power_law_never_markov(self, c):
        assert not is_markov_kernel(power_law(c)).is_markov

    def test_power_law_rejected_with_oracle_residual(self):
        grid = np.linspace(0.0, 5.0, 11)
        res = is_markov_kernel(power_law(1.0), grid=grid, tol=1e-10)
        assert not res.is_markov
        # oracle: evaluate the Cauchy-relation residual directly
        H = lambda t: 1.0 / (1.0 + t)
        worst = max(
            abs(H(s - t) * H(t) - H(s) * H(0.0))
            for t in grid for s in grid if s >= t)
        assert worst > 1e-10
        assert res.max_residual == pytest.approx(worst, rel=1e-12)

    def test_jump_to_level_is_markov(self):
        res = is_markov_kernel(jump_to_level())
        assert res.is_markov and res.b == pytest.approx(0.0)

    def test_random_decay_not_separable(self):
        with pytest.raises(NotSeparableError):
            is_markov_kernel(random_decay())

    def test_nonlinear_mark_dependence_not_separable(self):
        k = custom(lambda t, x: np.asarray(x, dtype=float)[..., 0] ** 2 * np.exp(-np.asarray(t, dtype=float)),
                   lambda t, x: -np.asarray(x, dtype=float)[..., 0] ** 2 * np.exp(-np.asarray(t, dtype=float)),
                   1)
        with pytest.raises(NotSeparableError):
            is_markov_kernel(k)

    def test_zero_at_origin(self):
        k = custom(lambda t, x: np.asarray(x, dtype=float)[..., 0] * np.sin(np.asarray(t, dtype=float)),
                   lambda t, x: np.asarray(x, dtype=float)[..., 0] * np.cos(np.asarray(t, dtype=float)),
                   1)
        with pytest.raises(ZeroAtOriginError):
            is_markov_kernel(k)

    def test_grid_needs_three_points(self):
        with pytest.raises(ValueError):
            is_markov_kernel(exponential(1.0, 1.0), grid=[0.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(
    a=st.floats(0.1, 3.0),
    b=st.floats(-1.0, 3.0),
    t=st.floats(0.0, 5.0),
    s=st.floats(0.0, 5.0),
    x=st.floats(0.1, 10.0),
)
def test_exponential_semigroup_identity(a, b, t, s, x):
    k = exponential(a, b)
    lhs = eval_G(k, t + s, [x])
    rhs = math.exp(-b * s) * eval_G(k, t, [x])
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.1, 3.0), b=st.floats(-1.0, 3.0))
def test_random_exponential_kernels_classified_markov(a, b):
    res = is_markov_kernel(exponential(a, b))
    assert res.is_markov
    assert res.a == pytest.approx(a, abs=1e-9)
    assert res.b == pytest.approx(b, abs=1e-9)
