"""Shot-noise processes: evaluation, conditional characteristic function,
conditional mean, semimartingale decomposition and the Markov one-step update.

The process is S_t = sum_{T_i <= t} G(t - T_i, U_i) built from a noise kernel
and a marked point process with deterministic compensator nu(ds, dx).  The
conditional characteristic function splits into an exponential-affine pair:

    E[exp(i theta S_T) | F_t]
        = exp(i theta sum_{T_i <= t} G(T - T_i, U_i))            (state factor)
        * exp(int_t^T int (exp(i theta G(T-s, x)) - 1) nu(ds,dx)) (future factor)

Both log-factors are exposed so the affine structure itself can be asserted.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    IntegrabilityFailureError,
    KernelNotExponentialError,
    QuadratureFailureError,
    UnsupportedMarksError,
)
from .kernels import KIND_EXPONENTIAL, NoiseKernel
from .marks import MODE_SAMPLE
from .point_process import CompensatorSpec, MppPath, compensator_mass
from .quadrature import DEFAULT_QUAD_TOL, adaptive_simpson


@dataclass(frozen=True)
class ShotNoiseProcess:
    kernel: NoiseKernel
    spec: CompensatorSpec

    def __post_init__(self):
        if self.kernel.mark_dim != self.spec.mark_dim:
            raise ValueError(
                f"kernel mark_dim {self.kernel.mark_dim} != "
                f"compensator mark_dim {self.spec.mark_dim}"
            )
        object.__setattr__(self, "_gsq_cache", {})

    def integrability_value(self, T: float,
                            quad_tol: float = DEFAULT_QUAD_TOL) -> float:
        """int_0^T int g(s, x)^2 nu(ds, dx); finiteness makes S a semimartingale.

        Path-independent, so cached per (T, quad_tol); recomputing under a
        concurrent race is harmless.
        """
        key = (float(T), float(quad_tol))
        cached = self._gsq_cache.get(key)
        if cached is not None:
            return cached
        val = float(compensator_mass(
            self.spec, 0.0, T,
            lambda s, x: np.asarray(self.kernel.g(s, x), dtype=float) ** 2,
            quad_tol=quad_tol,
        ))
        self._gsq_cache[key] = val
        return val


@dataclass(frozen=True)
class FiltrationState:
    """What has been observed up to time t: the path restricted to [0, t]."""

    t: float
    observed: MppPath

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("time must be >= 0")
        if self.observed.n_events and self.observed.times[-1] > self.t:
            raise ValueError("observed events beyond the state time")

    @staticmethod
    def at(path: MppPath, t: float) -> "FiltrationState":
        return FiltrationState(t, path.restrict(t))


def eval_shotnoise(proc: ShotNoiseProcess, path: MppPath, t: float) -> float:
    """S_t = sum_{T_i <= t} G(t - T_i, U_i); right-continuous at event times."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t > path.horizon:
        raise ValueError("t beyond path horizon")
    k = path.count(t)
    if k == 0:
        return 0.0
    vals = np.asarray(
        proc.kernel.G(t - path.times[:k], path.marks[:k]), dtype=float
    )
    return float(vals.sum())


def state_value(proc: ShotNoiseProcess, state: FiltrationState) -> float:
    """S at the state time, from the observed events only."""
    obs = state.observed
    if obs.n_events == 0:
        return 0.0
    vals = np.asarray(proc.kernel.G(state.t - obs.times, obs.marks), dtype=float)
    return float(vals.sum())


class CfParts(NamedTuple):
    """log split of the conditional CF: value = exp(log_state + log_future)."""

    log_state: complex
    log_future: complex

    @property
    def value(self) -> complex:
        return cmath.exp(self.log_state + self.log_future)


def conditional_cf_parts(proc: ShotNoiseProcess, state: FiltrationState,
                         T: float, theta, *,
                         quad_tol: float = DEFAULT_QUAD_TOL) -> CfParts:
    """Exponential-affine split of E[exp(i theta S_T) | F_t].

    ``theta`` may be complex (imaginary arguments give exponential moments);
    for real theta the future log-factor's real part is capped at zero, which
    is a property of the exact integral (its integrand has nonpositive real
    part) and keeps |CF| <= 1 exactly.
    """
    theta = complex(theta)
    if state.t > T:
        raise ValueError("need state time <= T")
    if proc.spec.marks.mode == MODE_SAMPLE and theta != 0.0:
        raise UnsupportedMarksError(
            "analytic CF needs integrable marks; use the Monte Carlo oracle "
            "for sample-only mark distributions"
        )

    obs = state.observed
    if obs.n_events:
        past = float(np.sum(np.asarray(
            proc.kernel.G(T - obs.times, obs.marks), dtype=float)))
    else:
        past = 0.0
    log_state = 1j * theta * past

    if theta == 0.0:
        return CfParts(log_state, 0.0 + 0.0j)

    def test_fn(s, x):
        g_vals = np.asarray(proc.kernel.G(T - s, x), dtype=float)
        return np.exp(1j * theta * g_vals) - 1.0

    log_future = complex(compensator_mass(
        proc.spec, state.t, T, test_fn, quad_tol=quad_tol))
    if theta.imag == 0.0 and log_future.real > 0.0:
        log_future = complex(0.0, log_future.imag)
    return CfParts(log_state, log_future)


def conditional_cf(proc: ShotNoiseProcess, state: FiltrationState, T: float,
                   theta, *, quad_tol: float = DEFAULT_QUAD_TOL) -> complex:
    """E[exp(i theta S_T) | F_t] for a deterministic, finite compensator."""
    return conditional_cf_parts(proc, state, T, theta, quad_tol=quad_tol).value


def conditional_mean(proc: ShotNoiseProcess, state: FiltrationState, T: float,
                     *, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """E[S_T | F_t] for an exponential kernel: decayed state plus future inflow."""
    if proc.kernel.kind != KIND_EXPONENTIAL:
        raise KernelNotExponentialError(
            f"conditional_mean needs an exponential kernel, got {proc.kernel.kind}"
        )
    a = proc.kernel.params["a"]
    b = proc.kernel.params["b"]
    s_t = state_value(proc, state)
    if T == state.t:
        return s_t
    future = compensator_mass(
        proc.spec, state.t, T,
        lambda s, x: a * np.asarray(x, dtype=float)[..., 0]
        * math.exp(-b * (T - s)),
        quad_tol=quad_tol,
    )
    return math.exp(-b * (T - state.t)) * s_t + float(future)


class Decomposition(NamedTuple):
    grid: np.ndarray
    drift: np.ndarray
    jump_part: np.ndarray


def semimartingale_decompose(proc: ShotNoiseProcess, path: MppPath, grid, *,
                             quad_tol: float = DEFAULT_QUAD_TOL,
                             check_integrability: bool = True) -> Decomposition:
    """Pathwise split S = drift + jump_part on the grid.

    drift(t) = int_0^t sum_{T_i <= u} g(u - T_i, U_i) du  (quadrature broken
    at event times, where the integrand kinks); jump_part(t) is the
    accumulated instantaneous response sum_{T_i <= t} G(0, U_i).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-d array")
    if np.any(grid < 0) or np.any(np.diff(grid) < 0) or grid[-1] > path.horizon:
        raise ValueError("grid must be sorted within [0, horizon]")

    if check_integrability:
        try:
            gsq = proc.integrability_value(float(grid[-1]), quad_tol=quad_tol)
        except QuadratureFailureError as exc:
            raise IntegrabilityFailureError(
                f"int g^2 d nu could not be established finite: {exc}"
            ) from exc
        if not math.isfinite(gsq):
            raise IntegrabilityFailureError(
                f"int g^2 d nu = {gsq}; semimartingale condition fails"
            )

    times, marks = path.times, path.marks
    t_end = float(grid[-1])

    # split [0, t_end] wherever the integrand's smoothness can break: at
    # event times and, for tabulated kernels, at event time + knot lags
    bks = [times[times <= t_end]]
    for knot in proc.kernel.params.get("t_knots", ()):
        bks.append(times + knot)
    pts = np.unique(np.concatenate([[0.0], grid, *bks]))
    pts = pts[(pts >= 0.0) & (pts <= t_end)]

    # within each piece the active event set is frozen, so the integrand is
    # smooth on the closed piece and adaptive refinement cannot stall on an
    # endpoint jump
    cum = np.zeros(pts.size)
    running = 0.0
    for k in range(1, pts.size):
        a, b = pts[k - 1], pts[k]
        n_active = int(np.searchsorted(times, a, side="right"))
        if n_active and b > a:
            act_t = times[:n_active]
            act_m = marks[:n_active]

            def piece(u, act_t=act_t, act_m=act_m):
                lag = np.asarray(u, dtype=float)[:, None] - act_t[None, :]
                return np.asarray(
                    proc.kernel.g(lag, act_m), dtype=float).sum(axis=1)

            running += float(adaptive_simpson(
                piece, a, b, quad_tol * (b - a) / t_end, vectorized=True))
        cum[k] = running
    drift = cum[np.searchsorted(pts, grid)]

    g0 = np.asarray(proc.kernel.G(0.0, marks), dtype=float) if times.size else np.empty(0)
    counts = np.searchsorted(times, grid, side="right")
    jump_cum = np.concatenate([[0.0], np.cumsum(g0)])
    jump_part = jump_cum[counts]
    return Decomposition(grid, drift, jump_part)


def ou_recursive_update(b: float, s_t: float, dt: float, new_jumps, *,
                        a: float = 1.0) -> float:
    """Markov one-step update for the exponential kernel a*x*exp(-b t).

    ``new_jumps`` lists ``(offset, x1)`` pairs with offsets in (0, dt] measured
    from the step start.  Equals re-evaluating the full path at t + dt.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    out = math.exp(-b * dt) * s_t
    for offset, x1 in new_jumps:
        if not 0.0 < offset <= dt:
            raise ValueError("jump offsets must lie in (0, dt]")
        out += a * float(x1) * math.exp(-b * (dt - offset))
    return out
