"""Girsanov machinery for marked point processes and the shot-noise stock model.

An equivalent measure change is encoded by a nonnegative kernel Y(t, x): the
compensator becomes Y(t, x) nu(t, dx) dt and the density process is

    L_t = exp(-int_0^t int (Y(s,x) - 1) nu(s,dx) ds) * prod_{T_n <= t} Y(T_n, U_n),

computed here in log-space.  Only deterministic Y is offered publicly: that is
exactly what preserves independent increments of the cumulative-mark process,
which is the point of the stationary reweighting (lambda'/lambda) eta(x).

The stock model is

    X_t = X_0 exp(mu t + sigma W_t - sigma^2 t / 2
                  + int_0^t sum_{T_i <= s} g(s - T_i, U_i) ds
                  + sum_{T_i <= t} G(0, U_i)),

and absence of arbitrage is operationalized through the drift condition: the
residual assembled here vanishes iff the chosen market price of diffusive
risk makes discounted prices local martingales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    DegenerateJumpsError,
    IntegrabilityFailureError,
    MgfDivergesError,
    QuadratureFailureError,
)
from .kernels import KIND_JUMP_TO_LEVEL, NoiseKernel
from .marks import MarkDistribution
from .point_process import (
    CompensatorSpec,
    MppPath,
    compensator_mass,
    simulate_mpp,
    standard,
)
from .quadrature import DEFAULT_QUAD_TOL, cumulative_simpson
from .rng import TAG_BROWNIAN, make_stream


@dataclass(frozen=True)
class GirsanovKernel:
    """Reweighting kernel Y(t, x) >= 0; vectorized like mark test functions."""

    Y: Callable
    deterministic: bool = True
    time_homogeneous: bool = False

    def finiteness_value(self, spec: CompensatorSpec, t: float,
                         quad_tol: float = DEFAULT_QUAD_TOL) -> float:
        """int_0^t int Y(s, x) nu(s, dx) ds; must be finite for a density."""
        if self.time_homogeneous and spec.stationary_rate is not None:
            return float(spec.slice_integral(0.0, lambda x: self.Y(0.0, x),
                                             quad_tol)) * t
        return float(compensator_mass(spec, 0.0, t, self.Y, quad_tol=quad_tol))


def identity_kernel() -> GirsanovKernel:
    return GirsanovKernel(
        Y=lambda t, x: np.ones(np.asarray(x, dtype=float).shape[:-1]),
        time_homogeneous=True,
    )


@dataclass(frozen=True)
class MartingaleMeasureSpec:
    """Stationary target measure: rate lambda', marks F'(dx) = eta(x) F(dx).

    ``eta`` is the Radon-Nikodym density of F' w.r.t. F (vectorized over mark
    rows); ``marks_prime`` is the sampleable F' used for direct simulation
    under the target measure; ``xi`` optionally overrides the market price of
    diffusive risk (signature ``(t, path) -> float``).
    """

    lambda_prime: float
    eta: Callable
    marks_prime: MarkDistribution | None = None
    xi: Callable | None = None

    def __post_init__(self):
        if self.lambda_prime <= 0:
            raise ValueError("lambda_prime must be > 0")


def unit_eta():
    return lambda x: np.ones(np.asarray(x, dtype=float).shape[:-1])


def eta_normalization(mm: MartingaleMeasureSpec, spec: CompensatorSpec,
                      quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """int eta dF; must equal 1 for F' to be a probability measure."""
    return float(spec.marks.integrate(mm.eta, 0.0, quad_tol))


def stationary_reweight(mm: MartingaleMeasureSpec,
                        spec: CompensatorSpec) -> GirsanovKernel:
    """Y(t, x) = (lambda'/lambda) eta(x) for a stationary base compensator."""
    if spec.stationary_rate is None or spec.stationary_rate <= 0:
        raise ValueError("stationary reweighting needs a constant positive rate")
    factor = mm.lambda_prime / spec.stationary_rate
    return GirsanovKernel(
        Y=lambda t, x: factor * np.asarray(mm.eta(x), dtype=float),
        time_homogeneous=True,
    )


def prime_spec(mm: MartingaleMeasureSpec, spec: CompensatorSpec) -> CompensatorSpec:
    """The compensator under the target measure: rate lambda', marks F'."""
    if mm.marks_prime is None:
        raise ValueError("direct simulation under P' needs sampleable marks_prime")
    return standard(mm.lambda_prime, mm.marks_prime)


@dataclass(frozen=True)
class DensityPath:
    """Girsanov density L along one path, at merged grid and event times.

    ``zero_flag`` marks an absolutely continuous but non-equivalent change:
    some event had Y(T_n, U_n) = 0 and L is exactly zero from there on.
    """

    times: np.ndarray
    L: np.ndarray
    zero_flag: bool


def _compensator_curve(kernel: GirsanovKernel, spec: CompensatorSpec,
                       times: np.ndarray, quad_tol: float) -> np.ndarray:
    """C(t) = int_0^t int (Y - 1) nu(s, dx) ds at the given times."""
    if kernel.time_homogeneous and spec.stationary_rate is not None:
        slope = float(spec.slice_integral(
            0.0, lambda x: np.asarray(kernel.Y(0.0, x), dtype=float) - 1.0,
            quad_tol))
        return slope * times
    vals = cumulative_simpson(
        lambda s: float(spec.slice_integral(
            s, lambda x: np.asarray(kernel.Y(s, x), dtype=float) - 1.0,
            max(quad_tol * 1e-2, 1e-14))),
        times, quad_tol,
    )
    return np.asarray(vals, dtype=float)


def girsanov_compensator(kernel: GirsanovKernel, spec: CompensatorSpec,
                         T: float, *,
                         quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """int_0^T int (Y(s, x) - 1) nu(s, dx) ds, the deterministic log-L part."""
    return float(_compensator_curve(kernel, spec, np.array([0.0, T]),
                                    quad_tol)[-1])


def density_process(kernel: GirsanovKernel, spec: CompensatorSpec,
                    path: MppPath, grid, *,
                    quad_tol: float = DEFAULT_QUAD_TOL) -> DensityPath:
    """The density L along ``path`` at all grid and event times (log-space)."""
    grid = np.asarray(grid, dtype=float)
    t_max = float(grid.max())
    fin = kernel.finiteness_value(spec, t_max, quad_tol)
    if not math.isfinite(fin):
        raise IntegrabilityFailureError(
            f"int Y d nu over [0, {t_max}] is not finite ({fin})"
        )

    ev = path.times[path.times <= t_max]
    mk = path.marks[: ev.size]
    times = np.unique(np.concatenate([[0.0], grid, ev]))
    comp = _compensator_curve(kernel, spec, times, quad_tol)

    if ev.size:
        y_ev = np.asarray(kernel.Y(ev, mk), dtype=float)
        if np.any(y_ev < 0):
            raise ValueError("Girsanov kernel must be nonnegative")
    else:
        y_ev = np.empty(0)
    zero_flag = bool(np.any(y_ev == 0.0))
    with np.errstate(divide="ignore"):
        log_y = np.where(y_ev > 0.0, np.log(np.where(y_ev > 0, y_ev, 1.0)), -np.inf)
    cum_log = np.concatenate([[0.0], np.cumsum(log_y)])
    counts = np.searchsorted(ev, times, side="right")
    log_l = -comp + cum_log[counts]
    L = np.where(np.isneginf(log_l), 0.0, np.exp(log_l))
    return DensityPath(times, L, zero_flag)


class Estimate(NamedTuple):
    value: float
    se: float


def reweighted_expectation(kernel: GirsanovKernel, spec: CompensatorSpec,
                           functional, horizon: float, n_paths: int, seed: int,
                           *, quad_tol: float = DEFAULT_QUAD_TOL) -> Estimate:
    """Importance-sampling estimate of E_{P'}[functional] = E_P[L_T functional]."""
    if n_paths < 2:
        raise ValueError("need at least 2 paths for a standard error")
    fin = kernel.finiteness_value(spec, horizon, quad_tol)
    if not math.isfinite(fin):
        raise IntegrabilityFailureError("int Y d nu is not finite")
    comp_T = _compensator_curve(kernel, spec, np.array([0.0, horizon]),
                                quad_tol)[-1]
    vals = np.empty(n_paths)
    for i in range(n_paths):
        path = simulate_mpp(spec, horizon, seed, path_index=i)
        if path.n_events:
            y = np.asarray(kernel.Y(path.times, path.marks), dtype=float)
            if np.any(y == 0.0):
                w = 0.0
            else:
                w = math.exp(-comp_T + float(np.log(y).sum()))
        else:
            w = math.exp(-comp_T)
        vals[i] = w * float(functional(path))
    return Estimate(float(vals.mean()),
                    float(vals.std(ddof=1) / math.sqrt(n_paths)))


def esscher_density(h: float, times, x_values, mgf) -> np.ndarray:
    """Exponential-tilt density L_t = exp(h X_t) / E[exp(h X_t)] along a path.

    ``mgf`` is E[exp(h X_t)] as a callable of t or as an array aligned with
    ``times``.
    """
    times = np.asarray(times, dtype=float)
    x_values = np.asarray(x_values, dtype=float)
    if callable(mgf):
        m = np.array([float(mgf(t)) for t in times])
    else:
        m = np.asarray(mgf, dtype=float)
    if m.shape != times.shape or x_values.shape != times.shape:
        raise ValueError("times, x_values and mgf values must align")
    if np.any(~np.isfinite(m)) or np.any(m <= 0):
        raise MgfDivergesError("E[exp(h X_t)] must be finite and positive")
    return np.exp(h * x_values) / m


@dataclass(frozen=True)
class MarketParams:
    """Shot-noise stock model inputs.

    ``short_rate`` is a deterministic, vectorized rate curve r(t) with
    locally integrable values.
    """

    x0: float
    mu_drift: float
    sigma: float
    short_rate: Callable
    kernel: NoiseKernel
    spec: CompensatorSpec

    def __post_init__(self):
        if self.x0 <= 0:
            raise ValueError("x0 must be > 0")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.kernel.mark_dim != self.spec.mark_dim:
            raise ValueError("kernel and compensator mark dimensions differ")

    def integrated_rate(self, times, quad_tol: float = DEFAULT_QUAD_TOL):
        """int_0^t r(s) ds at each time."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        pts = np.unique(np.concatenate([[0.0], times]))
        cum = np.asarray(cumulative_simpson(
            lambda s: np.asarray(self.short_rate(s), dtype=float),
            pts, quad_tol, vectorized=True), dtype=float)
        return cum[np.searchsorted(pts, times)]


def _jump_transform_integral(market: MarketParams, fn, t: float,
                             quad_tol: float) -> float:
    """int fn(e^{G(0,x)}) nu(t, dx) for the slice measure."""
    G0 = lambda x: np.asarray(market.kernel.G(0.0, x), dtype=float)
    return float(market.spec.slice_integral(
        t, lambda x: fn(np.exp(G0(x))), quad_tol))


def sum_past_g(market: MarketParams, t: float, path: MppPath,
               *, strict: bool = False) -> float:
    """sum over past events of g(t - T_i, U_i); ``strict`` excludes T_i = t."""
    side = "left" if strict else "right"
    k = int(np.searchsorted(path.times, t, side=side))
    if k == 0:
        return 0.0
    vals = np.asarray(
        market.kernel.g(t - path.times[:k], path.marks[:k]), dtype=float)
    return float(vals.sum())


def mmm_ell(market: MarketParams, t: float, x_tm: float, path: MppPath, *,
            quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """The minimal-martingale-measure loading at t-:

        ell = (mu + sum_{T_i < t} g(t - T_i, U_i) + int (e^{G(0,x)} - 1) nu(t,dx))
              / (X_{t-} * int (e^{G(0,x)} - 1)^2 nu(t,dx)).

    Exposed as a diagnostic only; simulating under the minimal martingale
    measure is out of scope because it destroys independent increments.
    """
    num_jump = _jump_transform_integral(market, lambda e: e - 1.0, t, quad_tol)
    den = _jump_transform_integral(market, lambda e: (e - 1.0) ** 2, t, quad_tol)
    if den <= 0.0:
        raise DegenerateJumpsError(
            "int (e^{G(0,x)} - 1)^2 nu(t, dx) vanishes; no jump risk at t"
        )
    num = market.mu_drift + sum_past_g(market, t, path, strict=True) + num_jump
    return num / den / x_tm


def jump_moment_m1(market: MarketParams,
                   mm: MartingaleMeasureSpec | None, *,
                   quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """m1 = int (e^{G(0,x)} - 1) lambda' F'(dx), with F' = eta F.

    ``mm = None`` means the identity target (lambda' = lambda, eta = 1).
    """
    if market.spec.rate_bound == 0.0:
        return 0.0
    G0 = lambda x: np.asarray(market.kernel.G(0.0, x), dtype=float)
    if mm is None:
        if market.spec.stationary_rate is None:
            raise ValueError("identity-target m1 needs a constant rate")
        lam_p = market.spec.stationary_rate
        eta = unit_eta()
    else:
        lam_p, eta = mm.lambda_prime, mm.eta
    try:
        val = lam_p * float(market.spec.marks.integrate(
            lambda x: (np.exp(G0(x)) - 1.0) * np.asarray(eta(x), dtype=float),
            0.0, quad_tol))
    except QuadratureFailureError as exc:
        raise MgfDivergesError(
            f"int e^{{G(0,x)}} dF' could not be established finite: {exc}"
        ) from exc
    if not math.isfinite(val):
        raise MgfDivergesError("int e^{G(0,x)} dF' is not finite")
    return val


def market_price_of_risk(market: MarketParams,
                         mm: MartingaleMeasureSpec | None,
                         t: float, path: MppPath, *,
                         quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """xi_t = sigma^{-1} (mu - r(t) + m1 + sum_{T_i <= t} g(t - T_i, U_i))."""
    m1 = jump_moment_m1(market, mm, quad_tol=quad_tol)
    r_t = float(market.short_rate(t))
    return (market.mu_drift - r_t + m1 + sum_past_g(market, t, path)) / market.sigma


def drift_residual(market: MarketParams, mm: MartingaleMeasureSpec | None,
                   t: float, path: MppPath, *, xi: float | None = None,
                   quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """Residual of the drift condition at (t, path state); zero iff it holds.

    Assembled independently of :func:`market_price_of_risk`: the jump term is
    integrated against Y(t, x) nu(t, dx) with Y = (lambda'/lambda) eta rather
    than against lambda' F' directly.  ``mm = None`` targets P itself (Y = 1).
    """
    if xi is None:
        xi_t = (mm.xi(t, path) if mm is not None and mm.xi is not None
                else market_price_of_risk(market, mm, t, path, quad_tol=quad_tol))
    else:
        xi_t = float(xi)
    if market.spec.rate_bound == 0.0:
        jump_term = 0.0
    else:
        y_fn = (identity_kernel() if mm is None
                else stationary_reweight(mm, market.spec)).Y
        G0 = lambda x: np.asarray(market.kernel.G(0.0, x), dtype=float)
        jump_term = float(market.spec.slice_integral(
            t,
            lambda x: (np.exp(G0(x)) - 1.0) * np.asarray(y_fn(t, x), dtype=float),
            quad_tol))
    r_t = float(market.short_rate(t))
    return r_t - (market.mu_drift - market.sigma * xi_t
                  + sum_past_g(market, t, path) + jump_term)


@dataclass(frozen=True)
class StockPaths:
    times: np.ndarray
    X: np.ndarray  # (n_paths, len(times))
    paths: tuple | None = None  # underlying MppPaths when retained


def simulate_stock(market: MarketParams, mm: MartingaleMeasureSpec | None,
                   horizon: float, grid, n_paths: int, seed: int, *,
                   store_paths: bool = False, points_per_unit: int = 1024,
                   max_events: int = 1_000_000,
                   quad_tol: float = DEFAULT_QUAD_TOL) -> StockPaths:
    """Simulate the stock on the output ``grid`` (must start at 0).

    Under ``mm`` the jumps run with compensator lambda' F' and the Brownian
    motion acquires drift -xi; xi is path-dependent through the accumulated
    g-sum and is evaluated at the left grid point (predictable evaluation).
    The time integral of the g-sum uses a trapezoid on a dense grid (the
    declared ``points_per_unit`` per unit time) refined with all event times,
    so the kinks at events carry no discretization bias.  For the
    jump-to-level kernel g = 0 and both path integrals collapse to closed
    form, making the simulation exact on the output grid.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or grid[0] != 0.0:
        raise ValueError("grid must be 1-d, start at 0 and have >= 2 points")
    if np.any(np.diff(grid) <= 0) or grid[-1] > horizon:
        raise ValueError("grid must be strictly increasing within [0, horizon]")

    sim_spec = prime_spec(mm, market.spec) if mm is not None else market.spec
    mu, sigma = market.mu_drift, market.sigma
    g_is_zero = market.kernel.kind == KIND_JUMP_TO_LEVEL

    # deterministic part of xi; the path part is added per path below
    if mm is not None:
        m1 = jump_moment_m1(market, mm, quad_tol=quad_tol)
        r_grid = market.integrated_rate(grid, quad_tol)
        int_xi_det = (mu * grid - r_grid + m1 * grid) / sigma
    else:
        int_xi_det = None

    n_out = grid.size
    X = np.empty((n_paths, n_out))
    kept = [] if store_paths else None

    for i in range(n_paths):
        path = simulate_mpp(sim_spec, horizon, seed, path_index=i,
                            max_events=max_events)
        bm = make_stream(seed, i, TAG_BROWNIAN)

        jump_sum = _cumulative_jumps(market.kernel, path, grid)

        if g_is_zero:
            w = np.concatenate(
                [[0.0], np.cumsum(bm.normal(size=n_out - 1)
                                  * np.sqrt(np.diff(grid)))])
            drift_int = np.zeros(n_out)
            int_xi = int_xi_det if mm is not None else 0.0
        else:
            dense = np.linspace(0.0, grid[-1],
                                int(math.ceil(points_per_unit * grid[-1])) + 1)
            ref = np.unique(np.concatenate(
                [dense, grid, path.times[path.times <= grid[-1]]]))
            w_ref = np.concatenate(
                [[0.0], np.cumsum(bm.normal(size=ref.size - 1)
                                  * np.sqrt(np.diff(ref)))])
            # event times sit on the refined grid; a cell ending at an event
            # must use the pre-jump (left) limit there, so the trapezoid sees
            # a smooth integrand inside every cell
            gsum_rc = _gsum_curve(market.kernel, path, ref, strict=False)
            gsum_lc = _gsum_curve(market.kernel, path, ref, strict=True)
            drift_ref = np.concatenate(
                [[0.0],
                 np.cumsum(0.5 * (gsum_rc[:-1] + gsum_lc[1:]) * np.diff(ref))])
            idx = np.searchsorted(ref, grid)
            w = w_ref[idx]
            drift_int = drift_ref[idx]
            if mm is not None:
                xi_path_ref = gsum_rc / sigma  # path part of xi, left-evaluated
                int_xi_path = np.concatenate(
                    [[0.0], np.cumsum(xi_path_ref[:-1] * np.diff(ref))])
                int_xi = int_xi_det + int_xi_path[idx]
            else:
                int_xi = 0.0

        log_x = (math.log(market.x0) + mu * grid + sigma * w
                 - 0.5 * sigma**2 * grid + drift_int + jump_sum)
        if mm is not None:
            log_x = log_x - sigma * int_xi
        X[i] = np.exp(log_x)
        if store_paths:
            kept.append(path)

    return StockPaths(grid, X, tuple(kept) if store_paths else None)


def _cumulative_jumps(kernel: NoiseKernel, path: MppPath, grid) -> np.ndarray:
    """sum_{T_i <= t} G(0, U_i) at each grid time."""
    if path.n_events == 0:
        return np.zeros(len(grid))
    g0 = np.asarray(kernel.G(0.0, path.marks), dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(g0)])
    counts = np.searchsorted(path.times, grid, side="right")
    return cum[counts]


def _gsum_curve(kernel: NoiseKernel, path: MppPath, times: np.ndarray,
                strict: bool = False) -> np.ndarray:
    """sum over events of g(u - T_i, U_i) at each u; ``strict`` uses T_i < u."""
    if path.n_events == 0:
        return np.zeros(times.size)
    lag = times[:, None] - path.times[None, :]
    active = lag > 0.0 if strict else lag >= 0.0
    vals = np.asarray(kernel.g(np.maximum(lag, 0.0), path.marks), dtype=float)
    return np.where(active, vals, 0.0).sum(axis=1)
