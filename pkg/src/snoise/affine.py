"""Affine self-exciting intensity: counting process N with intensity lambda,
where d lambda_t = kappa (theta_bar - lambda_t) dt + dN_t.

The pair X = (N, lambda) is affine on N0 x R>=0 when theta_bar >= 0, so its
conditional transform exp(phi + psi1 N + psi2 lambda) is governed by a
generalized Riccati system; and lambda itself, net of its deterministic part,
is a shot-noise process with unit marks and exponential kernel exp(-kappa t).

Transform-argument convention: the solver integrates the ODEs in the complex
boundary datum directly, so to evaluate E[exp(i <u, X_T>)] pass the boundary
``i u``.  :func:`affine_cf` applies the factor i for you.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, ExplosionGuardError
from .point_process import MppPath, break_ties, empty_path
from .rng import TAG_HAWKES, make_stream

DEFAULT_STEPS_PER_UNIT = 2048
_PSI_GUARD = 1e6


@dataclass(frozen=True)
class HawkesParams:
    kappa: float
    theta_bar: float
    lambda0: float

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if self.theta_bar < 0:
            raise ValueError("theta_bar must be >= 0 (affine state space)")
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be >= 0")

    @property
    def branching_ratio(self) -> float:
        """Mean offspring per event, 1/kappa; subcritical iff < 1."""
        return 1.0 / self.kappa

    def mean_intensity_floor(self, t: float) -> float:
        """Lowest reachable intensity at time t (no events)."""
        e = math.exp(-self.kappa * t)
        return self.lambda0 * e + self.theta_bar * (1.0 - e)


@dataclass(frozen=True)
class HawkesPath:
    """Events (unit marks) plus the post-jump intensity recorded at each event."""

    events: MppPath
    intensities: np.ndarray
    params: HawkesParams

    def intensity(self, t) -> np.ndarray:
        """Closed-form lambda_t from the event times (right-continuous)."""
        t = np.asarray(t, dtype=float)
        p = self.params
        base = (p.lambda0 * np.exp(-p.kappa * t)
                + p.theta_bar * (1.0 - np.exp(-p.kappa * t)))
        times = self.events.times
        if times.size == 0:
            return base
        lag = t[..., None] - times
        kicks = np.where(lag >= 0.0, np.exp(-p.kappa * np.maximum(lag, 0.0)), 0.0)
        return base + kicks.sum(axis=-1)


def simulate_hawkes(params: HawkesParams, horizon: float, seed: int, *,
                    path_index: int = 0,
                    max_events: int = 1_000_000) -> HawkesPath:
    """Ogata thinning with the piecewise bound max(current lambda, theta_bar).

    Between events the intensity decays toward theta_bar, so that bound
    dominates on each inter-candidate interval; it is refreshed at every
    candidate, accepted or not.  Near-critical parameters can generate huge
    cascades, hence the event cap.
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    rng = make_stream(seed, path_index, TAG_HAWKES)
    kappa, theta_bar = params.kappa, params.theta_bar

    t = 0.0
    lam = params.lambda0  # right-continuous intensity at time t
    times: list[float] = []
    intens: list[float] = []
    while True:
        lam_bar = max(lam, theta_bar)
        if lam_bar <= 0.0:
            break  # zero intensity is absorbing
        t_cand = t + rng.exponential(1.0 / lam_bar)
        if t_cand > horizon:
            break
        lam_cand = theta_bar + (lam - theta_bar) * math.exp(-kappa * (t_cand - t))
        t, lam = t_cand, lam_cand
        if rng.uniform() * lam_bar <= lam_cand:
            lam += 1.0
            times.append(t)
            intens.append(lam)
            if len(times) > max_events:
                raise ExplosionGuardError(
                    f"event count exceeded cap {max_events}; "
                    f"parameters may be supercritical (kappa = {kappa})"
                )

    times_arr = break_ties(np.asarray(times, dtype=float))
    if times_arr.size:
        events = MppPath(times_arr, np.ones((times_arr.size, 1)), horizon)
    else:
        events = empty_path(horizon, 1)
    return HawkesPath(events, np.asarray(intens, dtype=float), params)


@dataclass(frozen=True)
class RiccatiSolution:
    grid: np.ndarray
    phi: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    u: tuple

    @property
    def final(self) -> tuple[complex, complex, complex]:
        return complex(self.phi[-1]), complex(self.psi1[-1]), complex(self.psi2[-1])


def riccati_solve(params: HawkesParams, u, horizon: float,
                  steps: int | None = None) -> RiccatiSolution:
    """Fixed-step RK4 for the generalized Riccati system

        phi' = kappa theta_bar psi2,   psi1' = 0,
        psi2' = -kappa psi2 + exp(psi1 + psi2) - 1,

    with phi(0) = 0 and psi(0) = u (the complex boundary datum).  psi1 is
    constant by construction, not integration.  Fixed steps keep runs
    reproducible and give a clean order-4 convergence signature.
    """
    u = (complex(u[0]), complex(u[1]))
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if horizon == 0.0:
        grid = np.zeros(1)
        return RiccatiSolution(
            grid, np.zeros(1, dtype=complex),
            np.full(1, u[0], dtype=complex), np.full(1, u[1], dtype=complex), u,
        )
    if steps is None:
        steps = max(100, int(math.ceil(DEFAULT_STEPS_PER_UNIT * horizon)))
    if steps < 100:
        raise ValueError("steps must be >= 100")

    kappa, theta_bar = params.kappa, params.theta_bar
    psi1 = u[0]
    h = horizon / steps
    grid = np.linspace(0.0, horizon, steps + 1)
    phi = np.zeros(steps + 1, dtype=complex)
    psi2 = np.zeros(steps + 1, dtype=complex)
    psi2[0] = u[1]

    def rhs(p2):
        return kappa * theta_bar * p2, -kappa * p2 + cmath.exp(psi1 + p2) - 1.0

    p, q = 0.0 + 0.0j, u[1]
    for k in range(steps):
        try:
            dp1, dq1 = rhs(q)
            dp2, dq2 = rhs(q + 0.5 * h * dq1)
            dp3, dq3 = rhs(q + 0.5 * h * dq2)
            dp4, dq4 = rhs(q + h * dq3)
        except OverflowError as exc:
            raise BlowUpError(
                f"exp(psi1 + psi2) overflowed at t = {grid[k]:.6g}"
            ) from exc
        p = p + (h / 6.0) * (dp1 + 2.0 * dp2 + 2.0 * dp3 + dp4)
        q = q + (h / 6.0) * (dq1 + 2.0 * dq2 + 2.0 * dq3 + dq4)
        if not (cmath.isfinite(p) and cmath.isfinite(q)) or abs(q) > _PSI_GUARD:
            raise BlowUpError(
                f"|psi2| exceeded guard {_PSI_GUARD:.1e} at t = {grid[k + 1]:.6g}"
            )
        phi[k + 1] = p
        psi2[k + 1] = q

    return RiccatiSolution(grid, phi, np.full(steps + 1, psi1, dtype=complex),
                           psi2, u)


def affine_cf(params: HawkesParams, state, T: float, u, *,
              steps: int | None = None) -> complex:
    """E[exp(i u . (N_T, lambda_T)) | state] for state = (t, N_t, lambda_t)."""
    t, n_t, lam_t = state
    if t > T:
        raise ValueError("need state time <= T")
    floor = params.mean_intensity_floor(t)
    if lam_t < floor - 1e-9:
        raise ValueError(
            f"inconsistent state: lambda_t = {lam_t} below reachable floor {floor}"
        )
    boundary = (1j * complex(u[0]), 1j * complex(u[1]))
    if T == t:
        return cmath.exp(boundary[0] * n_t + boundary[1] * lam_t)
    sol = riccati_solve(params, boundary, T - t, steps)
    phi_T, psi1_T, psi2_T = sol.final
    return cmath.exp(phi_T + psi1_T * n_t + psi2_T * lam_t)
