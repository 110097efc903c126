"""Adaptive Simpson quadrature shared across the toolkit.

A single engine serves both scalar integrands (outer time integrals, where
every evaluation may itself be an inner quadrature) and vectorized integrands
(mark-density integrals, evaluated on whole batches of nodes at once).
Complex integrands are handled natively; refinement decisions use the modulus
of the Richardson error estimate, so conjugate integrands refine identically
and Hermitian symmetry survives to rounding level.

Known kink locations (event times, table knots) should be passed as
``breakpoints``: the interval is split there and each smooth piece gets a
share of the tolerance proportional to its length.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .errors import QuadratureFailureError

DEFAULT_QUAD_TOL = 1e-8
DEFAULT_MAX_DEPTH = 30


def adaptive_simpson(
    f: Callable,
    a: float,
    b: float,
    tol: float = DEFAULT_QUAD_TOL,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    vectorized: bool = False,
    breakpoints: Iterable[float] = (),
):
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    ``f`` maps a float to a float/complex value, or, with
    ``vectorized=True``, an ndarray of nodes to an ndarray of values.
    Returns a float when every evaluation is real, else a complex number.

    Raises
    ------
    QuadratureFailureError
        if some subinterval fails to converge within ``max_depth`` splits.
    """
    if b < a:
        raise ValueError("integration bounds must satisfy a <= b")
    if b == a:
        return 0.0
    if vectorized:
        fv = lambda xs: np.asarray(f(xs), dtype=np.complex128)
    else:
        fv = lambda xs: np.array([f(float(x)) for x in xs], dtype=np.complex128)

    pts = [a]
    pts.extend(sorted(p for p in breakpoints if a < p < b))
    pts.append(b)

    total = 0.0 + 0.0j
    span = b - a
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi <= lo:
            continue
        total += _integrate_piece(fv, lo, hi, tol * (hi - lo) / span, max_depth)
    if total.imag == 0.0:
        return total.real
    return total


def _integrate_piece(fv, a, b, tol, max_depth):
    # integrate over [a + delta, b - delta]: the inset keeps evaluations off
    # the piece endpoints, so one-sided limits are used at breakpoints, and
    # the dropped slivers contribute O(1e-12 (b-a) |f|), far below tolerance
    delta = 1e-12 * (b - a)
    a = a + delta
    b = b - delta
    mid = 0.5 * (a + b)
    f0 = fv(np.array([a, mid, b]))
    lo = np.array([a])
    h = np.array([b - a])
    fl = f0[:1]
    fm = f0[1:2]
    fr = f0[2:]
    s = h / 6.0 * (fl + 4.0 * fm + fr)
    tols = np.array([max(tol, 1e-300)])

    acc = 0.0 + 0.0j
    for _depth in range(max_depth + 1):
        if lo.size == 0:
            return acc
        lm = lo + 0.25 * h
        rm = lo + 0.75 * h
        vals = fv(np.concatenate([lm, rm]))
        flm = vals[: lo.size]
        frm = vals[lo.size :]
        h2 = 0.5 * h
        s_left = h2 / 6.0 * (fl + 4.0 * flm + fm)
        s_right = h2 / 6.0 * (fm + 4.0 * frm + fr)
        s2 = s_left + s_right
        err = s2 - s
        done = np.abs(err) <= 15.0 * tols
        acc += np.sum(s2[done] + err[done] / 15.0)

        keep = ~done
        k_lo, k_h = lo[keep], h2[keep]
        lo = np.concatenate([k_lo, k_lo + k_h])
        h = np.concatenate([k_h, k_h])
        fl = np.concatenate([fl[keep], fm[keep]])
        fr = np.concatenate([fm[keep], fr[keep]])
        new_fm = np.concatenate([flm[keep], frm[keep]])
        s = np.concatenate([s_left[keep], s_right[keep]])
        fm = new_fm
        half_tol = 0.5 * tols[keep]
        tols = np.concatenate([half_tol, half_tol])

    raise QuadratureFailureError(
        f"adaptive Simpson did not converge on [{a!r}, {b!r}] "
        f"within depth {max_depth} ({lo.size} open intervals)"
    )


def cumulative_simpson(
    f: Callable,
    points: np.ndarray,
    tol: float = DEFAULT_QUAD_TOL,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    vectorized: bool = False,
    breakpoints: Iterable[float] = (),
) -> np.ndarray:
    """Cumulative integral of ``f`` from ``points[0]`` to each point.

    Integrates each consecutive gap once (splitting at any interior
    breakpoints) and accumulates, so the result at ``points[k]`` is
    consistent with :func:`adaptive_simpson` over ``[points[0], points[k]]``.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 1 or points.size < 1:
        raise ValueError("points must be a non-empty 1-d array")
    if np.any(np.diff(points) < 0):
        raise ValueError("points must be non-decreasing")
    bks = np.asarray(sorted(breakpoints), dtype=float)
    out = np.zeros(points.size, dtype=np.complex128)
    running = 0.0 + 0.0j
    span = points[-1] - points[0]
    for k in range(1, points.size):
        a, b = points[k - 1], points[k]
        if b == a:
            out[k] = running
            continue
        inner = bks[(bks > a) & (bks < b)]
        # per-gap tolerance scales with length so every partial sum meets tol
        running += complex(
            adaptive_simpson(
                f, a, b, tol * (b - a) / span, max_depth=max_depth,
                vectorized=vectorized, breakpoints=inner,
            )
        )
        out[k] = running
    if np.all(out.imag == 0.0):
        return out.real
    return out
