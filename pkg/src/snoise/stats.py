"""Monte Carlo oracle utilities and statistical acceptance tests.

Conventions used throughout the toolkit:

* Monte Carlo comparisons use a 3-standard-error tolerance and always report
  the ratio |delta| / SE, never a bare boolean, so tolerances stay auditable.
* For a complex estimate the standard error is the combined
  sqrt((Var Re + Var Im) / n); under the null |delta| <= 3 SE then fails with
  probability about 1e-4 per comparison.
* Kolmogorov-Smirnov tests run at the 1% level.  Weighted samples (from
  importance reweighting) enter through the weighted empirical CDF with the
  effective sample size (sum w)^2 / sum w^2 in the critical value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats as _sps

from .kernels import NoiseKernel
from .marks import MarkDistribution
from .point_process import MppPath, break_ties
from .rng import TAG_BATCH, make_stream

Z_BASE = 3.0
KS_LEVEL = 0.01


class CfEstimate(NamedTuple):
    value: complex
    se: float      # combined sqrt(se_re^2 + se_im^2), used by cf_ratio
    se_re: float
    se_im: float


def empirical_cf(values, theta: float) -> CfEstimate:
    """Mean of exp(i theta v) over the batch with componentwise SEs."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 100:
        raise ValueError("need at least 100 samples")
    z = np.exp(1j * theta * values)
    mean = complex(z.mean())
    se_re = math.sqrt(z.real.var(ddof=1) / n)
    se_im = math.sqrt(z.imag.var(ddof=1) / n)
    return CfEstimate(mean, math.hypot(se_re, se_im), se_re, se_im)


def cf_ratio(analytic: complex, est: CfEstimate) -> float:
    """|analytic - empirical| / SE; infinite when SE = 0 and they differ."""
    delta = abs(analytic - est.value)
    if est.se == 0.0:
        return 0.0 if delta == 0.0 else math.inf
    return delta / est.se


@dataclass(frozen=True)
class DriftTestReport:
    windows: np.ndarray      # right endpoints of the tested windows
    z_scores: np.ndarray
    threshold: float
    passed: bool


def martingale_drift_test(times, paths, z_base: float = Z_BASE) -> DriftTestReport:
    """Per-window drift z-scores of a putative martingale sample.

    ``paths`` is (n_paths, len(times)).  Pass iff every |z| stays below the
    Bonferroni-adjusted threshold: the base two-sided level of ``z_base``
    standard errors is split across the windows.
    """
    times = np.asarray(times, dtype=float)
    paths = np.asarray(paths, dtype=float)
    if paths.ndim != 2 or paths.shape[1] != times.size:
        raise ValueError("paths must be (n_paths, len(times))")
    if paths.shape[0] < 1000:
        raise ValueError("need at least 1000 paths")
    n_windows = times.size - 1
    if n_windows < 1:
        raise ValueError("need at least one window")

    inc = np.diff(paths, axis=1)
    mean = inc.mean(axis=0)
    se = inc.std(axis=0, ddof=1) / math.sqrt(paths.shape[0])
    safe = np.where(se > 0, se, 1.0)
    z = np.where(se > 0, mean / safe,
                 np.where(mean == 0.0, 0.0, np.inf))
    p_base = 2.0 * _sps.norm.sf(z_base)
    threshold = float(_sps.norm.isf(p_base / (2.0 * n_windows)))
    return DriftTestReport(times[1:], z, threshold,
                           bool(np.all(np.abs(z) <= threshold)))


class KsResult(NamedTuple):
    statistic: float
    threshold: float
    n_eff_1: float
    n_eff_2: float
    passed: bool


def _weighted_ecdf(x, w):
    order = np.argsort(x, kind="stable")
    x = x[order]
    w = w[order] / w.sum()
    return x, np.cumsum(w)


def ks_two_sample_weighted(x1, x2, w1=None, w2=None,
                           level: float = KS_LEVEL) -> KsResult:
    """Two-sample KS test allowing importance weights on either sample.

    The critical value is the standard large-sample one,
    c(level) * sqrt(1/n1_eff + 1/n2_eff), with effective sample sizes
    (sum w)^2 / sum w^2.  With unit weights this reduces to the classical
    two-sample test.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    w1 = np.ones(x1.size) if w1 is None else np.asarray(w1, dtype=float)
    w2 = np.ones(x2.size) if w2 is None else np.asarray(w2, dtype=float)
    if np.any(w1 < 0) or np.any(w2 < 0) or w1.sum() == 0 or w2.sum() == 0:
        raise ValueError("weights must be nonnegative with positive total")

    s1, c1 = _weighted_ecdf(x1, w1)
    s2, c2 = _weighted_ecdf(x2, w2)
    all_x = np.concatenate([s1, s2])
    f1 = np.concatenate([[0.0], c1])[np.searchsorted(s1, all_x, side="right")]
    f2 = np.concatenate([[0.0], c2])[np.searchsorted(s2, all_x, side="right")]
    stat = float(np.abs(f1 - f2).max())

    n1_eff = w1.sum() ** 2 / np.sum(w1**2)
    n2_eff = w2.sum() ** 2 / np.sum(w2**2)
    c_alpha = math.sqrt(-0.5 * math.log(level / 2.0))
    threshold = c_alpha * math.sqrt(1.0 / n1_eff + 1.0 / n2_eff)
    return KsResult(stat, threshold, float(n1_eff), float(n2_eff),
                    stat <= threshold)


def ks_against_cdf(x, cdf, level: float = KS_LEVEL) -> KsResult:
    """One-sample KS of data against a CDF callable, at the given level."""
    x = np.asarray(x, dtype=float)
    stat, _p = _sps.kstest(x, cdf)
    c_alpha = math.sqrt(-0.5 * math.log(level / 2.0))
    threshold = c_alpha / math.sqrt(x.size)
    return KsResult(float(stat), threshold, float(x.size), math.inf,
                    float(stat) <= threshold)


@dataclass(frozen=True)
class BatchPaths:
    """Flat batch of stationary-compensator paths (the MC oracle format).

    Events of path ``i`` occupy the slice ``offsets[i]:offsets[i+1]`` of
    ``times``/``marks``; times are sorted within each path.
    """

    horizon: float
    counts: np.ndarray
    offsets: np.ndarray
    times: np.ndarray
    marks: np.ndarray

    @property
    def n_paths(self) -> int:
        return int(self.counts.size)

    def path_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_paths), self.counts)

    def path(self, i: int) -> MppPath:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        times = break_ties(self.times[lo:hi])
        return MppPath(times, self.marks[lo:hi], self.horizon)


def simulate_standard_batch(lam: float, marks: MarkDistribution,
                            horizon: float, n_paths: int, seed: int, *,
                            tag: int = TAG_BATCH) -> BatchPaths:
    """Vectorized i.i.d. batch of standard (constant-rate) paths.

    Counts are Poisson(lam T) and, given the count, event times are uniform
    order statistics on [0, T]: the classical construction, independent of
    the thinning simulator, which makes this the oracle side of two-route
    checks.
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    rng = make_stream(seed, 0, tag)
    counts = rng.poisson(lam * horizon, size=n_paths)
    total = int(counts.sum())
    offsets = np.concatenate([[0], np.cumsum(counts)])
    raw = rng.uniform(0.0, horizon, size=total)
    ids = np.repeat(np.arange(n_paths), counts)
    order = np.lexsort((raw, ids))
    times = raw[order]
    mk = marks.sample(rng, 0.0, total)
    return BatchPaths(horizon, counts, offsets, times, mk)


def batch_terminal_shotnoise(kernel: NoiseKernel, batch: BatchPaths,
                             T: float | None = None) -> np.ndarray:
    """S_T per path of the batch, fully vectorized."""
    T = batch.horizon if T is None else T
    inside = batch.times <= T
    vals = np.zeros(batch.times.size)
    if inside.any():
        vals[inside] = np.asarray(
            kernel.G(T - batch.times[inside], batch.marks[inside]), dtype=float)
    return np.bincount(batch.path_ids(), weights=vals, minlength=batch.n_paths)


def batch_log_weights(Y, batch: BatchPaths, compensator_integral: float) -> np.ndarray:
    """log L_T per path for a deterministic Girsanov kernel on the batch."""
    if batch.times.size:
        y = np.asarray(Y(batch.times, batch.marks), dtype=float)
        if np.any(y < 0):
            raise ValueError("Girsanov kernel must be nonnegative")
        with np.errstate(divide="ignore"):
            logs = np.where(y > 0, np.log(np.where(y > 0, y, 1.0)), -np.inf)
    else:
        logs = np.empty(0)
    out = np.full(batch.n_paths, -compensator_integral)
    if logs.size:
        ids = batch.path_ids()
        neg = np.isneginf(logs)
        out += np.bincount(ids, weights=np.where(neg, 0.0, logs),
                           minlength=batch.n_paths)
        if neg.any():
            dead = np.unique(ids[neg])
            out[dead] = -np.inf
    return out
