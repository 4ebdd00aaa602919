"""Posterior interval and convergence diagnostics on arrays of draws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HPD_GRID = tuple(round(0.30 + 0.05 * k, 2) for k in range(14)) + (0.99,)


def _n_inside(n: int, level: float) -> int:
    # round first so 0.95 * 100 does not ceil to 96
    return max(1, min(n, math.ceil(round(level * n, 9))))


def hpd_interval(samples, level: float = 0.95):
    """Shortest window of sorted samples holding ``ceil(level * n)`` of them.

    Ties between equally short windows go to the lowest starting index.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    if n < 10:
        raise ValueError(f"need at least 10 samples, got {n}")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    m = _n_inside(n, level)
    widths = x[m - 1:] - x[:n - m + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + m - 1])


def max_excluding_zero_level(samples, grid=HPD_GRID) -> float:
    """Largest grid level whose HPD interval excludes zero; 0.0 when none does."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 10:
        raise ValueError(f"need at least 10 samples, got {x.size}")
    best = 0.0
    for level in grid:
        lo, hi = hpd_interval(x, level)
        if lo > 0 or hi < 0:
            best = max(best, level)
    return best


def _chain_arrays(chains, parameter=None):
    arrs = []
    for c in chains:
        a = np.asarray(getattr(c, "draws", c), dtype=np.float64)
        if a.ndim == 2:
            if parameter is None:
                raise ValueError("parameter index needed for multi-parameter chains")
            a = a[:, parameter]
        arrs.append(a)
    return arrs


def gelman_rubin(chains, parameter=None) -> float:
    """Potential scale reduction without the degrees-of-freedom correction.

    R = sqrt(((n-1)/n W + B/n) / W), W the mean within-chain variance and
    B/n the variance of the chain means (both with ddof=1).
    """
    arrs = _chain_arrays(chains, parameter)
    if len(arrs) < 2:
        raise ValueError("Gelman-Rubin needs at least two chains")
    n = arrs[0].size
    if n < 10 or any(a.size != n for a in arrs):
        raise ValueError("chains must have equal length >= 10")
    a = np.stack(arrs)
    W = float(a.var(axis=1, ddof=1).mean())
    B_over_n = float(a.mean(axis=1).var(ddof=1))
    if W == 0.0:
        return 1.0 if B_over_n == 0.0 else math.inf
    return math.sqrt(((n - 1) / n * W + B_over_n) / W)


@dataclass(frozen=True)
class GewekeResult:
    z: np.ndarray
    degenerate: np.ndarray   # True where the pooled variance is zero

    def max_abs(self) -> float:
        ok = ~self.degenerate
        return float(np.max(np.abs(self.z[ok]))) if ok.any() else float("nan")


N_BATCHES = 20


def _batch_var_of_mean(seg: np.ndarray, from_end: bool) -> np.ndarray:
    nb = min(N_BATCHES, seg.shape[0])
    size = seg.shape[0] // nb
    used = seg[-nb * size:] if from_end else seg[:nb * size]
    means = used.reshape(nb, size, -1).mean(axis=1)
    return means.var(axis=0, ddof=1) / nb


def geweke(chain, first: float = 0.1, last: float = 0.5) -> GewekeResult:
    """Early-vs-late mean z-score per parameter.

    Segment variances of the mean use 20 non-overlapping batch means (each
    draw is its own batch when a segment has fewer than 20 draws). A zero
    pooled variance is reported through ``degenerate`` with z = 0 when the
    segment means agree, else +/-inf.
    """
    x = np.asarray(getattr(chain, "draws", chain), dtype=np.float64)
    one_d = x.ndim == 1
    if one_d:
        x = x[:, None]
    n = x.shape[0]
    if n < 100:
        raise ValueError(f"chain too short for Geweke ({n} < 100)")
    if not (0 < first < 1 and 0 < last < 1 and first + last <= 1):
        raise ValueError("segment fractions must be in (0, 1) and sum to <= 1")
    a = x[:int(first * n)]
    b = x[n - int(last * n):]
    va, vb = _batch_var_of_mean(a, False), _batch_var_of_mean(b, True)
    diff = a.mean(axis=0) - b.mean(axis=0)
    denom = np.sqrt(va + vb)
    degenerate = denom == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(degenerate, np.where(diff == 0, 0.0, np.sign(diff) * np.inf), diff / np.where(degenerate, 1, denom))
    return GewekeResult(z, degenerate)


def autocorrelation(x, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation for lags 0..max_lag (acf[0] == 1)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.size
    if not 0 <= max_lag < n / 2:
        raise ValueError("max_lag must be below half the series length")
    d = x - x.mean()
    c0 = float(d @ d) / n
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    if c0 == 0.0:
        out[1:] = np.nan
        return out
    for k in range(1, max_lag + 1):
        out[k] = float(d[:-k] @ d[k:]) / n / c0
    return out


def mcse(x) -> float:
    """Monte-Carlo standard error of the mean by non-overlapping batch means (batch size floor(sqrt(n)))."""
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.size
    b = max(1, int(math.isqrt(n)))
    a = n // b
    if a < 2:
        return float("nan")
    means = x[:a * b].reshape(a, b).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(a))


def pooled_mcse(chains, parameter=None) -> float:
    """MCSE of the mean of equally long chains pooled together."""
    arrs = _chain_arrays(chains, parameter)
    return math.sqrt(sum(mcse(a) ** 2 for a in arrs)) / len(arrs)


def effective_sample_size(chains, parameter=None) -> float:
    arrs = _chain_arrays(chains, parameter)
    pooled = np.concatenate(arrs)
    se = pooled_mcse(arrs)
    if not se > 0:
        return float(pooled.size)
    return float(pooled.var(ddof=1) / se ** 2)
