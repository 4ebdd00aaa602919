"""Pooled posterior summaries and their JSON/CSV export."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import (
    autocorrelation, effective_sample_size, gelman_rubin, geweke, hpd_interval, max_excluding_zero_level, pooled_mcse,
)

ACF_LAGS = (1, 5, 10, 30)


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    sd: float
    odds: float
    hpd: dict            # level -> (lo, hi)
    hpd_level: float     # largest grid level excluding zero (0.0 = none)
    rhat: float | None
    geweke_z: tuple      # one per chain
    acf: dict            # lag -> pooled-chain average autocorrelation
    mcse: float
    ess: float

    def to_dict(self) -> dict:
        def num(v):
            return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else float(v)
        return {
            "mean": self.mean, "sd": self.sd, "odds": self.odds,
            "hpd": {f"{lvl:.2f}": [lo, hi] for lvl, (lo, hi) in self.hpd.items()},
            "hpd_level": self.hpd_level, "rhat": num(self.rhat),
            "geweke_z": [num(z) for z in self.geweke_z],
            "acf": {str(k): num(v) for k, v in self.acf.items()}, "mcse": num(self.mcse), "ess": num(self.ess),
        }


@dataclass(frozen=True)
class PosteriorSummary:
    parameters: tuple
    acceptance_rates: tuple
    n_draws: int
    n_chains: int

    def __getitem__(self, name) -> ParameterSummary:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def names(self):
        return tuple(p.name for p in self.parameters)

    def max_rhat(self) -> float:
        vals = [p.rhat for p in self.parameters if p.rhat is not None]
        return max(vals) if vals else float("nan")

    def to_dict(self) -> dict:
        return {"coef": {p.name: p.to_dict() for p in self.parameters},
                "acceptance_rate": list(self.acceptance_rates), "n_draws": self.n_draws, "n_chains": self.n_chains}


def summarize_posterior(chains, names=None, levels=(0.95,)) -> PosteriorSummary:
    """Pooled mean/sd, odds = exp(mean), HPD intervals and per-parameter diagnostics."""
    arrs = [np.asarray(getattr(c, "draws", c), dtype=np.float64) for c in chains]
    arrs = [a[:, None] if a.ndim == 1 else a for a in arrs]
    if not arrs:
        raise ValueError("no chains")
    n, d = arrs[0].shape
    if any(a.shape != (n, d) for a in arrs):
        raise ValueError("chains must share a shape")
    if n < 10:
        raise ValueError("chains need at least 10 draws")
    if names is None:
        names = getattr(chains[0], "names", ()) or tuple(f"b{j}" for j in range(d))
    pooled = np.vstack(arrs)
    params = []
    for j, name in enumerate(names):
        x = pooled[:, j]
        col = [a[:, j] for a in arrs]
        hpd = {lvl: hpd_interval(x, lvl) for lvl in levels}
        rhat = gelman_rubin(col) if len(col) > 1 else None
        gz = tuple(float(geweke(c).z[0]) for c in col) if n >= 100 else ()
        max_lag = max(l for l in ACF_LAGS if l < n / 2) if n > 2 else 0
        acfs = [autocorrelation(c, max_lag) for c in col]
        acf = {lag: float(np.mean([a[lag] for a in acfs])) for lag in ACF_LAGS if lag <= max_lag}
        mean = float(x.mean())
        params.append(ParameterSummary(
            name, mean, float(x.std(ddof=1)), math.exp(mean), hpd, max_excluding_zero_level(x), rhat, gz, acf,
            pooled_mcse(col), effective_sample_size(col),
        ))
    rates = tuple(float(getattr(c, "acceptance_rate", float("nan"))) for c in chains)
    return PosteriorSummary(tuple(params), rates, n, len(arrs))


def draws_csv(chains, names) -> str:
    """Pooled post burn-in draws, one column per parameter plus the chain index."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["chain", *names])
    for ci, c in enumerate(chains):
        for row in np.asarray(getattr(c, "draws", c)):
            w.writerow([ci, *(repr(float(v)) for v in row)])
    return buf.getvalue()
