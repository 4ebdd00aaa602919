"""Laplace marginal likelihoods, Bayes factors and posterior predictive checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .logit import LogitSpec, log_likelihood, log_prior, posterior_mode

# (lower bound on log10 K, label); each band is closed on the left
JEFFREYS_BANDS = (
    (2.0, "Decisive"),
    (1.5, "Very strong"),
    (1.0, "Strong"),
    (0.5, "Substantial"),
    (0.0, "Barely worth mentioning"),
)
NEGATIVE_LABEL = "Negative evidence"


def jeffreys_label(log10_k: float) -> str:
    for lower, label in JEFFREYS_BANDS:
        if log10_k >= lower:
            return label
    return NEGATIVE_LABEL


def label_for_k(k: float) -> str:
    if k <= 0:
        raise ValueError("K must be positive")
    return jeffreys_label(math.log10(k))


def log_marginal_laplace(X, y, spec: LogitSpec) -> float:
    """Laplace approximation to log p(y | model).

    log p(y | b) + log p(b) + (d/2) log 2pi - (1/2) log det H at the
    posterior mode b, with H the negative Hessian of the log posterior.
    Needs a proper prior (positive-definite precision).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = X.shape[1]
    sign, _ = np.linalg.slogdet(spec.precision(d))
    if sign <= 0:
        raise ValueError("Laplace marginal likelihood needs a proper prior (positive-definite B0)")
    mode, H, _ = posterior_mode(X, y, spec)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise ValueError("negative Hessian at the posterior mode is not positive definite") from None
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    return log_likelihood(mode, X, y) + log_prior(mode, spec) + 0.5 * d * math.log(2 * math.pi) - 0.5 * logdet


@dataclass(frozen=True)
class BayesFactorResult:
    log_m_full: float
    log_m_null: float
    log_k: float

    @property
    def k(self) -> float:
        """K itself; ``inf`` when it overflows a double (log_k keeps the exact value)."""
        return math.exp(self.log_k) if self.log_k < 709.0 else math.inf

    @property
    def log10_k(self) -> float:
        return self.log_k / math.log(10.0)

    @property
    def label(self) -> str:
        return jeffreys_label(self.log10_k)

    def to_dict(self) -> dict:
        k = self.k
        return {"K": None if math.isinf(k) else k, "log_K": self.log_k, "log10_K": self.log10_k,
                "label": self.label, "log_marginal_full": self.log_m_full, "log_marginal_null": self.log_m_null}


def bayes_factor(log_m_full: float, log_m_null: float) -> BayesFactorResult:
    """K = m_full / m_null from log marginal likelihoods."""
    return BayesFactorResult(float(log_m_full), float(log_m_null), float(log_m_full) - float(log_m_null))


def null_model_factor(X, y, spec: LogitSpec) -> BayesFactorResult:
    """Full model against the intercept-only model on the same data and prior."""
    X = np.asarray(X, dtype=np.float64)
    full = log_marginal_laplace(X, y, spec)
    null = log_marginal_laplace(X[:, :1], y, spec.restrict([0]))
    return bayes_factor(full, null)


@dataclass(frozen=True)
class PpcResult:
    p_value: float
    observed: float
    replicated_mean: float
    n_rep: int


def posterior_predictive_check(chains, X, y, n_rep: int = 1000, seed: int = 0) -> PpcResult:
    """Share of replicated datasets whose depressed proportion reaches the observed one.

    Each replicate draws one parameter vector uniformly from the pooled
    post burn-in draws and simulates every outcome from Bernoulli(pi_i).
    """
    draws = np.vstack([np.asarray(getattr(c, "draws", c), dtype=np.float64) for c in chains])
    if draws.shape[0] == 0:
        raise ValueError("no posterior draws")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(seed)
    obs = float(y.mean())
    props = np.empty(n_rep)
    for r in range(n_rep):
        beta = draws[rng.integers(draws.shape[0])]
        pi = special.expit(X @ beta)
        props[r] = float((rng.random(pi.shape[0]) < pi).mean())
    return PpcResult(float((props >= obs).mean()), obs, float(props.mean()), n_rep)


def posterior_predictive_pvalue(chains, X, y, n_rep: int = 1000, seed: int = 0) -> float:
    return posterior_predictive_check(chains, X, y, n_rep, seed).p_value
