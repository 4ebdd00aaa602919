"""Random-walk Metropolis for the Bayesian logit."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .logit import LogitSpec, fit_logit_mle, log_prior, posterior_mode

PROPOSAL_SCALE = 2.38


@dataclass(frozen=True)
class McmcConfig:
    chains: int = 2
    iterations: int = 100_000
    burn_in: int = 10_000
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if (self.iterations - self.burn_in) % self.thin:
            raise ValueError("iterations - burn_in must be a multiple of thin")

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    @classmethod
    def desk(cls, seed: int = 0) -> "McmcConfig":
        return cls(chains=2, iterations=20_000, burn_in=2_000, thin=1, seed=seed)


@dataclass(frozen=True)
class McmcChain:
    draws: np.ndarray          # (n_draws, d) after burn-in and thinning
    acceptance_rate: float     # over the retained (post burn-in) iterations
    warmup: np.ndarray         # burn-in draws, kept for trace data
    seed: int
    names: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.acceptance_rate <= 1.0:
            raise ValueError("acceptance_rate outside [0, 1]")


def proposal_cholesky(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; one retry with 1e-8 I jitter before giving up."""
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        pass
    try:
        return linalg.cholesky(cov + 1e-8 * np.eye(cov.shape[0]), lower=True)
    except linalg.LinAlgError:
        raise ValueError("proposal covariance is not positive definite, even after jitter") from None


def _loglik(X, y, beta, xty):
    """Bernoulli log-likelihood with log(1 + e^eta) = max(eta, 0) + log1p(e^-|eta|); xty = X'y."""
    eta = X @ beta
    return float(xty @ beta - np.maximum(eta, 0.0).sum() - np.log1p(np.exp(-np.abs(eta))).sum())


def _gaussian_log_prior(spec, d):
    P, b0 = spec.precision(d), spec.prior_mean(d)
    const = log_prior(b0, spec)

    def f(beta):
        r = beta - b0
        return const - 0.5 * float(r @ P @ r)
    return f


def _run_chain(X, y, prior, chol, centre, start_chol, cfg, seed, names):
    rng = np.random.default_rng(seed)
    d = X.shape[1]
    beta = centre + 2.0 * start_chol @ rng.standard_normal(d)
    steps = rng.standard_normal((cfg.iterations, d)) @ chol.T
    log_u = np.log(rng.random(cfg.iterations))
    xty = X.T @ y
    cur = _loglik(X, y, beta, xty) + prior(beta)
    keep = np.empty((cfg.iterations, d))
    accepted = np.zeros(cfg.iterations, dtype=bool)
    for t in range(cfg.iterations):
        prop = beta + steps[t]
        lp = _loglik(X, y, prop, xty) + prior(prop)
        if log_u[t] < lp - cur:
            beta, cur = prop, lp
            accepted[t] = True
        keep[t] = beta
    post = keep[cfg.burn_in::cfg.thin]
    return McmcChain(post, float(accepted[cfg.burn_in:].mean()), keep[:cfg.burn_in], seed, names)


def run_metropolis(X, y, spec: LogitSpec, config: McmcConfig = McmcConfig(), threads: int = 1,
                   proposal_cov: Optional[np.ndarray] = None) -> list:
    """Random-walk Metropolis chains with N(0, (2.38^2/d) Sigma) proposals.

    Sigma is the inverse observed information at the MLE. Chain ``c`` uses
    seed ``config.seed + c`` and starts from an overdispersed draw around
    the MLE (twice its standard errors), so chains are independent and
    the Gelman-Rubin check is meaningful.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = X.shape[1]
    if d != spec.dim:
        raise ValueError(f"design has {d} columns but the spec describes {spec.dim} parameters")
    if proposal_cov is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_logit_mle(X, y, spec.names)
        if fit.converged:
            centre, sigma = fit.coef, fit.cov
        else:
            warnings.warn("MLE did not converge; tuning the proposal at the posterior mode", RuntimeWarning,
                          stacklevel=2)
            centre, H, _ = posterior_mode(X, y, spec)
            sigma = np.linalg.inv(H)
    else:
        centre = posterior_mode(X, y, spec)[0]
        sigma = np.asarray(proposal_cov, dtype=np.float64)
    sigma = 0.5 * (sigma + sigma.T)
    chol = proposal_cholesky(PROPOSAL_SCALE ** 2 / d * sigma)
    start_chol = proposal_cholesky(sigma)

    prior = _gaussian_log_prior(spec, d)

    def job(c):
        return _run_chain(X, y, prior, chol, centre, start_chol, config, config.seed + c, spec.names)

    if threads > 1 and config.chains > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(job, range(config.chains)))
    return [job(c) for c in range(config.chains)]
