"""Logistic likelihood, Gaussian prior, IRLS maximum likelihood and posterior mode."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, special

from ..stats.contingency import chi2_upper_tail

Z95 = 1.959964
SEPARATION_ETA = 30.0


@dataclass(frozen=True)
class LogitSpec:
    """Model description. The design matrix always carries an intercept column first.

    ``B0`` is the prior precision: a scalar (times identity), a vector
    (diagonal) or a full matrix. ``B0 = 0`` gives a flat improper prior.
    """

    feature_names: tuple = ()
    b0: object = 0.0
    B0: object = 1e-4

    @property
    def names(self) -> tuple:
        return ("intercept", *self.feature_names)

    @property
    def dim(self) -> int:
        return len(self.feature_names) + 1

    def prior_mean(self, d: Optional[int] = None) -> np.ndarray:
        d = self.dim if d is None else d
        b = np.asarray(self.b0, dtype=np.float64)
        return np.full(d, float(b)) if b.ndim == 0 else b.reshape(d).copy()

    def precision(self, d: Optional[int] = None) -> np.ndarray:
        d = self.dim if d is None else d
        B = np.asarray(self.B0, dtype=np.float64)
        if B.ndim == 0:
            P = float(B) * np.eye(d)
        elif B.ndim == 1:
            P = np.diag(B.reshape(d))
        else:
            P = B.reshape(d, d)
        if not np.allclose(P, P.T):
            raise ValueError("prior precision must be symmetric")
        if np.linalg.eigvalsh(P).min() < -1e-12:
            raise ValueError("prior precision must be positive semidefinite")
        return P

    def restrict(self, index) -> "LogitSpec":
        """Spec for a sub-model using the parameters at ``index`` (0 is the intercept)."""
        index = list(index)
        names = tuple(self.names[i] for i in index if i > 0)
        return LogitSpec(names, self.prior_mean()[index], self.precision()[np.ix_(index, index)])


def design_matrix(features: np.ndarray) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 1:
        f = f[:, None]
    return np.hstack([np.ones((f.shape[0], 1)), f])


def _check(beta, X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or beta.shape != (X.shape[1],):
        raise ValueError(f"dimension mismatch: X {X.shape}, y {y.shape}, beta {beta.shape}")
    return beta, X, y


def log_likelihood(beta, X, y) -> float:
    """Bernoulli log-likelihood under the logistic link, stable for large |x'beta|."""
    beta, X, y = _check(beta, X, y)
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def log_prior(beta, spec: LogitSpec) -> float:
    beta = np.asarray(beta, dtype=np.float64)
    d = beta.shape[0]
    P = spec.precision(d)
    r = beta - spec.prior_mean(d)
    quad = -0.5 * float(r @ P @ r)
    sign, logdet = np.linalg.slogdet(P)
    if sign <= 0:
        # improper (singular) prior: the normalising constant is dropped
        return quad
    return quad + 0.5 * logdet - 0.5 * d * math.log(2 * math.pi)


def log_posterior(beta, X, y, spec: LogitSpec) -> float:
    """Unnormalised log posterior: log-likelihood plus the normalised Gaussian log prior."""
    return log_likelihood(beta, X, y) + log_prior(beta, spec)


def _grad_hess(beta, X, y, P=None, b0=None):
    eta = X @ beta
    p = special.expit(eta)
    g = X.T @ (y - p)
    w = p * (1 - p)
    H = (X * w[:, None]).T @ X
    if P is not None:
        g = g - P @ (beta - b0)
        H = H + P
    return g, H, eta


def _newton(X, y, P=None, b0=None, start=None, tol=1e-8, max_iter=100):
    """Newton ascent with step halving. Returns (beta, converged, iterations, eta)."""
    d = X.shape[1]
    beta = np.zeros(d) if start is None else np.asarray(start, dtype=np.float64).copy()

    def objective(b):
        v = log_likelihood(b, X, y)
        if P is not None:
            r = b - b0
            v -= 0.5 * float(r @ P @ r)
        return v

    f = objective(beta)
    for it in range(1, max_iter + 1):
        g, H, eta = _grad_hess(beta, X, y, P, b0)
        if np.linalg.norm(g) < tol:
            return beta, True, it - 1, eta
        try:
            step = linalg.solve(H, g, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        for _ in range(50):
            cand = beta + t * step
            fc = objective(cand)
            if fc >= f - 1e-12 * abs(f):
                break
            t *= 0.5
        beta, f = cand, fc
    g, _, eta = _grad_hess(beta, X, y, P, b0)
    return beta, bool(np.linalg.norm(g) < tol), max_iter, eta


def first_dependent_column(X, names: Optional[Sequence] = None):
    """Index of the first column that is linearly dependent on earlier ones, else None."""
    X = np.asarray(X, dtype=np.float64)
    scale = np.linalg.norm(X, axis=0)
    scale[scale == 0] = 1.0
    Xs = X / scale
    for j in range(1, X.shape[1] + 1):
        if np.linalg.matrix_rank(Xs[:, :j]) < j:
            return j - 1
    return None


@dataclass
class FreqFit:
    names: tuple
    coef: np.ndarray
    se: np.ndarray
    z: np.ndarray
    p: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    llf: float
    llnull: float
    pseudo_r2: float
    llr: float
    llr_pvalue: float
    n_obs: int
    converged: bool
    iterations: int
    warnings: list = field(default_factory=list)
    cov: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def df_model(self) -> int:
        return len(self.coef) - 1

    def to_dict(self) -> dict:
        return {
            "n_obs": self.n_obs, "df_model": self.df_model, "df_resid": self.n_obs - len(self.coef),
            "converged": self.converged, "iterations": self.iterations,
            "log_likelihood": self.llf, "ll_null": self.llnull, "pseudo_r2": self.pseudo_r2,
            "llr": self.llr, "llr_pvalue": self.llr_pvalue, "warnings": list(self.warnings),
            "coef": {n: {"coef": float(self.coef[i]), "se": float(self.se[i]), "z": float(self.z[i]),
                         "p": float(self.p[i]), "ci": [float(self.ci_low[i]), float(self.ci_high[i])]}
                     for i, n in enumerate(self.names)},
        }


def fit_logit_mle(X, y, names: Optional[Sequence] = None, tol: float = 1e-8, max_iter: int = 100) -> FreqFit:
    """Maximum likelihood logit by Newton/IRLS.

    ``X`` is the full design matrix (intercept column first). Standard errors
    come from the inverse observed information at the optimum. Perfect or
    quasi separation (fitted |x'beta| above 30, or no convergence) sets
    ``converged=False`` and emits a warning; estimates are still returned.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: X {X.shape}, y {y.shape}")
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(X.shape[1]))
    if len(names) != X.shape[1]:
        raise ValueError("names must match the number of columns")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("y must be 0/1")
    if y.min() == y.max():
        raise ValueError("both classes must be present in y")
    dep = first_dependent_column(X)
    if dep is not None:
        raise ValueError(f"design matrix is rank deficient: column {names[dep]!r} is a linear "
                         "combination of earlier columns")

    beta, converged, iters, eta = _newton(X, y, tol=tol, max_iter=max_iter)
    notes = []
    if np.max(np.abs(eta)) > SEPARATION_ETA:
        converged = False
        notes.append("possible perfect separation: fitted probabilities numerically 0 or 1")
    if not converged:
        msg = "logit MLE did not converge" + (f" ({notes[-1]})" if notes else "")
        if not notes:
            notes.append("gradient norm above tolerance after max_iter iterations")
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    _, H, _ = _grad_hess(beta, X, y)
    try:
        cov = linalg.inv(H)
    except linalg.LinAlgError:
        cov = np.linalg.pinv(H)
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = beta / se
    p = 2 * special.ndtr(-np.abs(z))
    llf = log_likelihood(beta, X, y)
    ybar = y.mean()
    llnull = float(len(y) * (ybar * math.log(ybar) + (1 - ybar) * math.log(1 - ybar)))
    llr = 2 * (llf - llnull)
    k = X.shape[1]
    llr_p = chi2_upper_tail(max(llr, 0.0), k - 1) if k > 1 else float("nan")
    return FreqFit(names, beta, se, z, p, beta - Z95 * se, beta + Z95 * se, llf, llnull, 1 - llf / llnull,
                   llr, llr_p, len(y), converged, iters, notes, cov)


def posterior_mode(X, y, spec: LogitSpec, start=None, tol: float = 1e-8):
    """Maximiser of the log posterior and the negative Hessian there."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = X.shape[1]
    P, b0 = spec.precision(d), spec.prior_mean(d)
    beta, converged, _, _ = _newton(X, y, P, b0, start=start, tol=tol, max_iter=200)
    _, H, _ = _grad_hess(beta, X, y, P, b0)
    return beta, H, converged
