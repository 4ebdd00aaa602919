import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize, stats

from photomarkers.inference import (
    HPD_GRID, LogitSpec, McmcConfig, autocorrelation, bayes_factor, design_matrix, draws_csv,
    effective_sample_size, fit_logit_mle, gelman_rubin, geweke, hpd_interval, jeffreys_label, label_for_k,
    log_likelihood, log_marginal_laplace, log_posterior, log_prior, max_excluding_zero_level, mcse,
    null_model_factor, posterior_mode, posterior_predictive_check, run_metropolis, summarize_posterior,
)
from photomarkers.inference.mcmc import _gaussian_log_prior, _loglik


def brute_hpd(x, level):
    """Every window of at least ceil(level*n) sorted draws; shortest wins, then lowest start."""
    x = np.sort(x)
    n = len(x)
    need = math.ceil(round(level * n, 9))
    best = None
    for i in range(n):
        for j in range(i + need - 1, n):
            w = x[j] - x[i]
            if best is None or w < best[0]:
                best = (w, x[i], x[j])
    return best[1], best[2]


def simulate_logit(rng, n, beta):
    X = design_matrix(rng.standard_normal((n, len(beta) - 1)))
    p = 1 / (1 + np.exp(-X @ beta))
    return X, (rng.random(n) < p).astype(float)


# ---- HPD -----------------------------------------------------------------

@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=10, max_size=60),
       st.sampled_from(HPD_GRID))
def test_hpd_matches_brute_force(xs, level):
    assert hpd_interval(xs, level) == brute_hpd(np.array(xs), level)


def test_hpd_discrete_ties_take_lowest_start():
    x = np.repeat([0.0, 1.0, 2.0, 3.0], 5)
    assert hpd_interval(x, 0.5) == (0.0, 1.0)


def test_bimodal_hpd_level():
    # 92% of the mass in [1, 2], 8% in [-2, -1]
    x = np.concatenate([np.linspace(1, 2, 920), np.linspace(-2, -1, 80)])
    lo, hi = hpd_interval(x, 0.90)
    assert lo >= 1.0 and hi <= 2.0
    assert hpd_interval(x, 0.95)[0] < 0
    assert max_excluding_zero_level(x) == 0.90


def test_hpd_input_checks():
    with pytest.raises(ValueError):
        hpd_interval(np.arange(5), 0.9)
    with pytest.raises(ValueError):
        hpd_interval(np.arange(20), 1.0)
    assert max_excluding_zero_level(stats.norm.ppf(np.linspace(0.001, 0.999, 999))) == 0.0


# ---- diagnostics -------------------------------------------------------------

def test_gelman_rubin(rng):
    same = [rng.standard_normal(5000) for _ in range(3)]
    assert gelman_rubin(same) == pytest.approx(1.0, abs=0.01)
    apart = [rng.standard_normal(5000), 3 + rng.standard_normal(5000)]
    assert gelman_rubin(apart) > 1.5
    assert gelman_rubin([np.ones(20), np.ones(20)]) == 1.0
    # hand-computed: within var 1/ (ddof 1) of [0,1,0,1...]; means 0.5 and 1.5
    a = np.tile([0.0, 1.0], 10)
    n = 20
    W = a.var(ddof=1)
    B_over_n = np.var([0.5, 1.5], ddof=1)
    assert gelman_rubin([a, a + 1]) == pytest.approx(math.sqrt(((n - 1) / n * W + B_over_n) / W))


def test_geweke(rng):
    z = geweke(rng.standard_normal((4000, 2))).z
    assert np.all(np.abs(z) < 3.5)
    trend = np.linspace(0, 5, 4000) + rng.standard_normal(4000) * 0.1
    assert abs(geweke(trend).z[0]) > 10
    flat = geweke(np.ones(200))
    assert flat.degenerate[0] and flat.z[0] == 0
    with pytest.raises(ValueError):
        geweke(np.zeros(50))


def test_autocorrelation_ar1(rng):
    phi, n = 0.8, 50_000
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    acf = autocorrelation(x, 5)
    assert acf[0] == 1
    assert np.allclose(acf[1:], phi ** np.arange(1, 6), atol=0.03)
    # AR(1) variance of the mean inflates by (1 + phi) / (1 - phi)
    want = math.sqrt(x.var() / n * (1 + phi) / (1 - phi))
    assert mcse(x) == pytest.approx(want, rel=0.25)
    ess = effective_sample_size([x[:25_000], x[25_000:]])
    assert ess == pytest.approx(n * (1 - phi) / (1 + phi), rel=0.3)


# ---- logit likelihood and MLE ----------------------------------------------

@given(st.lists(st.floats(-40, 40), min_size=3, max_size=3), st.integers(0, 1000))
def test_loglik_forms_agree(beta, seed):
    rng = np.random.default_rng(seed)
    X, y = simulate_logit(rng, 50, np.array([0.2, -0.5, 1.0]))
    b = np.array(beta)
    direct = float(np.sum(y * (X @ b) - np.log1p(np.exp(np.clip(X @ b, -700, 700)))))
    assert log_likelihood(b, X, y) == pytest.approx(direct, rel=1e-10, abs=1e-8)
    assert _loglik(X, y, b, X.T @ y) == pytest.approx(log_likelihood(b, X, y), rel=1e-12, abs=1e-9)


def test_log_prior_normalised():
    spec = LogitSpec(("a",), b0=0.0, B0=[2.0, 0.5])
    b = np.array([0.3, -1.0])
    want = -0.5 * (2 * 0.09 + 0.5 * 1.0) + 0.5 * math.log(1.0) - math.log(2 * math.pi)
    assert log_prior(b, spec) == pytest.approx(want)
    assert _gaussian_log_prior(spec, 2)(b) == pytest.approx(want)
    assert log_prior(b, LogitSpec(("a",), B0=0.0)) == 0.0
    with pytest.raises(ValueError):
        LogitSpec(("a",), B0=[[1, 2], [0, 1]]).precision()


def test_mle_matches_generic_optimizer(rng):
    X, y = simulate_logit(rng, 3000, np.array([-0.3, 0.8, -0.5, 0.0]))
    fit = fit_logit_mle(X, y, ("const", "a", "b", "c"))
    ref = optimize.minimize(lambda b: -log_likelihood(b, X, y), np.zeros(4), method="BFGS", options={"gtol": 1e-9})
    assert np.allclose(fit.coef, ref.x, atol=1e-4)
    assert fit.converged and not fit.warnings
    assert fit.llf == pytest.approx(-ref.fun, abs=1e-6)
    assert np.all(fit.ci_low < fit.coef) and np.all(fit.coef < fit.ci_high)
    assert fit.llr == pytest.approx(2 * (fit.llf - fit.llnull))
    assert 0 < fit.pseudo_r2 < 1
    d = fit.to_dict()
    assert d["df_model"] == 3 and d["df_resid"] == 2996


def test_mle_rank_and_separation(rng):
    x = rng.standard_normal(100)
    X = np.column_stack([np.ones(100), x, 2 * x])
    y = (x > 0).astype(float)
    with pytest.raises(ValueError, match="'dup'"):
        fit_logit_mle(X, y, ("const", "x", "dup"))
    with pytest.warns(RuntimeWarning, match="separation"):
        fit = fit_logit_mle(X[:, :2], y)
    assert not fit.converged
    with pytest.raises(ValueError, match="both classes"):
        fit_logit_mle(X[:, :2], np.ones(100))


def test_posterior_mode_shrinks(rng):
    X, y = simulate_logit(rng, 200, np.array([0.0, 1.0]))
    flat, _, ok = posterior_mode(X, y, LogitSpec(("x",), B0=1e-8))
    tight, H, _ = posterior_mode(X, y, LogitSpec(("x",), B0=100.0))
    assert ok
    assert abs(tight[1]) < abs(flat[1])
    assert np.allclose(flat, fit_logit_mle(X, y).coef, atol=1e-4)
    assert np.all(np.linalg.eigvalsh(H) > 0)


# ---- Laplace and Bayes factors ----------------------------------------------------

@pytest.mark.parametrize("k, n", [(3, 10), (30, 100), (1, 40)])
def test_laplace_one_dim_matches_quadrature(k, n):
    y = np.r_[np.ones(k), np.zeros(n - k)]
    X = np.ones((n, 1))
    spec = LogitSpec((), b0=0.0, B0=0.25)
    mode = posterior_mode(X, y, spec)[0][0]
    f = lambda b: math.exp(log_posterior(np.array([b]), X, y, spec) - log_posterior(np.array([mode]), X, y, spec))
    val, _ = integrate.quad(f, mode - 30, mode + 30, points=[mode], limit=200)
    exact = math.log(val) + log_posterior(np.array([mode]), X, y, spec)
    assert abs(log_marginal_laplace(X, y, spec) - exact) < 0.1


def test_laplace_needs_proper_prior():
    with pytest.raises(ValueError, match="proper"):
        log_marginal_laplace(np.ones((5, 1)), np.array([0, 1, 0, 1, 1.0]), LogitSpec((), B0=0.0))


@pytest.mark.parametrize("log10_k, label", [
    (-0.1, "Negative evidence"), (0.0, "Barely worth mentioning"), (0.49, "Barely worth mentioning"),
    (0.5, "Substantial"), (1.0, "Strong"), (1.5, "Very strong"), (2.0, "Decisive"), (40, "Decisive"),
])
def test_jeffreys_bands(log10_k, label):
    assert jeffreys_label(log10_k) == label


def test_bayes_factor_overflow():
    bf = bayes_factor(2000.0, 0.0)
    assert math.isinf(bf.k) and bf.to_dict()["K"] is None
    assert bf.log10_k == pytest.approx(2000 / math.log(10))
    assert label_for_k(10 ** 0.6) == "Substantial"
    with pytest.raises(ValueError):
        label_for_k(0)


def test_null_model_factor_direction(rng):
    spec = LogitSpec(("x",), B0=0.01)
    X, y = simulate_logit(rng, 2000, np.array([0.0, 0.8]))
    assert null_model_factor(X, y, spec).label == "Decisive"
    X0 = design_matrix(rng.standard_normal(2000))
    y0 = (rng.random(2000) < 0.5).astype(float)
    assert null_model_factor(X0, y0, spec).log10_k < 0.5


# ---- sampler and summaries -------------------------------------------------------

def test_metropolis_recovers_mle_and_is_reproducible(rng):
    X, y = simulate_logit(rng, 1500, np.array([-0.5, 0.7]))
    spec = LogitSpec(("x",))
    cfg = McmcConfig(chains=2, iterations=6000, burn_in=1000, seed=11)
    chains = run_metropolis(X, y, spec, cfg)
    again = run_metropolis(X, y, spec, cfg, threads=2)
    assert all(np.array_equal(a.draws, b.draws) for a, b in zip(chains, again))
    assert not np.array_equal(chains[0].draws, chains[1].draws)
    assert chains[0].draws.shape == (5000, 2) and chains[0].warmup.shape == (1000, 2)
    s = summarize_posterior(chains, spec.names, levels=(0.9, 0.95))
    mle = fit_logit_mle(X, y).coef
    for j, name in enumerate(spec.names):
        p = s[name]
        assert abs(p.mean - mle[j]) < 4 * p.mcse + 0.01
        assert p.hpd[0.9][0] > p.hpd[0.95][0]
        assert p.odds == pytest.approx(math.exp(p.mean))
    assert s.max_rhat() < 1.05
    assert all(0.1 < a < 0.6 for a in s.acceptance_rates)
    text = draws_csv(chains, spec.names)
    assert text.splitlines()[0] == "chain,intercept,x" and len(text.splitlines()) == 10_001


def test_mcmc_config_checks():
    with pytest.raises(ValueError):
        McmcConfig(iterations=100, burn_in=100)
    with pytest.raises(ValueError):
        McmcConfig(iterations=100, burn_in=10, thin=7)
    assert McmcConfig(iterations=100, burn_in=10, thin=9).n_draws == 10


def test_ppc_forced_overprediction(rng):
    X, y = simulate_logit(rng, 500, np.array([0.0, 0.5]))
    heavy = [np.tile([5.0, 0.0], (200, 1))]       # predicts ~99% positives
    assert posterior_predictive_check(heavy, X, y, n_rep=200).p_value == 1.0
    light = [np.tile([-5.0, 0.0], (200, 1))]
    assert posterior_predictive_check(light, X, y, n_rep=200).p_value == 0.0
