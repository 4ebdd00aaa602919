"""Bayesian logit by random-walk Metropolis, diagnostics, Bayes factors; frequentist MLE."""

from .compare import (
    BayesFactorResult, PpcResult, bayes_factor, jeffreys_label, label_for_k, log_marginal_laplace, null_model_factor,
    posterior_predictive_check, posterior_predictive_pvalue,
)
from .diagnostics import (
    HPD_GRID, GewekeResult, autocorrelation, effective_sample_size, gelman_rubin, geweke, hpd_interval,
    max_excluding_zero_level, mcse, pooled_mcse,
)
from .logit import (
    FreqFit, LogitSpec, design_matrix, fit_logit_mle, log_likelihood, log_posterior, log_prior, posterior_mode,
)
from .mcmc import McmcChain, McmcConfig, run_metropolis
from .summary import ParameterSummary, PosteriorSummary, draws_csv, summarize_posterior
