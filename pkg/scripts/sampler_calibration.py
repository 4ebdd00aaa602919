"""Seed sweep of the sampler calibration check on synthetic logit cohorts.

For each seed: simulate n observations with five standard-normal covariates,
run the desk MCMC config, and record max |posterior mean - MLE| / MCSE,
max R-hat and max Geweke |z|. Prints one row per seed and the pass rate of
each threshold, which shows how often a single seeded run clears all three.

    python scripts/sampler_calibration.py --seeds 20 [--n 10000]
"""

import argparse
import logging
import time

import numpy as np
from scipy import special

from photomarkers.inference import (
    LogitSpec, McmcConfig, design_matrix, fit_logit_mle, geweke, run_metropolis, summarize_posterior,
)

log = logging.getLogger("sampler_calibration")

BETA = np.array([-0.3, 0.5, -0.4, 0.3, 0.0, 0.2])


def one_run(seed, n, iterations, burn_in):
    rng = np.random.default_rng(seed)
    X = design_matrix(rng.standard_normal((n, BETA.size - 1)))
    y = (rng.random(n) < special.expit(X @ BETA)).astype(np.float64)
    spec = LogitSpec(tuple(f"x{j}" for j in range(BETA.size - 1)))
    chains = run_metropolis(X, y, spec, McmcConfig(chains=2, iterations=iterations, burn_in=burn_in, seed=seed))
    post = summarize_posterior(chains, spec.names)
    mle = fit_logit_mle(X, y).coef
    dev = max(abs(post[k].mean - mle[j]) / post[k].mcse for j, k in enumerate(spec.names))
    return dev, post.max_rhat(), max(geweke(c).max_abs() for c in chains)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--iterations", type=int, default=20_000)
    ap.add_argument("--burn-in", type=int, default=2_000)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    rows = []
    t0 = time.perf_counter()
    for s in range(args.seeds):
        dev, rhat, z = one_run(s, args.n, args.iterations, args.burn_in)
        rows.append((dev, rhat, z))
        log.info("seed %3d  dev/mcse %5.2f  rhat %.4f  geweke %5.2f", s, dev, rhat, z)
    r = np.array(rows)
    ok = np.c_[r[:, 0] < 2, r[:, 1] < 1.01, r[:, 2] < 3]
    log.info("pass rates: mcse %.2f  rhat %.2f  geweke %.2f  all %.2f  (%.0f s)", *ok.mean(axis=0),
             ok.all(axis=1).mean(), time.perf_counter() - t0)


if __name__ == "__main__":
    main()
