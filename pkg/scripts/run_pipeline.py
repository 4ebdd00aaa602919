"""Run every CLI stage in order on a synthetic cohort and time each one.

    python scripts/run_pipeline.py --out run [--config cfg.json] [--spec default|desk]

Stops at the first non-zero exit code and returns it.
"""

import argparse
import logging
import sys
import time

from photomarkers.cli import run

log = logging.getLogger("run_pipeline")


def stages(spec):
    return [["synth", "--spec", spec], ["aggregate"], ["fit", "--dataset", "all"], ["fit", "--dataset", "pre"],
            ["fit", "--dataset", "ratings"], ["classify", "--dataset", "all"], ["classify", "--dataset", "pre"],
            ["filters"], ["report"]]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="run")
    ap.add_argument("--config")
    ap.add_argument("--spec", default="desk")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")

    common = ["--out", args.out]
    if args.config:
        common += ["--config", args.config]
    if args.seed is not None:
        common += ["--seed", str(args.seed)]
    t_all = time.perf_counter()
    for argv_ in stages(args.spec):
        t0 = time.perf_counter()
        code = run([*argv_, *common])
        log.info("%-22s exit %d  %7.1f s", " ".join(argv_), code, time.perf_counter() - t0)
        if code:
            return code
    log.info("total %.1f s; report in %s/report/", time.perf_counter() - t_all, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
