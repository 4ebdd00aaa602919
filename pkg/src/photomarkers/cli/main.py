"""``photomarkers`` command line."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from ..cohort import CohortSpec
from .artifacts import Layout
from .commands import PipelineError, cmd_aggregate, cmd_classify, cmd_extract, cmd_filters, cmd_fit, cmd_synth
from .config import ConfigError, PipelineConfig
from .report import cmd_report

log = logging.getLogger("photomarkers")

EXIT_OK, EXIT_DATA, EXIT_MISSING, EXIT_CONVERGENCE = 0, 1, 2, 3


def _global_flags(argument_default=None):
    p = argparse.ArgumentParser(add_help=False, argument_default=argument_default)
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", help="run directory (default: run)")
    p.add_argument("--threads", type=int, help="worker threads")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photomarkers", parents=[_global_flags()],
                                     description="Photo-feature depression screening pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    # flags may also follow the subcommand; SUPPRESS keeps those from clobbering earlier ones
    common = _global_flags(argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("extract", parents=[common], help="per-photo HSV and face features")
    sub.add_parser("aggregate", parents=[common], help="admission and user-day matrices")
    p = sub.add_parser("fit", parents=[common], help="Bayesian and frequentist logit")
    p.add_argument("--dataset", choices=["all", "pre", "ratings"], default="all")
    p = sub.add_parser("classify", parents=[common], help="random forest grid search and repeated runs")
    p.add_argument("--dataset", choices=["all", "pre"], default="all")
    sub.add_parser("filters", parents=[common], help="filter usage chi-squared tests")
    p = sub.add_parser("synth", parents=[common], help="synthetic cohort with planted effects")
    p.add_argument("--spec", default=None,
                   help="'default', 'desk' or a JSON file of cohort spec fields (default: config synth section)")
    sub.add_parser("report", parents=[common], help="assemble the report bundle")
    return parser


def _synth_override(spec_arg):
    if spec_arg is None:
        return None
    if spec_arg == "default":
        return {}
    if spec_arg == "desk":
        d = CohortSpec.desk()
        return {k: getattr(d, k) for k in ("n_depressed", "n_healthy", "posts_depressed", "posts_healthy")}
    with open(spec_arg) as fh:
        return json.load(fh)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    t0 = time.perf_counter()
    try:
        overrides = {"seed": args.seed, "threads": args.threads}
        if args.command == "synth":
            overrides["synth"] = _synth_override(args.spec)
        cfg = PipelineConfig.load(args.config, overrides)
        layout = Layout(args.out or "run")
        if args.command == "synth":
            cmd_synth(cfg, layout)
        elif args.command == "extract":
            cmd_extract(cfg, layout)
        elif args.command == "aggregate":
            cmd_aggregate(cfg, layout)
        elif args.command == "fit":
            cmd_fit(cfg, layout, args.dataset)
        elif args.command == "classify":
            cmd_classify(cfg, layout, args.dataset)
        elif args.command == "filters":
            cmd_filters(cfg, layout)
        elif args.command == "report":
            cmd_report(cfg, layout)
    except PipelineError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except ConfigError as exc:
        log.error("config: %s", exc)
        return EXIT_DATA
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return EXIT_MISSING
    except (ValueError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    log.info("%s finished in %.1f s", args.command, time.perf_counter() - t0)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
