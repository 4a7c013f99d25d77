"""Command line: ``hybridch run|converge|version``.

Exit status is 0 on success, 1 when the case file or options are invalid
and 2 when a solver fails.
"""

import argparse
import logging
import sys

from .. import __version__
from ..cahn_hilliard import NewtonConvergenceError
from ..coupling import CouplingError
from ..fvm_ns import PressureSolveError
from ..linalg import LinearSolverError
from .cases import CaseError, SteadyStateError, run_case
from .config import ConfigError, load_config, parse_overrides

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2
SOLVER_ERRORS = (CaseError, SteadyStateError, CouplingError, NewtonConvergenceError,
                 PressureSolveError, LinearSolverError, FloatingPointError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="hybridch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, text in (("run", "run one case file"), ("converge", "run a case as a convergence study")):
        p = sub.add_parser(verb, help=text)
        p.add_argument("case_file")
        p.add_argument("--output-dir", help="directory for fields and the report")
        p.add_argument("--steps", type=int, help="step count (transient) or step budget (steady)")
        p.add_argument("--quiet", action="store_true", help="print nothing on success")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a case-file entry; repeatable")
    sub.add_parser("version", help="print the package version")
    return parser


def _load(args):
    overrides = parse_overrides(args.set)
    if args.output_dir:
        overrides["output.dir"] = args.output_dir
    if args.steps is not None:
        if args.steps < 1:
            raise ConfigError("--steps must be positive")
        overrides["time.steps"] = str(args.steps)
    cfg = load_config(args.case_file, overrides)
    if args.verb == "converge" and cfg.kind != "ch_convergence":
        cfg = cfg.with_overrides({"case": "ch_convergence"})
    return cfg


def _summary(report):
    skip = {"outputs"}
    lines = [f"{k}: {v}" for k, v in report.items() if k not in skip]
    lines.append(f"wrote {len(report['outputs'])} file(s)")
    return "\n".join(lines)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.verb == "version":
        print(f"hybridch {__version__}")
        return EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_case(cfg)
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if not args.quiet:
        print(_summary(report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
