"""Command-line entry point.

::

    anchorloc run --scenario ssl-example1 --trials 500 --seed 0 --out results
    anchorloc run --config experiment.yaml --jobs 4
    anchorloc solve-scene path/to/scene --out estimates.csv
    anchorloc verify

The default output directory is read from ``$ANCHORLOC_OUT`` and falls back to
``./results``. Exit codes: 0 success, 1 failed verification or runtime error,
2 usage or configuration error.
"""

import argparse
import csv
import logging
import sys

import numpy as np
import yaml

from . import acceptance, experiments, synth
from .estimators import MultiSourceTLMDS
from .exceptions import AnchorlocError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _positive_int(text):
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if val < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return val


def _criteria(text):
    try:
        nums = {int(tok) for tok in text.split(",") if tok.strip()}
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    valid = {c.number for c in acceptance.CRITERIA}
    if not nums or not nums <= valid:
        raise argparse.ArgumentTypeError(f"criteria must be among {sorted(valid)}")
    return nums


def build_parser():
    parser = argparse.ArgumentParser(
        prog="anchorloc", description="Range-based source localisation experiments."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    run = sub.add_parser("run", help="run a Monte Carlo experiment and write CSV tables")
    run.add_argument("--config", metavar="PATH", help="YAML experiment file")
    run.add_argument("--scenario", choices=experiments.SCENARIOS)
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=_positive_int)
    run.add_argument("--out", metavar="DIR",
                     help=f"output directory (default ${experiments.OUT_ENV} or ./results)")
    run.add_argument("--jobs", type=_positive_int, help="worker processes")

    scene = sub.add_parser("solve-scene", help="localise the sources of a scene directory")
    scene.add_argument("scene", metavar="DIR",
                       help="directory with anchors.csv, E.csv and optional F.csv, sources.csv")
    scene.add_argument("--out", metavar="FILE", help="write estimated sources as CSV")
    scene.add_argument("--max-sweeps", type=_positive_int, default=500)

    verify = sub.add_parser("verify", help="run the acceptance criteria")
    verify.add_argument("--config", metavar="PATH",
                        help="YAML file with an optional 'only' list of criteria")
    verify.add_argument("--only", type=_criteria, metavar="N[,N...]",
                        help="run only these criteria")
    verify.add_argument("--inject", choices=["corrupt-frame"], help=argparse.SUPPRESS)
    return parser


def _read_yaml(path):
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        raise ValueError(f"{path}: config file is empty")
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    return data


def cmd_run(args):
    if args.config is not None:
        _read_yaml(args.config)
    config = experiments.load_config(
        args.config, scenario=args.scenario, seed=args.seed, trials=args.trials,
        out=args.out, jobs=args.jobs,
    )
    paths = experiments.run(config)
    for path in paths.values():
        print(path)
    return EXIT_OK


def cmd_solve_scene(args):
    scene = synth.load_scene(args.scene)
    est = MultiSourceTLMDS(max_sweeps=args.max_sweeps).fit(scene["anchors"])
    Y = est.transform(scene["E"].T, scene["F"])
    res = est.result_
    print(f"sweeps={res.sweeps} converged={res.converged} objective={res.history[-1]!r}")
    if scene["sources"] is not None:
        print(f"rmsd={synth.rmsd(Y, scene['sources'])!r}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in np.asarray(Y):
                writer.writerow([repr(float(v)) for v in row])
    return EXIT_OK


def cmd_verify(args):
    only = args.only
    if args.config is not None:
        data = _read_yaml(args.config)
        unknown = set(data) - {"only"}
        if unknown:
            raise ValueError(f"unknown verify keys: {sorted(unknown)}")
        if only is None and "only" in data:
            only = _criteria(",".join(str(n) for n in data["only"]))
    results = acceptance.run_all(fault=args.inject, only=only, echo=print)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_FAIL


COMMANDS = {"run": cmd_run, "solve-scene": cmd_solve_scene, "verify": cmd_verify}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("anchorloc: error: a command is required", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except AnchorlocError as exc:
        print(f"anchorloc: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, argparse.ArgumentTypeError, OSError, yaml.YAMLError) as exc:
        print(f"anchorloc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
