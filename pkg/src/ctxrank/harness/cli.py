"""``ctxrank`` command line: train, eval, rerank, gradcheck, synth.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(non-finite loss, failed gradient check).
"""

import argparse
import os
import sys

from ..errors import (
    BackwardBeforeForward, ConfigError, InvalidProbability, NonFiniteLoss, RankingError,
)
from .commands import format_gradcheck, run_gradcheck, synth_command
from .config import dump_config, load_config
from .rerank import rerank_pipeline
from .training import evaluate, train

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL_ERRORS = (NonFiniteLoss, InvalidProbability, BackwardBeforeForward, FloatingPointError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p, out_required=False):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V",
                   help="dotted override, e.g. model.N=2 (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--precision", choices=("f32", "f64"))
    p.add_argument("--out", required=out_required, help="output directory")


def build_parser():
    parser = _Parser(prog="ctxrank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("train", help="fit a model and write metrics, log and checkpoint"))
    p = sub.add_parser("eval", help="evaluate a saved checkpoint")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    _common(sub.add_parser("rerank", help="base ranker vs. model with and without PE"))
    p = sub.add_parser("gradcheck", help="finite-difference check of every loss")
    p.add_argument("--loss", action="append", dest="losses", help="restrict to this loss (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    _common(sub.add_parser("synth", help="write a synthetic dataset as LETOR files"),
            out_required=True)
    return parser


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def _config(args):
    config = load_config(args.config, args.overrides, args.seed, args.precision)
    sys.stdout.write(dump_config(config))
    return config


def _write(out, name, text):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, name), "w", newline="\n") as fh:
        fh.write(text)


def _run(args):
    if args.command == "gradcheck":
        try:
            reports = run_gradcheck(args.losses, h=args.h, tolerance=args.tolerance, seed=args.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        print(format_gradcheck(reports))
        return EXIT_OK if all(r.passed for r in reports.values()) else EXIT_NUMERICAL

    config = _config(args)
    if args.command == "train":
        result = train(config, args.out, _log)
        print(result.final_report.to_table())
    elif args.command == "eval":
        print(evaluate(config, args.checkpoint, args.out).to_table())
    elif args.command == "rerank":
        res = rerank_pipeline(config, _log)
        for name, rep in (("base", res.base), ("with_pe", res.with_pe),
                          ("without_pe", res.without_pe)):
            print(f"== {name}\n{rep.to_table()}")
            if args.out:
                _write(args.out, f"metrics_{name}.tsv", rep.to_tsv())
        if args.out:
            _write(args.out, "config.json", dump_config(config))
    elif args.command == "synth":
        for name, path in synth_command(config, args.out).items():
            _log(f"wrote {name}: {path}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except NUMERICAL_ERRORS as exc:
        _log(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    except (ConfigError, OSError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except RankingError as exc:
        _log(f"error: {type(exc).__name__}: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
