"""Command line: ``regpart compute|verify|example|probe``.

Exit codes: 0 success, 1 randomized-verification failure, 2 validation
failure (a model is structurally sound but violates an invariant; the
message names the offending cell where known), 3 parse failure.
"""

import argparse
import sys

from .diagnostics import PROBE_LAMBDAS
from .errors import ParseError, ValidationError
from .modelio import dumps_canonical, load_model, write_doc
from .pipeline import (cantor_model_doc, compute_report, run_probe,
                       run_verification)

__all__ = ["build_parser", "main"]


def _parse_lambda_list(text):
    if text is None:
        return PROBE_LAMBDAS
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ParseError("--lambda-list expects comma-separated numbers, "
                         "got %r" % text) from None
    if len(values) < 2:
        raise ValidationError("--lambda-list needs at least two values")
    return values


def _parse_dims(text):
    try:
        dims = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ParseError("--dims expects comma-separated integers, got %r"
                         % text) from None
    if not dims or any(d < 1 or d > 6 for d in dims):
        raise ValidationError("--dims entries must lie in 1..6")
    return dims


def build_parser():
    parser = argparse.ArgumentParser(
        prog="regpart",
        description="Split sectorial sesquilinear forms into regular and "
                    "singular parts and cross-check the result.")
    sub = parser.add_subparsers(dest="command", required=True)

    compute = sub.add_parser(
        "compute", help="regularize a model file and write the report")
    compute.add_argument("--model", required=True, help="model file path")
    compute.add_argument("--out", default=None,
                         help="report path (default: stdout)")
    compute.add_argument("--seed", type=int, default=0,
                         help="seed recorded in the report")
    compute.add_argument("--lambda-list", dest="lambda_list", default=None,
                         help="comma-separated probe modulation frequencies")

    verify = sub.add_parser(
        "verify", help="run the randomized identity and oracle suites")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--trials", type=int, default=1000,
                        help="identity draws per dimension")
    verify.add_argument("--dims", default="1,2,3",
                        help="comma-separated dimensions")

    example = sub.add_parser(
        "example", help="write the fat-Cantor worked-example model file")
    example.add_argument("name", nargs="?", default="cantor",
                         help="example family (only 'cantor')")
    example.add_argument("--stage", type=int, default=5,
                         help="construction stage (0..12)")
    example.add_argument("--out", required=True, help="model file path")

    probe = sub.add_parser(
        "probe", help="plane-wave growth probe of the kernel operator")
    probe.add_argument("--model", required=True, help="model file path")
    probe.add_argument("--out", default=None,
                       help="probe report path (default: stdout)")
    probe.add_argument("--lambda-list", dest="lambda_list", default=None,
                       help="comma-separated modulation frequencies")

    return parser


def _emit(doc, out_path):
    if out_path:
        write_doc(out_path, doc)
        print("wrote %s" % out_path)
    else:
        sys.stdout.write(dumps_canonical(doc))


def _dispatch(args):
    if args.command == "compute":
        model = load_model(args.model)
        report = compute_report(model, lambdas=_parse_lambda_list(
            args.lambda_list), seed=args.seed)
        _emit(report, args.out)
        return 0
    if args.command == "verify":
        summary = run_verification(seed=args.seed, trials=args.trials,
                                   dims=_parse_dims(args.dims))
        return summary["code"]
    if args.command == "example":
        if args.name != "cantor":
            raise ValidationError("unknown example %r (only 'cantor')"
                                  % args.name)
        _emit(cantor_model_doc(args.stage), args.out)
        return 0
    if args.command == "probe":
        model = load_model(args.model)
        doc = run_probe(model, lambdas=_parse_lambda_list(args.lambda_list))
        _emit(doc, args.out)
        return 0
    raise ParseError("unknown command %r" % args.command)  # pragma: no cover


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ParseError as exc:
        print("parse error: %s" % exc, file=sys.stderr)
        return 3
    except ValidationError as exc:
        print("validation error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
