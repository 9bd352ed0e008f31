"""Entry point: `python -m casbridge` serves the stdio protocol;
`python -m casbridge cross-validate --in FILE` audits a dataset."""

import argparse
import sys


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mathgen-bridge")
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("serve", help="serve the JSON-lines stdio protocol (default)")
    p = sub.add_parser("cross-validate", help="audit a dataset file against SymPy")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--task", default="bwd",
                   choices=("fwd", "bwd", "ibp", "ode1", "ode2"))
    p.add_argument("--timeout", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if args.command == "cross-validate":
        from .crossval import cross_validate
        report = cross_validate(args.infile, args.fraction, args.task,
                                args.timeout, args.seed)
        print(report.to_json())
        return 0
    from .worker import serve
    serve()
    return 0


if __name__ == "__main__":
    sys.exit(main())
