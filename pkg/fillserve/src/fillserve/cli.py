"""Command line for the fill service."""

from __future__ import annotations

import argparse
import json
import sys

from .app import ServeConfig, serve
from .train import train_from_mixture


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fillserve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="start the HTTP service")
    run.add_argument("--host", default="127.0.0.1")
    run.add_argument("--port", type=int, default=8765)
    run.add_argument("--backend", default="dummy")
    run.add_argument("--checkpoint")
    run.add_argument("--max-batch-size", type=int, default=16)
    run.add_argument("--request-timeout", type=float, default=30.0)

    train = sub.add_parser("train", help="fit a backend adapter on a mixture file")
    train.add_argument("--mixture", required=True)
    train.add_argument("--adapter", default="dummy")
    train.add_argument("--out-dir", default=".")
    train.add_argument("--hyperparameters", default="{}",
                       help="JSON object of adapter hyperparameters")

    args = parser.parse_args(argv)
    if args.command == "run":
        config = ServeConfig(host=args.host, port=args.port,
                             backend=args.backend, checkpoint=args.checkpoint,
                             max_batch_size=args.max_batch_size,
                             request_timeout=args.request_timeout)
        serve(config)
        return 0
    report = train_from_mixture(args.mixture, args.adapter,
                                json.loads(args.hyperparameters), args.out_dir)
    print(f"records: {report.records}")
    for mode, fraction in sorted(report.proportions().items()):
        print(f"  {mode}: {fraction:.3f}")
    print(f"checkpoint: {report.checkpoint}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
