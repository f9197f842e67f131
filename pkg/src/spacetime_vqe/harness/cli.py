"""Command-line interface.

    spacetime-vqe solve      --config cfg.yaml [--output-dir DIR] [--seed N] [--jobs N]
    spacetime-vqe sweep      --config cfg.yaml ...
    spacetime-vqe multigrid  --config cfg.yaml ...
    spacetime-vqe spectral   --config cfg.yaml ...
    spacetime-vqe qnpu verify --config cfg.yaml ...
    spacetime-vqe sample     --config cfg.yaml ...
    spacetime-vqe figures NAME [--output-dir DIR] [--seeds N] [--steps N]

Exit status 0 on success; on failure a machine-readable JSON error record
goes to stderr and the status is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import figures
from .config import ConfigError, load_config
from .runner import run

_VERB_KINDS = {
    "solve": ("solve", "sample"),
    "sweep": ("depth_sweep", "scaling"),
    "multigrid": ("multigrid",),
    "spectral": ("spectral",),
    "sample": ("sample", "solve"),
}


def _add_common(parser):
    parser.add_argument("--config", required=True, help="YAML experiment configuration")
    parser.add_argument("--output-dir", default=None)
    parser.add_argument("--seed", type=int, default=None, help="override the base seed")
    parser.add_argument("--jobs", type=int, default=1, help="parallel seeds (threads)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spacetime-vqe")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("solve", "sweep", "multigrid", "spectral", "sample"):
        _add_common(sub.add_parser(verb))
    qnpu_parser = sub.add_parser("qnpu")
    qnpu_sub = qnpu_parser.add_subparsers(dest="qnpu_verb", required=True)
    _add_common(qnpu_sub.add_parser("verify"))
    fig = sub.add_parser("figures")
    fig.add_argument("name", choices=sorted(figures.SUITES))
    fig.add_argument("--output-dir", default=None)
    fig.add_argument("--seeds", type=int, default=None)
    fig.add_argument("--steps", type=int, default=None)
    return parser


def _fail(code: str, message: str) -> int:
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)
    return 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "figures":
            overrides = {}
            if args.seeds is not None:
                overrides["seeds"] = args.seeds
            if args.steps is not None:
                overrides["steps"] = args.steps
            out = args.output_dir or f"runs/{args.name}"
            paths = figures.figure_suite(args.name, out, **overrides)
            for p in paths:
                print(p)
            return 0
        if args.verb == "qnpu":
            expected = ("qnpu_verify",)
        else:
            expected = _VERB_KINDS[args.verb]
        config = load_config(args.config)
        if config.kind not in expected:
            return _fail(
                "kind-mismatch",
                f"verb {args.verb!r} expects a config of kind {expected}, got {config.kind!r}",
            )
        out = run(config, output_dir=args.output_dir, seed_override=args.seed, jobs=args.jobs)
        print(out)
        return 0
    except ConfigError as exc:
        return _fail("invalid-config", str(exc))
    except FileNotFoundError as exc:
        return _fail("missing-file", str(exc))
    except Exception as exc:  # surfaced as a machine-readable record, per contract
        return _fail(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
