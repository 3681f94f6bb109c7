"""Command-line interface.

Exit codes: 0 success, 1 runtime/config/data errors, 2 usage errors
(unknown flags, unknown presets, missing arguments).
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigError, FormatError, UsageError
from . import pipelines
from .presets import TABLE1_PRESETS, canonical_name, list_presets


def _universal(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="master RNG seed")
    parser.add_argument("--config", default=None, help="experiment config JSON")
    parser.add_argument("--out", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mailab",
        description="Adversarial imitation lab on the four-rooms pixel task",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demos", help="generate expert demonstrations")
    _universal(p)
    p.add_argument("--pairs", type=int, default=100_000,
                   help="minimum number of state-action pairs")

    p = sub.add_parser("train-bc", help="phase 1: behavior-clone the encoder")
    _universal(p)
    p.add_argument("--demos", required=True, help="MAILDEMO dataset file")
    p.add_argument("--progress", action="store_true")

    p = sub.add_parser("train-posterior",
                       help="phase 2: pre-train the latent-code posterior")
    _universal(p)
    p.add_argument("--demos", required=True)
    p.add_argument("--bc", required=True, help="train-bc output directory")
    p.add_argument("--progress", action="store_true")

    p = sub.add_parser("train", help="adversarial imitation training")
    _universal(p)
    p.add_argument("--preset", default=None,
                   help="named preset (see list-presets)")
    p.add_argument("--demos", default=None)
    p.add_argument("--bc", default=None, help="train-bc output directory")
    p.add_argument("--posterior", default=None,
                   help="train-posterior output directory")
    p.add_argument("--steps", type=int, default=None,
                   help="override total environment steps")
    p.add_argument("--progress", action="store_true")

    p = sub.add_parser("eval", help="score a trained policy")
    _universal(p)
    p.add_argument("--checkpoint", required=True,
                   help="checkpoint bundle directory")
    p.add_argument("--episodes", type=int, default=200)

    p = sub.add_parser("export-embeddings",
                       help="dump encoder features over sampled states")
    _universal(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n-states", type=int, default=1000)

    p = sub.add_parser("export-code-stats",
                       help="dump latent-code usage over rollout episodes")
    _universal(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=100)

    sub.add_parser("list-presets", help="list experiment presets")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    seed = args.seed if getattr(args, "seed", None) is not None else 0
    try:
        if args.command == "list-presets":
            for name in list_presets():
                tag = "  [table-1]" if name in TABLE1_PRESETS else ""
                print(f"{name}{tag}")
            return 0

        if args.command == "gen-demos":
            if args.out is None:
                parser.error("gen-demos needs --out")
            path = pipelines.run_gen_demos(args.pairs, seed, args.out)
            print(f"wrote {path}")
            return 0

        if args.command == "train-bc":
            if args.out is None:
                parser.error("train-bc needs --out")
            out = pipelines.run_train_bc(args.demos, seed, args.out,
                                         progress=args.progress)
            report = json.loads((out / "bc_report.json").read_text())
            print(f"holdout accuracy {report['holdout_accuracy']:.4f} "
                  f"after {report['epochs_run']} epochs -> {out}")
            return 0

        if args.command == "train-posterior":
            if args.out is None:
                parser.error("train-posterior needs --out")
            out = pipelines.run_train_posterior(
                args.demos, args.bc, seed, args.out, progress=args.progress
            )
            print(f"wrote {out}")
            return 0

        if args.command == "train":
            if args.preset is not None:
                canonical_name(args.preset)  # unknown preset -> usage error
            exp = pipelines.experiment_from_args(
                args.preset, args.config, args.seed, args.demos, args.bc,
                args.posterior, args.out, args.steps,
            )
            summary = pipelines.run_train(exp, progress=args.progress)
            print(json.dumps(summary, indent=2))
            return 0

        if args.command == "eval":
            result = pipelines.run_eval(args.checkpoint, args.episodes, seed,
                                        args.out)
            print(json.dumps(result, indent=2))
            return 0

        if args.command == "export-embeddings":
            if args.out is None:
                parser.error("export-embeddings needs --out")
            path = pipelines.run_export_embeddings(
                args.checkpoint, args.n_states, seed, args.out
            )
            print(f"wrote {path}")
            return 0

        if args.command == "export-code-stats":
            if args.out is None:
                parser.error("export-code-stats needs --out")
            summary = pipelines.run_export_code_stats(
                args.checkpoint, args.episodes, seed, args.out
            )
            print(json.dumps(summary, indent=2))
            return 0
    except ConfigError as err:
        # unknown preset is a usage error (exit 2), everything else exit 1
        if "unknown preset" in str(err):
            parser.error(str(err))
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (FormatError, UsageError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
