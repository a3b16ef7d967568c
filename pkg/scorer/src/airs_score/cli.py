"""Command line front end: airs-score logprobs / airs-score edd."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .scorer import (
    DEFAULT_MAX_NEW_TOKENS,
    InputFormatError,
    ModelLoadError,
    ScorerConfig,
    TokenizationError,
    read_jsonl,
    sample_edd,
    score_logprobs,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airs-score",
        description="Run a causal LM to produce probe-log JSONL.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    lp = sub.add_parser("logprobs", help="next-token log-probability per item")
    lp.add_argument("--model", required=True, help="model path or identifier")
    lp.add_argument("--items", required=True, type=Path,
                    help="JSONL with item_id, text, label")
    lp.add_argument("--out", required=True, type=Path, help="output JSONL path")
    lp.add_argument("--seed", type=int, default=0)
    lp.add_argument("--position-fraction", type=float, default=0.5)
    lp.add_argument("--max-items", type=int, default=10_000)

    edd = sub.add_parser("edd", help="greedy baseline plus stochastic samples")
    edd.add_argument("--model", required=True, help="model path or identifier")
    edd.add_argument("--prompts", required=True, type=Path,
                     help="JSONL with item_id, prompt, group")
    edd.add_argument("--out", required=True, type=Path, help="output JSONL path")
    edd.add_argument("--n", type=int, default=4, help="stochastic samples per prompt")
    edd.add_argument("--temp", type=float, default=0.8, help="sampling temperature")
    edd.add_argument("--seed", type=int, default=0)
    edd.add_argument("--max-new-tokens", type=int, default=DEFAULT_MAX_NEW_TOKENS)
    edd.add_argument("--max-items", type=int, default=10_000)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "logprobs":
            config = ScorerConfig(
                model_ref=args.model,
                position_fraction=args.position_fraction,
                seed=args.seed,
                max_items=args.max_items,
            )
            items = read_jsonl(args.items, required=("item_id", "text", "label"))
            records = score_logprobs(items, config, out_path=args.out)
        else:
            config = ScorerConfig(
                model_ref=args.model,
                temperature_sampling=args.temp,
                n_samples=args.n,
                seed=args.seed,
                max_items=args.max_items,
            )
            prompts = read_jsonl(args.prompts, required=("item_id", "prompt", "group"))
            records = sample_edd(
                prompts, config, out_path=args.out,
                max_new_tokens=args.max_new_tokens,
            )
    except (ModelLoadError, TokenizationError, InputFormatError, ValueError, OSError) as exc:
        print(f"airs-score error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(records)} records to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
