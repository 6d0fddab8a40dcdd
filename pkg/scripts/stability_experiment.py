#!/usr/bin/env python3
"""Compare report-generation methods for score consistency.

Generates N reports per method (full pipeline vs zero-shot, few-shot, and
plain chain-of-thought baselines), scores each with per-dimension judge
prompts, and prints the sample table, aggregates, and a text histogram:

    python scripts/stability_experiment.py --runs 4 --methods pipeline,zero_shot
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from sellside.config import DcfSettings, ProviderSettings, RunConfig, SourceSettings
from sellside.evaluation.stability import (
    render_aggregate_table,
    render_histogram,
    render_samples_table,
    run_stability,
)
from sellside.pipeline import make_provider
from sellside.valuation import WaccInputs

REPO_ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=3)
    parser.add_argument("--methods", default="pipeline,zero_shot,few_shot,plain_cot")
    parser.add_argument("--fixtures", default=str(REPO_ROOT / "tests" / "fixtures" / "wm"))
    parser.add_argument("--output", default="stability-out")
    parser.add_argument("--provider", choices=("mock", "replay", "http"), default="mock")
    args = parser.parse_args()

    config = RunConfig(
        ticker="WM",
        current_price=105.0,
        as_of="2024-06-28",
        wacc=WaccInputs(
            equity_value=64000e6,
            debt_value=16000e6,
            cost_of_equity=0.095,
            cost_of_debt=0.045,
            tax_rate=0.25,
        ),
        sources=SourceSettings(fixtures_dir=args.fixtures),
        provider=ProviderSettings(kind=args.provider),
        dcf=DcfSettings(horizon_years=5, terminal_growth=0.02, capital_intensity=0.6),
        output_dir=args.output,
        cache_dir=str(Path(args.output) / "cache"),
        store_dir=str(Path(args.output) / "docstore"),
    )
    judge = make_provider(config)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    results = run_stability(
        config,
        methods,
        args.runs,
        judge,
        transcript_dir=Path(args.output) / "transcripts",
    )
    sys.stdout.write(render_samples_table(results))
    print()
    sys.stdout.write(render_aggregate_table(results))
    print()
    sys.stdout.write(render_histogram(results))
    print(f"transcripts under {Path(args.output) / 'transcripts'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
