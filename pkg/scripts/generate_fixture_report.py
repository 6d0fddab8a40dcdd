#!/usr/bin/env python3
"""Generate a research report for the bundled fixture company.

Runs the full pipeline (deterministic mock provider by default) and prints
the paths of the rendered report, so you can inspect an end-to-end output
without writing a config by hand:

    python scripts/generate_fixture_report.py --output demo-out
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from sellside.config import DcfSettings, ProviderSettings, RunConfig, SourceSettings
from sellside.pipeline import run_pipeline
from sellside.valuation import WaccInputs

REPO_ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ticker", default="WM")
    parser.add_argument("--fixtures", default=str(REPO_ROOT / "tests" / "fixtures" / "wm"))
    parser.add_argument("--output", default="demo-out")
    parser.add_argument("--provider", choices=("mock", "replay", "http"), default="mock")
    parser.add_argument("--current-price", type=float, default=105.0)
    args = parser.parse_args()

    config = RunConfig(
        ticker=args.ticker,
        current_price=args.current_price,
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
        output_formats=("markdown", "html"),
    )
    doc, manifest = run_pipeline(config)
    for fmt, suffix in (("markdown", "md"), ("html", "html")):
        print(f"wrote {Path(args.output) / f'{doc.ticker}-{doc.as_of.isoformat()}.{suffix}'}")
    print(f"rating: {doc.rating_box.rating.value}")
    print(f"target price: {doc.rating_box.target_price:.2f}")
    print(f"fact audit passed: {manifest.audit_passed}")
    print(f"provider calls: {manifest.provider_calls}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
