"""Command-line driver: ingest, metrics, report, query, evaluate, stability.

Exit codes: 0 success, 1 domain error (message on stderr, tagged with the
failing stage or error type), 2 usage error (argparse).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from datetime import date
from pathlib import Path

from sellside import __version__
from sellside.agents.orchestration import answer_financial_query
from sellside.config import RunConfig, load_config
from sellside.errors import SellsideError, StageError
from sellside.evaluation.judge import DIMENSIONS, evaluate_report
from sellside.evaluation.stability import (
    render_aggregate_table,
    render_histogram,
    render_samples_table,
    run_stability,
)
from sellside.ingestion.parser import parse_statements
from sellside.ingestion.sources import FixtureSource, fetch_documents
from sellside.ingestion.store import DocumentStore
from sellside.ingestion.types import SourceKind
from sellside.metrics import build_metric_table
from sellside.pipeline import make_provider, run_pipeline


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sellside", description="Equity research report engine."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="fetch and store raw documents")
    p_ingest.add_argument("--ticker", required=True)
    p_ingest.add_argument("--fixtures", required=True, help="fixture directory with manifest.json")
    p_ingest.add_argument("--store", default="docstore", help="document store root")
    p_ingest.add_argument("--since", default="1970-01-01", help="ISO date lower bound")
    p_ingest.set_defaults(func=_cmd_ingest)

    p_metrics = sub.add_parser("metrics", help="print the computed metric table")
    p_metrics.add_argument("--ticker", required=True)
    p_metrics.add_argument("--fixtures", required=True)
    p_metrics.set_defaults(func=_cmd_metrics)

    p_report = sub.add_parser("report", help="run the full pipeline and write report files")
    p_report.add_argument("--ticker", required=True)
    p_report.add_argument("--config", required=True)
    p_report.add_argument("--fixtures", default="")
    p_report.add_argument("--output", default="")
    p_report.add_argument("--format", choices=("markdown", "html"), default="")
    p_report.add_argument("--provider", choices=("mock", "replay", "http"), default="")
    p_report.set_defaults(func=_cmd_report)

    p_query = sub.add_parser("query", help="answer one financial question")
    p_query.add_argument("question")
    p_query.add_argument("--ticker", required=True)
    p_query.add_argument("--fixtures", required=True)
    p_query.add_argument("--provider", choices=("mock", "replay", "http"), default="mock")
    p_query.add_argument("--config", default="")
    p_query.set_defaults(func=_cmd_query)

    p_eval = sub.add_parser("evaluate", help="score a rendered report with the judge")
    p_eval.add_argument("--report", required=True, help="path to a rendered report file")
    p_eval.add_argument("--provider", choices=("mock", "replay", "http"), default="mock")
    p_eval.add_argument("--config", default="")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_stab = sub.add_parser("stability", help="repeat-generation consistency assessment")
    p_stab.add_argument("--config", required=True)
    p_stab.add_argument("--runs", required=True, type=int)
    p_stab.add_argument("--methods", default="pipeline", help="comma-separated method labels")
    p_stab.set_defaults(func=_cmd_stability)

    p_version = sub.add_parser("version", help="print the engine version")
    p_version.set_defaults(func=_cmd_version)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error[{exc.stage}]: {exc.cause}", file=sys.stderr)
        return 1
    except SellsideError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


# ── commands ─────────────────────────────────────────────────────────────


def _fixture_financials(ticker: str, fixtures: str):
    source = FixtureSource(fixtures)
    docs = source.fetch(ticker, set(SourceKind), date.fromisoformat("1970-01-01"))
    return parse_statements(docs)


def _cmd_ingest(args: argparse.Namespace) -> int:
    store = DocumentStore(args.store)
    docs = fetch_documents(
        args.ticker,
        set(SourceKind),
        date.fromisoformat(args.since),
        sources=[FixtureSource(args.fixtures)],
        store=store,
    )
    for doc in docs:
        print(f"stored {doc.id} ({doc.kind.value}, {doc.period})")
    print(f"{len(docs)} documents in {args.store}")
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    fin = _fixture_financials(args.ticker, args.fixtures)
    table = build_metric_table(fin)
    sys.stdout.write(table.serialize())
    return 0


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    if getattr(args, "ticker", ""):
        config = dataclasses.replace(config, ticker=args.ticker)
    if getattr(args, "fixtures", ""):
        config = dataclasses.replace(
            config, sources=dataclasses.replace(config.sources, fixtures_dir=args.fixtures)
        )
    if getattr(args, "output", ""):
        config = dataclasses.replace(config, output_dir=args.output)
    if getattr(args, "format", ""):
        config = dataclasses.replace(config, output_formats=(args.format,))
    if getattr(args, "provider", ""):
        config = dataclasses.replace(
            config, provider=dataclasses.replace(config.provider, kind=args.provider)
        )
    return config


def _cmd_report(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    doc, manifest = run_pipeline(config)
    out = Path(config.output_dir)
    for fmt in config.output_formats:
        suffix = "md" if fmt == "markdown" else fmt
        print(f"wrote {out / f'{doc.ticker}-{doc.as_of.isoformat()}.{suffix}'}")
    print(f"wrote {out / f'{doc.ticker}-{doc.as_of.isoformat()}-manifest.json'}")
    audit_note = "passed" if manifest.audit_passed else "FAILED"
    print(f"rating {doc.rating_box.rating.value} | fact audit {audit_note}")
    return 0


def _provider_from_args(args: argparse.Namespace):
    if args.config:
        config = load_config(args.config)
        if args.provider:
            config = dataclasses.replace(
                config, provider=dataclasses.replace(config.provider, kind=args.provider)
            )
        return make_provider(config)
    return make_provider(
        RunConfig(
            ticker="NA",
            current_price=1.0,
            wacc=_placeholder_wacc(),
            provider=_provider_settings(args.provider),
        )
    )


def _provider_settings(kind: str):
    from sellside.config import ProviderSettings

    return ProviderSettings(kind=kind)


def _placeholder_wacc():
    from sellside.valuation import WaccInputs

    return WaccInputs(
        equity_value=1.0, debt_value=0.0, cost_of_equity=0.1, cost_of_debt=0.05, tax_rate=0.25
    )


def _cmd_query(args: argparse.Namespace) -> int:
    fin = _fixture_financials(args.ticker, args.fixtures)
    table = build_metric_table(fin)
    insight = answer_financial_query(args.question, fin, table, _provider_from_args(args))
    print(insight.answer)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    report_text = Path(args.report).read_text("utf-8")
    score = evaluate_report(report_text, _provider_from_args(args))
    print(f"report: {score.report_id}")
    print(f"judge: {score.judge}")
    for dimension in DIMENSIONS:
        print(f"{dimension.value}: {score.get(dimension):g}")
    for dimension in DIMENSIONS:
        comment = score.comments.get(dimension.value, "")
        if comment:
            print(f"-- {dimension.value} --")
            print(comment)
    return 0


def _cmd_stability(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    judge = make_provider(config)
    results = run_stability(
        config,
        methods,
        args.runs,
        judge,
        transcript_dir=Path(config.output_dir) / "transcripts",
    )
    sys.stdout.write(render_samples_table(results))
    print()
    sys.stdout.write(render_aggregate_table(results))
    print()
    sys.stdout.write(render_histogram(results))
    return 0


def _cmd_version(args: argparse.Namespace) -> int:
    print(f"sellside {__version__}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
