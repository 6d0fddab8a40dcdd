"""Analyst-style reasoning over metric tables and source documents.

The concept stage asks a configurable bank of analyst questions against the
computed metrics and document excerpts, one prompt per question, and emits
one :class:`Insight` each. The thesis stage then synthesizes the insights,
the valuation summary, and the competitor benchmark into three narratives
(thesis, risks, recommendation). The quantitative rating is authoritative:
if generated text asserts a different rating, the engine retries once with
a corrective instruction and then fails.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from sellside.agents.providers import LlmProvider, PromptEnvelope
from sellside.errors import (
    EmptyContext,
    NoComparablePeriod,
    ProviderFailure,
    RatingMismatch,
)
from sellside.formatting import fmt_currency, fmt_percent, fmt_price
from sellside.ingestion.types import CompanyFinancials, RawDocument
from sellside.metrics import MetricTable, MetricValue, Unit, build_metric_table
from sellside.valuation import Rating, ValuationSummary

BENCHMARK_METRICS = ("revenue_growth", "contribution_margin", "ebitda_margin", "sga_margin")

_RATING_TOKEN = re.compile(r"\b(Buy|Hold|Sell)\b")


class InsightKind(str, Enum):
    REVENUE_DRIVER = "revenue_driver"
    MARGIN_TREND = "margin_trend"
    COMPETITIVE_POSITION = "competitive_position"
    RISK = "risk"
    QUERY_RESPONSE = "query_response"


# Metric rows pulled into context for each question kind.
_KIND_METRICS: dict[InsightKind, tuple[str, ...]] = {
    InsightKind.REVENUE_DRIVER: ("revenue_growth", "cagr"),
    InsightKind.MARGIN_TREND: ("contribution_margin", "ebitda_margin", "sga_margin"),
    InsightKind.COMPETITIVE_POSITION: ("revenue_growth", "ebitda_margin"),
    InsightKind.RISK: ("revenue_growth", "ebitda_margin", "sga_margin"),
}


@dataclass(frozen=True)
class Question:
    text: str
    kind: InsightKind


# The built-in trio mirrors the classic analyst starting points: growth
# drivers, margin position, forward risk.
DEFAULT_QUESTIONS = (
    Question("What are the key drivers of revenue growth?", InsightKind.REVENUE_DRIVER),
    Question("How do the company's margins compare to its competitors?", InsightKind.MARGIN_TREND),
    Question("What potential risks could affect future performance?", InsightKind.RISK),
)


def load_question_bank(path: str | Path | None = None) -> tuple[Question, ...]:
    """Question bank from a JSON config; the shipped default when no path."""
    if path is None:
        raw = resources.files("sellside.agents").joinpath("data/questions.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    entries = json.loads(raw)["questions"]
    return tuple(Question(e["question"], InsightKind(e["kind"])) for e in entries)


@dataclass
class Insight:
    question: str
    answer: str
    kind: InsightKind
    metric_refs: list[tuple[str, str]] = field(default_factory=list)
    document_refs: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer,
            "kind": self.kind.value,
            "metric_refs": [list(r) for r in self.metric_refs],
            "document_refs": list(self.document_refs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Insight:
        return cls(
            question=d["question"],
            answer=d["answer"],
            kind=InsightKind(d["kind"]),
            metric_refs=[tuple(r) for r in d["metric_refs"]],
            document_refs=list(d["document_refs"]),
        )


@dataclass
class CompetitorBenchmark:
    subject: str
    peers: list[str]
    period: str
    metrics: dict[str, dict[str, float]]
    commentary: str

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "peers": list(self.peers),
            "period": self.period,
            "metrics": {m: dict(v) for m, v in self.metrics.items()},
            "commentary": self.commentary,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CompetitorBenchmark:
        return cls(
            subject=d["subject"],
            peers=list(d["peers"]),
            period=d["period"],
            metrics={m: dict(v) for m, v in d["metrics"].items()},
            commentary=d["commentary"],
        )


@dataclass
class ThesisContent:
    thesis: str
    risks: str
    recommendation: str
    rating: Rating

    def to_dict(self) -> dict:
        return {
            "thesis": self.thesis,
            "risks": self.risks,
            "recommendation": self.recommendation,
            "rating": self.rating.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ThesisContent:
        return cls(d["thesis"], d["risks"], d["recommendation"], Rating(d["rating"]))


# ── prompt assembly ──────────────────────────────────────────────────────


def _template(name: str) -> str:
    return resources.files("sellside.agents").joinpath(f"prompts/{name}").read_text("utf-8")


def display_metric(cell: MetricValue) -> str:
    if cell.unit is Unit.CURRENCY:
        return fmt_currency(cell.value)
    if cell.unit is Unit.PERCENT:
        return f"{cell.value:.1f}%"
    if cell.unit is Unit.MULTIPLE:
        return f"{cell.value:.1f}x"
    return fmt_percent(cell.value)


def metric_context(
    table: MetricTable, names: tuple[str, ...] | None = None
) -> tuple[str, list[tuple[str, str]]]:
    """Render metric rows (and matching projections) as context lines.

    Returns the block text plus the (metric, period) refs it contains.
    """
    lines: list[str] = []
    refs: list[tuple[str, str]] = []
    selected = names if names is not None else tuple(sorted({n for n, _ in table.rows}))
    for name in selected:
        for cell in table.values_for(name):
            lines.append(f"{cell.name} {cell.period}: {display_metric(cell)}")
            refs.append((cell.name, cell.period))
    for proj_name in sorted(table.projections):
        cell = table.projections[proj_name]
        base = proj_name.removesuffix("_projection")
        if names is None or base in selected or proj_name in selected:
            lines.append(f"{cell.name} {cell.period}: {display_metric(cell)}")
            refs.append((cell.name, cell.period))
    return "\n".join(lines), refs


def _document_blocks(
    docs: list[RawDocument], byte_budget: int
) -> tuple[list[tuple[str, str]], list[str]]:
    """Most-recent-first excerpts, each trimmed to the byte budget."""
    blocks: list[tuple[str, str]] = []
    refs: list[str] = []
    ordered = sorted(docs, key=lambda d: (d.retrieved_at, d.id), reverse=True)
    for doc in ordered:
        if not doc.content_type.startswith("text/"):
            continue
        excerpt = doc.body[:byte_budget].decode("utf-8", errors="replace")
        blocks.append((f"document {doc.id} ({doc.kind.value}, {doc.period})", excerpt))
        refs.append(doc.id)
    return blocks, refs


def _system_text(fin: CompanyFinancials) -> str:
    return _template("system_analyst.txt").format(company=fin.company_name, ticker=fin.ticker)


def valuation_context(valuation: ValuationSummary) -> str:
    lines = [
        f"rating: {valuation.rating.value}",
        f"target price: {fmt_price(valuation.target_price)}",
        f"current price: {fmt_price(valuation.current_price)}",
        f"enterprise value: {fmt_currency(valuation.enterprise_value)}",
        f"equity value: {fmt_currency(valuation.equity_value)}",
        f"wacc: {fmt_percent(valuation.wacc)}",
    ]
    if valuation.roic is not None:
        lines.append(f"roic: {fmt_percent(valuation.roic)}")
    return "\n".join(lines)


# ── operations ───────────────────────────────────────────────────────────


def run_concept_cot(
    fin: CompanyFinancials,
    table: MetricTable,
    docs: list[RawDocument],
    provider: LlmProvider,
    questions: tuple[Question, ...] | None = None,
    byte_budget: int = 2000,
    max_concurrency: int = 1,
) -> list[Insight]:
    """One grounded insight per question in the bank."""
    if table.is_empty():
        raise EmptyContext(f"{fin.ticker}: metric table is empty")
    bank = questions if questions is not None else DEFAULT_QUESTIONS
    doc_blocks, doc_refs = _document_blocks(docs, byte_budget)
    system = _system_text(fin)

    envelopes: list[tuple[Question, PromptEnvelope, list[tuple[str, str]]]] = []
    for question in bank:
        names = _KIND_METRICS.get(question.kind)
        block_text, refs = metric_context(table, names)
        if not block_text:
            block_text, refs = metric_context(table)
        user = _template("concept_question.txt").format(
            question=question.text, company=fin.company_name
        )
        envelope = PromptEnvelope(
            system_text=system,
            user_text=user,
            context_blocks=(("metrics", block_text), *doc_blocks),
        )
        envelopes.append((question, envelope, refs))

    completions = _complete_many(provider, [e for _, e, _ in envelopes], max_concurrency)
    return [
        Insight(
            question=question.text,
            answer=answer,
            kind=question.kind,
            metric_refs=refs,
            document_refs=list(doc_refs),
        )
        for (question, _, refs), answer in zip(envelopes, completions)
    ]


def answer_financial_query(
    query: str, fin: CompanyFinancials, table: MetricTable, provider: LlmProvider
) -> Insight:
    """Answer an ad-hoc investor question over the full metric table."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    if table.is_empty():
        raise EmptyContext(f"{fin.ticker}: metric table is empty")
    block_text, refs = metric_context(table)
    envelope = PromptEnvelope(
        system_text=_system_text(fin),
        user_text=_template("financial_query.txt").format(query=query, company=fin.company_name),
        context_blocks=(("metrics", block_text),),
    )
    answer = provider.complete(envelope)
    if not answer.strip():
        raise ProviderFailure(provider.name, envelope.prompt_hash, "empty completion")
    return Insight(
        question=query,
        answer=answer,
        kind=InsightKind.QUERY_RESPONSE,
        metric_refs=refs,
        document_refs=[],
    )


def benchmark_competitors(
    subject: CompanyFinancials,
    peers: list[CompanyFinancials],
    provider: LlmProvider,
) -> CompetitorBenchmark:
    """Cross-company metric table plus generated commentary.

    Values come from each company's latest period label shared by all
    companies; commentary is order-independent because tickers sort.
    """
    if not peers:
        raise NoComparablePeriod(f"{subject.ticker}: no peers supplied")
    common = set(subject.period_labels())
    for peer in peers:
        common &= set(peer.period_labels())
    if not common:
        raise NoComparablePeriod(f"{subject.ticker}: no fiscal period shared with all peers")
    from sellside.periods import period_sort_key

    period = max(common, key=period_sort_key)

    companies = sorted([subject] + list(peers), key=lambda f: f.ticker)
    tables = {f.ticker: build_metric_table(f) for f in companies}
    metrics: dict[str, dict[str, float]] = {}
    for name in BENCHMARK_METRICS:
        row: dict[str, float] = {}
        for company in companies:
            cell = tables[company.ticker].get(name, period)
            if cell is not None:
                row[company.ticker] = cell.value
        if row:
            metrics[name] = row

    lines = []
    for name in BENCHMARK_METRICS:
        if name not in metrics:
            continue
        for ticker in sorted(metrics[name]):
            cell = tables[ticker].get(name, period)
            lines.append(f"{name} {ticker} {period}: {display_metric(cell)}")
    envelope = PromptEnvelope(
        system_text=_system_text(subject),
        user_text=_template("benchmark.txt").format(ticker=subject.ticker),
        context_blocks=(("benchmark table", "\n".join(lines)),),
    )
    commentary = provider.complete(envelope)
    return CompetitorBenchmark(
        subject=subject.ticker,
        peers=sorted(p.ticker for p in peers),
        period=period,
        metrics=metrics,
        commentary=commentary,
    )


def run_thesis_cot(
    insights: list[Insight],
    valuation: ValuationSummary,
    benchmark: CompetitorBenchmark,
    provider: LlmProvider,
    company_name: str = "",
) -> ThesisContent:
    """Thesis, risk, and recommendation narratives consistent with the rating."""
    if not insights:
        raise EmptyContext("no insights to synthesize")
    expected = valuation.rating
    shared: list[tuple[str, str]] = [
        ("rating", expected.value),
        ("valuation", valuation_context(valuation)),
    ]
    for insight in insights:
        shared.append((f"insight ({insight.kind.value})", insight.answer))

    name = company_name or benchmark.subject
    thesis_env = PromptEnvelope(
        system_text=_template("thesis.txt").format(company=name),
        user_text="Write the investment thesis narrative.",
        context_blocks=(*shared, ("benchmark commentary", benchmark.commentary)),
    )
    risk_insights = [i for i in insights if i.kind is InsightKind.RISK]
    risk_env = PromptEnvelope(
        system_text=_template("risk.txt").format(company=name),
        user_text="Write the risk analysis narrative.",
        context_blocks=tuple(
            (f"insight ({i.kind.value})", i.answer) for i in (risk_insights or insights)
        ),
    )
    rec_env = PromptEnvelope(
        system_text=_template("recommendation.txt").format(company=name),
        user_text="Write the recommendation rationale.",
        context_blocks=tuple(shared),
    )

    thesis_text = _rating_checked(provider, thesis_env, expected, required=False)
    risk_text = provider.complete(risk_env)
    recommendation = _rating_checked(provider, rec_env, expected, required=True)
    return ThesisContent(
        thesis=thesis_text, risks=risk_text, recommendation=recommendation, rating=expected
    )


def _rating_checked(
    provider: LlmProvider, envelope: PromptEnvelope, expected: Rating, required: bool
) -> str:
    """Complete, verifying the narrative's first rating token; retry once."""
    text = provider.complete(envelope)
    if _rating_consistent(text, expected, required):
        return text
    corrective = PromptEnvelope(
        system_text=envelope.system_text,
        user_text=(
            f"{envelope.user_text}\n"
            f"The assigned rating is {expected.value}; state that rating verbatim and do not"
            " assert any other rating."
        ),
        context_blocks=envelope.context_blocks,
        max_tokens=envelope.max_tokens,
        temperature=envelope.temperature,
    )
    text = provider.complete(corrective)
    if _rating_consistent(text, expected, required):
        return text
    raise RatingMismatch(
        f"narrative asserts a rating other than {expected.value} after corrective retry"
    )


def _rating_consistent(text: str, expected: Rating, required: bool) -> bool:
    match = _RATING_TOKEN.search(text)
    if match is None:
        return not required
    return match.group(1) == expected.value


def _complete_many(
    provider: LlmProvider, envelopes: list[PromptEnvelope], max_concurrency: int
) -> list[str]:
    if max_concurrency <= 1 or len(envelopes) <= 1:
        return [provider.complete(e) for e in envelopes]
    with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
        return list(pool.map(provider.complete, envelopes))


def verify_insight_refs(insights: list[Insight], table: MetricTable, stored_ids: set[str]) -> bool:
    """Referential integrity: every ref resolves to a cell or stored doc."""
    for insight in insights:
        for name, period in insight.metric_refs:
            if table.resolve(name, period) is None:
                return False
        for doc_id in insight.document_refs:
            if doc_id not in stored_ids:
                return False
    return True
