"""Fixed-schema research report assembly, fact auditing, and rendering.

Every report carries exactly six sections, in order: company overview,
investment thesis, financial projections, valuation, risk analysis, and
competitor analysis. Narrative goes in text blocks; anything tabular goes
in :class:`RenderedTable` blocks whose cells are pre-formatted strings, so
rendering is a pure serialization step and output bytes are stable.

The fact audit extracts every numeric literal from the narrative blocks and
matches it, after display rounding, against the metric table, the projection
values, the valuation fields, and the report's own rendered table cells. A
claim with no source fails the audit.
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass
from datetime import date

from sellside.agents.orchestration import (
    CompetitorBenchmark,
    Insight,
    InsightKind,
    ThesisContent,
    display_metric,
)
from sellside.errors import MissingSection, RatingMismatch, UnsupportedFormat
from sellside.formatting import fmt_currency, fmt_percent, fmt_price
from sellside.ingestion.types import CompanyFinancials, FinancialPeriod
from sellside.metrics import (
    MetricTable,
    contribution_margin,
    contribution_profit,
    ebitda,
    ebitda_margin,
    enterprise_multiple,
    revenue_growth,
    sga_margin,
)
from sellside.valuation import Rating, ValuationSummary

SECTION_SCHEMA: tuple[tuple[str, str], ...] = (
    ("company_overview", "Company Overview"),
    ("investment_thesis", "Investment Thesis"),
    ("financial_projections", "Financial Projections"),
    ("valuation", "Valuation"),
    ("risk_analysis", "Risk Analysis"),
    ("competitor_analysis", "Competitor Analysis"),
)

PROJECTION_TABLE_METRICS = (
    "revenue",
    "revenue_growth",
    "ebitda",
    "ebitda_margin",
    "contribution_margin",
    "sga_margin",
)

BLANK_CELL = "-"


@dataclass(frozen=True)
class RenderedTable:
    title: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    number_format: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"table {self.title!r} is not rectangular")

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "columns": list(self.columns),
            "rows": [list(r) for r in self.rows],
            "number_format": list(self.number_format),
        }

    @classmethod
    def from_dict(cls, d: dict) -> RenderedTable:
        return cls(
            title=d["title"],
            columns=tuple(d["columns"]),
            rows=tuple(tuple(r) for r in d["rows"]),
            number_format=tuple(d.get("number_format", [])),
        )


Block = str | RenderedTable


@dataclass
class Section:
    id: str
    title: str
    blocks: list[Block]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "blocks": [
                {"type": "text", "text": b} if isinstance(b, str) else {"type": "table", **b.to_dict()}
                for b in self.blocks
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> Section:
        blocks: list[Block] = []
        for b in d["blocks"]:
            if b["type"] == "text":
                blocks.append(b["text"])
            else:
                blocks.append(RenderedTable.from_dict(b))
        return cls(d["id"], d["title"], blocks)


@dataclass(frozen=True)
class RatingBox:
    rating: Rating
    target_price: float
    current_price: float


@dataclass(frozen=True)
class ReportMetadata:
    engine_version: str
    config_hash: str
    provider_name: str


@dataclass
class ReportDocument:
    ticker: str
    as_of: date
    sections: list[Section]
    rating_box: RatingBox
    metadata: ReportMetadata
    audit: FactAudit | None = None

    def __post_init__(self) -> None:
        expected = [sid for sid, _ in SECTION_SCHEMA]
        actual = [s.id for s in self.sections]
        if actual != expected:
            raise ValueError(f"section ids must be {expected}, got {actual}")

    @property
    def tables(self) -> list[RenderedTable]:
        return [b for s in self.sections for b in s.blocks if isinstance(b, RenderedTable)]

    def section(self, section_id: str) -> Section:
        for s in self.sections:
            if s.id == section_id:
                return s
        raise KeyError(section_id)

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "as_of": self.as_of.isoformat(),
            "sections": [s.to_dict() for s in self.sections],
            "rating_box": {
                "rating": self.rating_box.rating.value,
                "target_price": self.rating_box.target_price,
                "current_price": self.rating_box.current_price,
            },
            "metadata": {
                "engine_version": self.metadata.engine_version,
                "config_hash": self.metadata.config_hash,
                "provider_name": self.metadata.provider_name,
            },
            "audit": self.audit.to_dict() if self.audit is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ReportDocument:
        doc = cls(
            ticker=d["ticker"],
            as_of=date.fromisoformat(d["as_of"]),
            sections=[Section.from_dict(s) for s in d["sections"]],
            rating_box=RatingBox(
                rating=Rating(d["rating_box"]["rating"]),
                target_price=d["rating_box"]["target_price"],
                current_price=d["rating_box"]["current_price"],
            ),
            metadata=ReportMetadata(
                engine_version=d["metadata"]["engine_version"],
                config_hash=d["metadata"]["config_hash"],
                provider_name=d["metadata"]["provider_name"],
            ),
        )
        if d.get("audit") is not None:
            doc.audit = FactAudit.from_dict(d["audit"])
        return doc


# ── assembly ─────────────────────────────────────────────────────────────


def assemble_report(
    fin: CompanyFinancials,
    table: MetricTable,
    projections: list[FinancialPeriod],
    valuation: ValuationSummary,
    insights: list[Insight],
    benchmark: CompetitorBenchmark,
    thesis: ThesisContent,
    *,
    as_of: date,
    metadata: ReportMetadata,
) -> ReportDocument:
    """Populate the six-section schema from the pipeline artifacts."""
    requirements = {
        "company_overview": (fin, "no parsed financials"),
        "investment_thesis": (thesis, "no thesis content"),
        "financial_projections": (projections or None, "no projected periods"),
        "valuation": (valuation, "no valuation summary"),
        "risk_analysis": (thesis, "no thesis content"),
        "competitor_analysis": (benchmark, "no competitor benchmark"),
    }
    for section_id, _ in SECTION_SCHEMA:
        value, reason = requirements[section_id]
        if value is None:
            raise MissingSection(section_id, reason)
    if not insights:
        raise MissingSection("investment_thesis", "no analyst insights")
    if thesis.rating is not valuation.rating:
        raise RatingMismatch(
            f"thesis carries {thesis.rating.value!r} but valuation assigned {valuation.rating.value!r}"
        )

    sections = [
        _overview_section(fin, table, benchmark),
        _thesis_section(insights, thesis),
        _projections_section(fin, table, projections),
        _valuation_section(table, valuation, fin),
        _risk_section(insights, thesis),
        _competitor_section(benchmark),
    ]
    return ReportDocument(
        ticker=fin.ticker,
        as_of=as_of,
        sections=sections,
        rating_box=RatingBox(valuation.rating, valuation.target_price, valuation.current_price),
        metadata=metadata,
    )


def _overview_section(
    fin: CompanyFinancials, table: MetricTable, benchmark: CompetitorBenchmark
) -> Section:
    latest = fin.latest
    first = fin.periods[0]
    text = (
        f"{fin.company_name} ({fin.ticker}) reports in {fin.currency}. This analysis covers"
        f" fiscal periods {first.period} through {latest.period}, benchmarked against"
        f" {', '.join(benchmark.peers)}."
    )
    figures = [f"For {latest.period}, revenue was {fmt_currency(latest.revenue)}"]
    ebitda_cell = table.get("ebitda", latest.period)
    if ebitda_cell is not None:
        figures.append(f"EBITDA {fmt_currency(ebitda_cell.value)}")
    margin_cell = table.get("ebitda_margin", latest.period)
    if margin_cell is not None:
        figures.append(f"EBITDA margin {fmt_percent(margin_cell.value)}")
    return Section(
        "company_overview", "Company Overview", [text, ", ".join(figures) + "."]
    )


def _thesis_section(insights: list[Insight], thesis: ThesisContent) -> Section:
    blocks: list[Block] = [thesis.thesis]
    for insight in insights:
        if insight.kind is InsightKind.RISK:
            continue
        blocks.append(f"{insight.question}\n{insight.answer}")
    blocks.append(thesis.recommendation)
    return Section("investment_thesis", "Investment Thesis", blocks)


def _projection_cells(
    fin: CompanyFinancials, table: MetricTable, projections: list[FinancialPeriod]
) -> dict[str, dict[str, str]]:
    """Formatted cell values per metric and period, historical and projected.

    Projected-period metrics are recomputed with the same formulas over the
    projected statement lines, so every cell display-rounds to the value the
    metric layer would produce.
    """
    cells: dict[str, dict[str, str]] = {name: {} for name in PROJECTION_TABLE_METRICS}
    for p in fin.periods:
        cells["revenue"][p.period] = fmt_currency(p.revenue)
    for name in ("revenue_growth", "ebitda", "ebitda_margin", "contribution_margin", "sga_margin"):
        for cell in table.values_for(name):
            cells[name][cell.period] = display_metric(cell)

    chain = [fin.latest, *projections]
    for prev, current in zip(chain, chain[1:]):
        profit = contribution_profit(current.revenue, current.operating_expense)
        earnings = ebitda(profit, current.sga)
        cells["revenue"][current.period] = fmt_currency(current.revenue)
        cells["ebitda"][current.period] = fmt_currency(earnings)
        if prev.revenue > 0:
            cells["revenue_growth"][current.period] = fmt_percent(
                revenue_growth(current.revenue, prev.revenue)
            )
        if current.revenue > 0:
            cells["ebitda_margin"][current.period] = fmt_percent(
                ebitda_margin(earnings, current.revenue)
            )
            cells["contribution_margin"][current.period] = fmt_percent(
                contribution_margin(profit, current.revenue)
            )
            cells["sga_margin"][current.period] = fmt_percent(
                sga_margin(current.sga, current.revenue)
            )
    return cells


def _projections_section(
    fin: CompanyFinancials, table: MetricTable, projections: list[FinancialPeriod]
) -> Section:
    periods = fin.period_labels() + [p.period for p in projections]
    cells = _projection_cells(fin, table, projections)
    rows = tuple(
        (name, *(cells[name].get(period, BLANK_CELL) for period in periods))
        for name in PROJECTION_TABLE_METRICS
    )
    projected_labels = ", ".join(p.period for p in projections)
    intro = (
        f"Historical figures with projections for {projected_labels}. Year one applies the"
        " projection rules directly; later years hold the projected growth and margin constant,"
        " with SG&A margin fixed at its latest historical level."
    )
    projection_table = RenderedTable(
        title="Financial Projections",
        columns=("metric", *periods),
        rows=rows,
        number_format=("text",) + ("display",) * len(periods),
    )
    return Section("financial_projections", "Financial Projections", [intro, projection_table])


def _valuation_section(
    table: MetricTable, valuation: ValuationSummary, fin: CompanyFinancials
) -> Section:
    text = (
        f"The discounted cash flow model implies a target price of"
        f" {fmt_price(valuation.target_price)} per share against a current price of"
        f" {fmt_price(valuation.current_price)}, supporting a {valuation.rating.value} rating."
        f" Projected free cash flow is discounted at a weighted average cost of capital of"
        f" {fmt_percent(valuation.wacc)}."
    )
    rows: list[tuple[str, str]] = [
        ("enterprise value", fmt_currency(valuation.enterprise_value)),
        ("equity value", fmt_currency(valuation.equity_value)),
        ("wacc", fmt_percent(valuation.wacc)),
    ]
    if valuation.roic is not None:
        rows.append(("roic", fmt_percent(valuation.roic)))
    latest_ebitda = table.get("ebitda", fin.latest.period)
    if latest_ebitda is not None and latest_ebitda.value != 0:
        multiple = enterprise_multiple(valuation.enterprise_value, latest_ebitda.value)
        rows.append(
            ("ev/ebitda", "NM" if multiple.not_meaningful else f"{multiple.value:.1f}x")
        )
    rows.extend(
        [
            ("target price", fmt_price(valuation.target_price)),
            ("current price", fmt_price(valuation.current_price)),
            ("rating", valuation.rating.value),
        ]
    )
    summary_table = RenderedTable(
        title="Valuation Summary",
        columns=("item", "value"),
        rows=tuple(rows),
        number_format=("text", "display"),
    )
    note_rows = tuple(tuple(note.split(": ", 1)) if ": " in note else (note, "") for note in valuation.method_notes)
    notes_table = RenderedTable(
        title="Model Assumptions",
        columns=("assumption", "value"),
        rows=note_rows,
        number_format=("text", "text"),
    )
    return Section("valuation", "Valuation", [text, summary_table, notes_table])


def _risk_section(insights: list[Insight], thesis: ThesisContent) -> Section:
    blocks: list[Block] = [thesis.risks]
    for insight in insights:
        if insight.kind is InsightKind.RISK:
            blocks.append(f"{insight.question}\n{insight.answer}")
    return Section("risk_analysis", "Risk Analysis", blocks)


def _competitor_section(benchmark: CompetitorBenchmark) -> Section:
    tickers = sorted({benchmark.subject, *benchmark.peers})
    rows = []
    for name in sorted(benchmark.metrics):
        per_company = benchmark.metrics[name]
        rows.append(
            (
                name,
                *(
                    fmt_percent(per_company[t]) if t in per_company else BLANK_CELL
                    for t in tickers
                ),
            )
        )
    peer_table = RenderedTable(
        title=f"Peer Comparison ({benchmark.period})",
        columns=("metric", *tickers),
        rows=tuple(rows),
        number_format=("text",) + ("percent",) * len(tickers),
    )
    return Section(
        "competitor_analysis", "Competitor Analysis", [benchmark.commentary, peer_table]
    )


# ── fact audit ───────────────────────────────────────────────────────────

_NUMBER = re.compile(r"(?<![\w.])-?\$?\d[\d,]*(?:\.\d+)?[%MBx]?(?!\w)")


@dataclass(frozen=True)
class Claim:
    literal: str
    matched: float | str | None
    location: tuple[str, int, int]  # (section id, block index, char offset)

    def to_dict(self) -> dict:
        return {"literal": self.literal, "matched": self.matched, "location": list(self.location)}

    @classmethod
    def from_dict(cls, d: dict) -> Claim:
        return cls(d["literal"], d["matched"], tuple(d["location"]))


@dataclass
class FactAudit:
    claims: list[Claim]

    @property
    def passed(self) -> bool:
        return all(c.matched is not None for c in self.claims)

    def failures(self) -> list[Claim]:
        return [c for c in self.claims if c.matched is None]

    def to_dict(self) -> dict:
        return {"claims": [c.to_dict() for c in self.claims]}

    @classmethod
    def from_dict(cls, d: dict) -> FactAudit:
        return cls([Claim.from_dict(c) for c in d["claims"]])


def _normalize_literal(token: str) -> tuple[str, str]:
    """Split a matched token into (numeric text, suffix)."""
    text = token.replace("$", "").replace(",", "")
    suffix = ""
    if text and text[-1] in "%MBx":
        suffix = text[-1]
        text = text[:-1]
    return text, suffix


def _match_literal(token: str, sources: list[float], table_literals: set[str]) -> float | str | None:
    text, suffix = _normalize_literal(token)
    stripped = token.replace("$", "").replace(",", "")
    if stripped in table_literals:
        return stripped
    decimals = len(text.split(".", 1)[1]) if "." in text else 0
    scales = {"%": (100.0, 1.0), "M": (1e-6,), "B": (1e-9,), "x": (1.0,), "": (1.0, 1e-6)}[suffix]
    for source in sources:
        for scale in scales:
            if f"{source * scale:.{decimals}f}" == text:
                return source
    return None


def audit_facts(
    doc: ReportDocument, table: MetricTable, valuation: ValuationSummary
) -> FactAudit:
    """Match every numeric literal in the narrative blocks to a source value.

    Sources are the metric table (rows and projections), the valuation
    fields, and the literals displayed in the report's own tables; matching
    rounds the source to the precision the narrative displayed.
    """
    sources = table.all_values() + valuation.numeric_sources()
    table_literals: set[str] = set()
    for rendered in doc.tables:
        for row in rendered.rows:
            for cell in row:
                for match in _NUMBER.finditer(cell):
                    table_literals.add(match.group().replace("$", "").replace(",", ""))

    claims: list[Claim] = []
    for section in doc.sections:
        for block_index, block in enumerate(section.blocks):
            if not isinstance(block, str):
                continue
            for match in _NUMBER.finditer(block):
                claims.append(
                    Claim(
                        literal=match.group(),
                        matched=_match_literal(match.group(), sources, table_literals),
                        location=(section.id, block_index, match.start()),
                    )
                )
    return FactAudit(claims)


# ── rendering ────────────────────────────────────────────────────────────


def render(doc: ReportDocument, format: str) -> bytes:
    """Serialize the document; deterministic bytes, LF line endings."""
    if format == "markdown":
        return _render_markdown(doc).encode("utf-8")
    if format == "html":
        return _render_html(doc).encode("utf-8")
    raise UnsupportedFormat(f"format must be markdown or html, got {format!r}")


def _metadata_comment(doc: ReportDocument) -> str:
    m = doc.metadata
    return (
        f"engine_version={m.engine_version}"
        f" config_hash={m.config_hash}"
        f" provider={m.provider_name}"
    )


def _rating_line(doc: ReportDocument) -> str:
    box = doc.rating_box
    return (
        f"Rating: {box.rating.value} | Target: {fmt_price(box.target_price)}"
        f" | Current: {fmt_price(box.current_price)}"
    )


def _render_markdown(doc: ReportDocument) -> str:
    lines: list[str] = [f"<!-- {_metadata_comment(doc)} -->", ""]
    lines.append(f"**{doc.ticker} Equity Research** | as of {doc.as_of.isoformat()}")
    lines.append("")
    lines.append(f"**{_rating_line(doc)}**")
    for section in doc.sections:
        lines.extend(["", f"# {section.title}", ""])
        for block in section.blocks:
            if isinstance(block, str):
                lines.append(block)
                lines.append("")
            else:
                lines.append(f"**{block.title}**")
                lines.append("")
                lines.append("| " + " | ".join(block.columns) + " |")
                lines.append("|" + "|".join(" --- " for _ in block.columns) + "|")
                for row in block.rows:
                    lines.append("| " + " | ".join(row) + " |")
                lines.append("")
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines) + "\n"


_HTML_STYLE = (
    "body{font-family:Georgia,serif;margin:2rem auto;max-width:60rem;color:#1a1a1a}"
    "h1{border-bottom:1px solid #888;padding-bottom:.2rem}"
    "table{border-collapse:collapse;margin:.8rem 0}"
    "td,th{border:1px solid #999;padding:.25rem .6rem;text-align:left}"
    ".rating{font-weight:bold}"
)


def _render_html(doc: ReportDocument) -> str:
    out: list[str] = [
        "<!DOCTYPE html>",
        "<html>",
        "<head>",
        '<meta charset="utf-8">',
        f"<title>{html.escape(doc.ticker)} Equity Research</title>",
        f"<style>{_HTML_STYLE}</style>",
        "</head>",
        "<body>",
        f"<!-- {html.escape(_metadata_comment(doc))} -->",
        f"<p><strong>{html.escape(doc.ticker)} Equity Research</strong> | as of {doc.as_of.isoformat()}</p>",
        f'<p class="rating">{html.escape(_rating_line(doc))}</p>',
    ]
    for section in doc.sections:
        out.append(f"<h1>{html.escape(section.title)}</h1>")
        for block in section.blocks:
            if isinstance(block, str):
                paragraphs = html.escape(block).replace("\n", "<br>")
                out.append(f"<p>{paragraphs}</p>")
            else:
                out.append(f"<p><strong>{html.escape(block.title)}</strong></p>")
                out.append("<table>")
                out.append(
                    "<tr>" + "".join(f"<th>{html.escape(c)}</th>" for c in block.columns) + "</tr>"
                )
                for row in block.rows:
                    out.append(
                        "<tr>" + "".join(f"<td>{html.escape(c)}</td>" for c in row) + "</tr>"
                    )
                out.append("</table>")
    out.extend(["</body>", "</html>"])
    return "\n".join(out) + "\n"
