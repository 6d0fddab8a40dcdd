"""Statement normalization: flat key/value documents -> CompanyFinancials.

Document bodies are line oriented. Lines before the first ``period:`` marker
set document context (ticker, company_name, currency, units, peers); each
``period:`` line opens a block of ``line item: value`` rows. Line-item names
are mapped to normalized fields through a declarative alias table shipped
with the package, so filings with varying captions normalize to one schema.

Amounts are scaled to base currency units at parse time with exact decimal
arithmetic (a ``units: millions`` header multiplies by 10^6 before the one
conversion to float), and every parsed value records the byte span of its
numeric token plus the applied scale. Fields absent from the sources stay
absent; nothing is defaulted.

When two documents cover the same period, the most recently retrieved one
wins field by field, and provenance follows the winner.
"""

from __future__ import annotations

import json
import re
from decimal import Decimal, InvalidOperation
from importlib import resources

from sellside.errors import InconsistentTicker, ParseFailure
from sellside.ingestion.types import (
    CompanyFinancials,
    FinancialPeriod,
    NUMERIC_FIELDS,
    RawDocument,
    SourceSpan,
)

_WS = re.compile(r"\s+")

_SCALES = {
    "ones": Decimal(1),
    "base": Decimal(1),
    "units": Decimal(1),
    "thousands": Decimal(10) ** 3,
    "millions": Decimal(10) ** 6,
    "billions": Decimal(10) ** 9,
}

_HEADER_KEYS = ("ticker", "company_name", "company name", "company", "currency", "units", "peers", "kind")


def _normalize_key(raw: str) -> str:
    return _WS.sub(" ", raw.strip().lower())


def load_alias_table() -> dict[str, tuple[str, str]]:
    """Alias -> (field name, field unit), from the shipped alias config."""
    data = resources.files("sellside.ingestion").joinpath("data/line_item_aliases.json")
    config = json.loads(data.read_text("utf-8"))
    table: dict[str, tuple[str, str]] = {}
    for field_name, entry in config["fields"].items():
        for alias in entry["aliases"]:
            table[_normalize_key(alias)] = (field_name, entry["unit"])
    return table


_ALIASES = load_alias_table()


def _iter_lines(body: bytes):
    """Yield (byte_offset, line_bytes) for each line of ``body``."""
    offset = 0
    for line in body.split(b"\n"):
        yield offset, line
        offset += len(line) + 1


def _parse_document(doc: RawDocument, state: dict) -> None:
    """Fold one document into the accumulating parse state."""
    current_period: str | None = None
    for offset, raw_line in _iter_lines(doc.body):
        try:
            line = raw_line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseFailure(doc.id, offset + exc.start, "undecodable bytes") from exc
        if ":" not in line:
            continue  # free text (MD&A prose and the like)
        key_raw, _, value_raw = line.partition(":")
        key = _normalize_key(key_raw)
        value = value_raw.strip()
        if key == "period":
            current_period = value
            state["periods"].setdefault(value, {})
            continue
        if key in _HEADER_KEYS:
            if key == "ticker" and value:
                if value.upper() != doc.company.upper():
                    raise InconsistentTicker(
                        f"document {doc.id!r} is for {doc.company!r} but declares ticker {value!r}"
                    )
                state["ticker"] = value.upper()
            elif key in ("company_name", "company name", "company") and value:
                state["company_name"] = value
            elif key == "currency" and value:
                state["currency"] = value
            elif key == "peers" and value:
                state["peers"] = [p.strip().upper() for p in value.split(",") if p.strip()]
            elif key == "units":
                scale = _SCALES.get(value.lower())
                if scale is None:
                    raise ParseFailure(doc.id, offset, f"unknown units {value!r}")
                state["scale"] = scale
            continue
        if key not in _ALIASES:
            continue  # unmapped line item; never guess
        field_name, field_unit = _ALIASES[key]
        if current_period is None:
            raise ParseFailure(doc.id, offset, f"line item {key!r} appears before any period marker")
        token = value.replace(",", "")
        value_bytes = raw_line.split(b":", 1)[1]
        value_start = offset + raw_line.index(b":") + 1 + (len(value_bytes) - len(value_bytes.lstrip()))
        try:
            number = Decimal(token)
        except InvalidOperation as exc:
            raise ParseFailure(doc.id, value_start, f"non-numeric value {value!r} for {key!r}") from exc
        scale = state["scale"] if field_unit in ("currency", "count") else Decimal(1)
        span = SourceSpan(doc.id, value_start, value_start + len(value_bytes.strip()), float(scale))
        state["periods"][current_period][field_name] = (float(number * scale), span)


def parse_statements(docs: list[RawDocument]) -> CompanyFinancials:
    """Normalize statement documents into one CompanyFinancials.

    Deterministic: documents are folded in (retrieved_at, id) order, so the
    result does not depend on input ordering, and re-parsing identical
    documents yields a structurally identical value.
    """
    if not docs:
        raise ParseFailure("", 0, "no documents to parse")
    tickers = {d.company.upper() for d in docs}
    if len(tickers) != 1:
        raise InconsistentTicker(f"documents span multiple tickers: {sorted(tickers)}")
    (ticker,) = tickers

    state: dict = {
        "ticker": ticker,
        "company_name": ticker,
        "currency": "USD",
        "peers": [],
        "periods": {},
    }
    for doc in sorted(docs, key=lambda d: (d.retrieved_at, d.id)):
        if not doc.content_type.startswith("text/"):
            continue
        state["scale"] = Decimal(1)
        _parse_document(doc, state)

    period_values = {label: vals for label, vals in state["periods"].items() if vals}
    if not period_values:
        raise ParseFailure(docs[0].id, 0, "no statement data found in any document")

    periods: list[FinancialPeriod] = []
    provenance: dict[str, SourceSpan] = {}
    for label, values in period_values.items():
        kwargs = {name: pair[0] for name, pair in values.items()}
        missing = [f for f in ("revenue", "operating_expense", "sga") if f not in kwargs]
        if missing:
            some_span = next(iter(values.values()))[1]
            raise ParseFailure(
                some_span.doc_id, some_span.start, f"period {label!r} missing {missing}"
            )
        try:
            periods.append(FinancialPeriod(period=label, **kwargs))
        except ValueError as exc:
            some_span = next(iter(values.values()))[1]
            raise ParseFailure(some_span.doc_id, some_span.start, str(exc)) from exc
        for name, (_, span) in values.items():
            provenance[f"{label}.{name}"] = span

    return CompanyFinancials(
        ticker=state["ticker"],
        company_name=state["company_name"],
        currency=state["currency"],
        periods=periods,
        peers=state["peers"],
        provenance=provenance,
    )


def provenance_complete(fin: CompanyFinancials) -> bool:
    """True when every populated numeric field has a non-empty span."""
    for period in fin.periods:
        for name in NUMERIC_FIELDS:
            if getattr(period, name) is None:
                continue
            span = fin.provenance.get(f"{period.period}.{name}")
            if span is None or span.end <= span.start:
                return False
    return True
