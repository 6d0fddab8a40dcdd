"""Typed documents and normalized financial statements.

``RawDocument`` is the unit of ingestion; ``CompanyFinancials`` is the
normalized per-period view the rest of the engine computes from. Every
numeric statement field carries a provenance span pointing back into the
bytes of a stored document, so nothing downstream rests on invented data.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from enum import Enum

from sellside.periods import period_sort_key

# Statement fields that hold base-unit currency amounts.
CURRENCY_FIELDS = (
    "revenue",
    "operating_expense",
    "sga",
    "depreciation_amortization",
    "net_debt",
    "invested_capital",
    "nopat",
)
# All numeric statement fields, in declaration order.
NUMERIC_FIELDS = CURRENCY_FIELDS + ("shares_outstanding", "tax_rate")


class SourceKind(str, Enum):
    """Where a raw document came from."""

    SEC_FILING = "sec_filing"
    EQUITY_RESEARCH_REPORT = "equity_research_report"
    CORPORATE_RELEASE = "corporate_release"
    EARNINGS_CALL_TRANSCRIPT = "earnings_call_transcript"
    ALTERNATIVE_DATA = "alternative_data"
    FIXTURE = "fixture"


@dataclass(frozen=True)
class RawDocument:
    """One retrieved document, exactly as stored."""

    id: str
    company: str
    kind: SourceKind
    period: str
    retrieved_at: datetime
    body: bytes
    content_type: str = "text/plain"

    def __post_init__(self) -> None:
        if not self.body:
            raise ValueError(f"document {self.id!r} has an empty body")
        if self.retrieved_at.tzinfo is None:
            object.__setattr__(self, "retrieved_at", self.retrieved_at.replace(tzinfo=timezone.utc))

    def to_record(self) -> dict:
        """Metadata record (everything except the body bytes)."""
        return {
            "id": self.id,
            "company": self.company,
            "kind": self.kind.value,
            "period": self.period,
            "retrieved_at": self.retrieved_at.isoformat(),
            "content_type": self.content_type,
        }


@dataclass(frozen=True)
class SourceSpan:
    """Byte range in a stored document that a parsed value was read from."""

    doc_id: str
    start: int
    end: int
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.end <= self.start:
            raise ValueError("provenance span must be non-empty")

    def to_dict(self) -> dict:
        return {"doc_id": self.doc_id, "start": self.start, "end": self.end, "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> SourceSpan:
        return cls(d["doc_id"], d["start"], d["end"], d.get("scale", 1.0))


@dataclass(frozen=True)
class FinancialPeriod:
    """Normalized statement line items for one fiscal period (base units)."""

    period: str
    revenue: float
    operating_expense: float
    sga: float
    depreciation_amortization: float | None = None
    net_debt: float | None = None
    shares_outstanding: float | None = None
    tax_rate: float | None = None
    invested_capital: float | None = None
    nopat: float | None = None

    def __post_init__(self) -> None:
        if self.revenue < 0 or self.sga < 0 or self.operating_expense < 0:
            raise ValueError(f"period {self.period!r}: revenue, opex, and SG&A must be >= 0")
        if self.tax_rate is not None and not 0.0 <= self.tax_rate <= 1.0:
            raise ValueError(f"period {self.period!r}: tax_rate outside [0, 1]")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> FinancialPeriod:
        return cls(**d)


@dataclass
class CompanyFinancials:
    """All parsed periods for one company, sorted ascending by fiscal date.

    ``provenance`` maps ``"<period>.<field>"`` to the span the value was
    read from.
    """

    ticker: str
    company_name: str
    currency: str
    periods: list[FinancialPeriod]
    peers: list[str] = field(default_factory=list)
    provenance: dict[str, SourceSpan] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.periods:
            raise ValueError(f"{self.ticker!r}: at least one period required")
        self.periods.sort(key=lambda p: period_sort_key(p.period))
        labels = [p.period for p in self.periods]
        if len(set(labels)) != len(labels):
            raise ValueError(f"{self.ticker!r}: duplicate period labels {labels}")

    @property
    def latest(self) -> FinancialPeriod:
        return self.periods[-1]

    def period_labels(self) -> list[str]:
        return [p.period for p in self.periods]

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "company_name": self.company_name,
            "currency": self.currency,
            "periods": [p.to_dict() for p in self.periods],
            "peers": list(self.peers),
            "provenance": {k: v.to_dict() for k, v in self.provenance.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> CompanyFinancials:
        return cls(
            ticker=d["ticker"],
            company_name=d["company_name"],
            currency=d["currency"],
            periods=[FinancialPeriod.from_dict(p) for p in d["periods"]],
            peers=list(d.get("peers", [])),
            provenance={k: SourceSpan.from_dict(v) for k, v in d.get("provenance", {}).items()},
        )
