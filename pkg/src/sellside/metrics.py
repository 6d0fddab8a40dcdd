"""Per-period financial metrics and next-period projections.

The closed metric vocabulary:

    revenue_growth                (current - previous) / previous
    revenue_growth_projection     previous growth + 0.01
    contribution_profit           revenue - operating expense
    contribution_margin           contribution profit / revenue
    contribution_margin_projection  previous margin + 0.005
    sga_margin                    SG&A / revenue
    ebitda                        contribution profit - SG&A
    ebitda_margin                 EBITDA / revenue
    cagr                          ((end / begin)^(1/years) - 1) * 100
    enterprise_multiple           enterprise value / EBITDA

The projection rules are additive percentage points (+0.01 growth, +0.005
margin), not multiplicative bumps. All functions are pure; callers that
violate a precondition get a typed error, never a defaulted value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from sellside.errors import (
    DivisionByZero,
    NegativePrevious,
    NonPositiveInput,
    ZeroYears,
)
from sellside.formatting import fmt_table_currency, fmt_table_fraction
from sellside.ingestion.types import CompanyFinancials
from sellside.periods import next_period_label, period_sort_key

GROWTH_PROJECTION_BUMP = 0.01
MARGIN_PROJECTION_BUMP = 0.005


class Unit(str, Enum):
    CURRENCY = "currency"
    FRACTION = "fraction"
    MULTIPLE = "multiple"
    PERCENT = "percent"


METRIC_UNITS = {
    "revenue_growth": Unit.FRACTION,
    "revenue_growth_projection": Unit.FRACTION,
    "contribution_profit": Unit.CURRENCY,
    "contribution_margin": Unit.FRACTION,
    "contribution_margin_projection": Unit.FRACTION,
    "sga_margin": Unit.FRACTION,
    "ebitda": Unit.CURRENCY,
    "ebitda_margin": Unit.FRACTION,
    "cagr": Unit.PERCENT,
    "enterprise_multiple": Unit.MULTIPLE,
}


# ── scalar formulas ──────────────────────────────────────────────────────


def revenue_growth(current: float, previous: float) -> float:
    if previous == 0:
        raise DivisionByZero("revenue growth needs a non-zero previous revenue")
    if previous < 0:
        raise NegativePrevious(f"previous revenue {previous} < 0")
    return (current - previous) / previous


def revenue_growth_projection(previous_growth: float) -> float:
    return previous_growth + GROWTH_PROJECTION_BUMP


def contribution_profit(revenue: float, operating_expense: float) -> float:
    return revenue - operating_expense


def contribution_margin(profit: float, revenue: float) -> float:
    if revenue == 0:
        raise DivisionByZero("contribution margin needs non-zero revenue")
    return profit / revenue


def contribution_margin_projection(previous_margin: float) -> float:
    return previous_margin + MARGIN_PROJECTION_BUMP


def sga_margin(sga: float, revenue: float) -> float:
    if revenue == 0:
        raise DivisionByZero("SG&A margin needs non-zero revenue")
    return sga / revenue


def ebitda(profit: float, sga: float) -> float:
    return profit - sga


def ebitda_margin(ebitda_value: float, revenue: float) -> float:
    if revenue == 0:
        raise DivisionByZero("EBITDA margin needs non-zero revenue")
    return ebitda_value / revenue


def cagr(ending_value: float, beginning_value: float, years: int) -> float:
    """Compound annual growth rate, in percent.

    Computed as (EV^(1/n) - BV^(1/n)) / BV^(1/n) * 100, algebraically equal
    to ((EV/BV)^(1/n) - 1) * 100 but exact for clean ratios like
    cagr(121, 100, 2) == 10.0.
    """
    if years < 1:
        raise ZeroYears(f"years must be >= 1, got {years}")
    if ending_value <= 0 or beginning_value <= 0:
        raise NonPositiveInput(
            f"values must be > 0, got ending={ending_value}, beginning={beginning_value}"
        )
    end_root = ending_value ** (1.0 / years)
    begin_root = beginning_value ** (1.0 / years)
    return (end_root - begin_root) / begin_root * 100.0


@dataclass(frozen=True)
class EnterpriseMultiple:
    """EV/EBITDA; ``not_meaningful`` marks negative-EBITDA results ("NM")."""

    value: float
    not_meaningful: bool = False


def enterprise_multiple(enterprise_value: float, ebitda_value: float) -> EnterpriseMultiple:
    if ebitda_value == 0:
        raise DivisionByZero("enterprise multiple needs non-zero EBITDA")
    return EnterpriseMultiple(
        value=enterprise_value / ebitda_value,
        not_meaningful=ebitda_value < 0,
    )


# ── metric table ─────────────────────────────────────────────────────────


@dataclass(frozen=True)
class MetricValue:
    name: str
    period: str
    value: float
    unit: Unit

    def __post_init__(self) -> None:
        if self.name not in METRIC_UNITS:
            raise ValueError(f"unknown metric {self.name!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "period": self.period, "value": self.value, "unit": self.unit.value}

    @classmethod
    def from_dict(cls, d: dict) -> MetricValue:
        return cls(d["name"], d["period"], d["value"], Unit(d["unit"]))


@dataclass
class MetricTable:
    """Computed metric values keyed by (name, period), plus projections."""

    ticker: str
    periods: list[str] = field(default_factory=list)
    rows: dict[tuple[str, str], MetricValue] = field(default_factory=dict)
    projections: dict[str, MetricValue] = field(default_factory=dict)

    def add(self, value: MetricValue) -> None:
        key = (value.name, value.period)
        if key in self.rows:
            raise ValueError(f"duplicate metric cell {key}")
        self.rows[key] = value

    def get(self, name: str, period: str) -> MetricValue | None:
        return self.rows.get((name, period))

    def resolve(self, name: str, period: str) -> MetricValue | None:
        """Look up a cell among historical rows and projections."""
        cell = self.rows.get((name, period))
        if cell is not None:
            return cell
        projected = self.projections.get(name)
        if projected is not None and projected.period == period:
            return projected
        return None

    def values_for(self, name: str) -> list[MetricValue]:
        return [self.rows[(name, p)] for p in self.periods if (name, p) in self.rows]

    def is_empty(self) -> bool:
        return not self.rows

    def all_values(self) -> list[float]:
        return [v.value for v in self.rows.values()] + [v.value for v in self.projections.values()]

    def serialize(self) -> str:
        """Byte-stable tab-delimited rendering (metric, period, value, unit).

        Rows sort by metric name, then period order; projections follow
        historical rows. Fractions/percents/multiples print at 6 significant
        digits, currency as integer-or-2dp.
        """
        order = {p: i for i, p in enumerate(self.periods)}
        lines = ["metric\tperiod\tvalue\tunit"]
        for (name, period), cell in sorted(
            self.rows.items(), key=lambda kv: (kv[0][0], order.get(kv[0][1], 999), kv[0][1])
        ):
            lines.append(_serialize_row(name, period, cell))
        for name in sorted(self.projections):
            cell = self.projections[name]
            lines.append(_serialize_row(name, cell.period, cell))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "periods": list(self.periods),
            "rows": [v.to_dict() for _, v in sorted(self.rows.items())],
            "projections": {k: v.to_dict() for k, v in sorted(self.projections.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> MetricTable:
        table = cls(ticker=d["ticker"], periods=list(d["periods"]))
        for row in d["rows"]:
            table.add(MetricValue.from_dict(row))
        table.projections = {k: MetricValue.from_dict(v) for k, v in d["projections"].items()}
        return table


def _serialize_row(name: str, period: str, cell: MetricValue) -> str:
    if cell.unit is Unit.CURRENCY:
        rendered = fmt_table_currency(cell.value)
    else:
        rendered = fmt_table_fraction(cell.value)
    return f"{name}\t{period}\t{rendered}\t{cell.unit.value}"


def build_metric_table(fin: CompanyFinancials) -> MetricTable:
    """Compute every metric with satisfiable preconditions, per period.

    Cells whose preconditions fail (zero revenue for a margin, missing prior
    period for growth) are omitted rather than defaulted. The two projection
    rows require at least two periods and use only the latest period's
    growth and margin. Enterprise multiples need a market-derived enterprise
    value, which statement data alone cannot supply, so the valuation layer
    computes them.
    """
    periods = sorted(fin.periods, key=lambda p: period_sort_key(p.period))
    table = MetricTable(ticker=fin.ticker, periods=[p.period for p in periods])

    def put(name: str, period: str, value: float) -> None:
        table.add(MetricValue(name, period, value, METRIC_UNITS[name]))

    for i, p in enumerate(periods):
        profit = contribution_profit(p.revenue, p.operating_expense)
        put("contribution_profit", p.period, profit)
        earnings = ebitda(profit, p.sga)
        put("ebitda", p.period, earnings)
        if p.revenue > 0:
            put("contribution_margin", p.period, contribution_margin(profit, p.revenue))
            put("sga_margin", p.period, sga_margin(p.sga, p.revenue))
            put("ebitda_margin", p.period, ebitda_margin(earnings, p.revenue))
        if i > 0 and periods[i - 1].revenue > 0:
            put("revenue_growth", p.period, revenue_growth(p.revenue, periods[i - 1].revenue))

    latest = periods[-1]
    if len(periods) >= 2:
        first = periods[0]
        if first.revenue > 0 and latest.revenue > 0:
            put("cagr", latest.period, cagr(latest.revenue, first.revenue, len(periods) - 1))
        next_label = next_period_label(latest.period)
        latest_growth = table.get("revenue_growth", latest.period)
        if latest_growth is not None:
            table.projections["revenue_growth_projection"] = MetricValue(
                "revenue_growth_projection",
                next_label,
                revenue_growth_projection(latest_growth.value),
                Unit.FRACTION,
            )
        latest_margin = table.get("contribution_margin", latest.period)
        if latest_margin is not None:
            table.projections["contribution_margin_projection"] = MetricValue(
                "contribution_margin_projection",
                next_label,
                contribution_margin_projection(latest_margin.value),
                Unit.FRACTION,
            )
    return table
