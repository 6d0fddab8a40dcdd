"""Capital-cost, projection, and discounted-cash-flow machinery.

The valuation chain: project the statement lines forward with the metric
layer's projection rules, convert EBITDA to free cash flow through a single
documented conversion factor, discount at the weighted average cost of
capital with a Gordon-growth terminal value, bridge enterprise value to a
per-share target price, and map target/current into a Buy/Hold/Sell rating
with configurable thresholds (Buy at >= 1.10x current, Sell at <= 0.90x,
boundaries inclusive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from sellside.errors import (
    DivisionByZero,
    MissingFinancialField,
    MissingProjectionBasis,
    NonConvergent,
    ZeroCapital,
    ZeroPrice,
    ZeroShares,
)
from sellside.formatting import fmt_table_fraction
from sellside.ingestion.types import CompanyFinancials, FinancialPeriod
from sellside.metrics import MetricTable
from sellside.periods import next_period_label


class Rating(str, Enum):
    BUY = "Buy"
    HOLD = "Hold"
    SELL = "Sell"


@dataclass(frozen=True)
class WaccInputs:
    equity_value: float
    debt_value: float
    cost_of_equity: float
    cost_of_debt: float
    tax_rate: float

    def __post_init__(self) -> None:
        for name in ("cost_of_equity", "cost_of_debt"):
            rate = getattr(self, name)
            if not math.isfinite(rate) or rate < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {rate}")
        if not 0.0 <= self.tax_rate <= 1.0:
            raise ValueError(f"tax_rate outside [0, 1]: {self.tax_rate}")

    def to_dict(self) -> dict:
        return {
            "equity_value": self.equity_value,
            "debt_value": self.debt_value,
            "cost_of_equity": self.cost_of_equity,
            "cost_of_debt": self.cost_of_debt,
            "tax_rate": self.tax_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> WaccInputs:
        return cls(**d)


@dataclass(frozen=True)
class DcfAssumptions:
    horizon_years: int
    revenue_growth_path: tuple[float, ...]
    margin_path: tuple[float, ...]
    terminal_growth: float
    discount_rate: float
    capital_intensity: float = 0.6

    def __post_init__(self) -> None:
        if not 1 <= self.horizon_years <= 10:
            raise ValueError(f"horizon_years must be in [1, 10], got {self.horizon_years}")
        object.__setattr__(self, "revenue_growth_path", tuple(self.revenue_growth_path))
        object.__setattr__(self, "margin_path", tuple(self.margin_path))
        for name in ("revenue_growth_path", "margin_path"):
            path = getattr(self, name)
            if len(path) != self.horizon_years:
                raise ValueError(f"{name} length {len(path)} != horizon {self.horizon_years}")
            if not all(math.isfinite(x) for x in path):
                raise ValueError(f"{name} contains non-finite values")
        if self.discount_rate <= self.terminal_growth:
            raise NonConvergent(
                f"discount rate {self.discount_rate} must exceed terminal growth {self.terminal_growth}"
            )

    def to_dict(self) -> dict:
        return {
            "horizon_years": self.horizon_years,
            "revenue_growth_path": list(self.revenue_growth_path),
            "margin_path": list(self.margin_path),
            "terminal_growth": self.terminal_growth,
            "discount_rate": self.discount_rate,
            "capital_intensity": self.capital_intensity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> DcfAssumptions:
        return cls(
            horizon_years=d["horizon_years"],
            revenue_growth_path=tuple(d["revenue_growth_path"]),
            margin_path=tuple(d["margin_path"]),
            terminal_growth=d["terminal_growth"],
            discount_rate=d["discount_rate"],
            capital_intensity=d.get("capital_intensity", 0.6),
        )


@dataclass(frozen=True)
class RatingThresholds:
    buy: float = 1.10
    sell: float = 0.90

    def __post_init__(self) -> None:
        if not 0 < self.sell < self.buy:
            raise ValueError(f"need 0 < sell < buy, got sell={self.sell}, buy={self.buy}")


@dataclass(frozen=True)
class TargetPrice:
    price: float
    negative_equity: bool = False


@dataclass
class ValuationSummary:
    target_price: float
    current_price: float
    rating: Rating
    enterprise_value: float
    equity_value: float
    wacc: float
    roic: float | None = None
    method_notes: list[str] = field(default_factory=list)

    def numeric_sources(self) -> list[float]:
        """Every number the summary exposes, for fact auditing."""
        values = [
            self.target_price,
            self.current_price,
            self.enterprise_value,
            self.equity_value,
            self.wacc,
        ]
        if self.roic is not None:
            values.append(self.roic)
        return values

    def to_dict(self) -> dict:
        return {
            "target_price": self.target_price,
            "current_price": self.current_price,
            "rating": self.rating.value,
            "enterprise_value": self.enterprise_value,
            "equity_value": self.equity_value,
            "wacc": self.wacc,
            "roic": self.roic,
            "method_notes": list(self.method_notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ValuationSummary:
        return cls(
            target_price=d["target_price"],
            current_price=d["current_price"],
            rating=Rating(d["rating"]),
            enterprise_value=d["enterprise_value"],
            equity_value=d["equity_value"],
            wacc=d["wacc"],
            roic=d.get("roic"),
            method_notes=list(d.get("method_notes", [])),
        )


# ── operations ───────────────────────────────────────────────────────────


def roic(nopat: float, invested_capital: float) -> float:
    if invested_capital == 0:
        raise DivisionByZero("ROIC needs non-zero invested capital")
    return nopat / invested_capital


def wacc(inputs: WaccInputs) -> float:
    """After-tax weighted average cost of capital."""
    total = inputs.equity_value + inputs.debt_value
    if total == 0:
        raise ZeroCapital("equity plus debt is zero")
    equity_weight = inputs.equity_value / total
    debt_weight = inputs.debt_value / total
    return equity_weight * inputs.cost_of_equity + debt_weight * inputs.cost_of_debt * (
        1.0 - inputs.tax_rate
    )


def project_financials(
    fin: CompanyFinancials, table: MetricTable, horizon_years: int
) -> list[FinancialPeriod]:
    """Project the statement lines ``horizon_years`` forward.

    Year 1 applies the projection rows exactly (prior growth + 0.01, prior
    margin + 0.005); later years hold the year-1 growth and margin constant.
    The SG&A margin stays at its latest historical value throughout, and
    operating expense is recovered from the projected contribution margin.
    """
    if not 1 <= horizon_years <= 10:
        raise ValueError(f"horizon_years must be in [1, 10], got {horizon_years}")
    growth_row = table.projections.get("revenue_growth_projection")
    margin_row = table.projections.get("contribution_margin_projection")
    if growth_row is None or margin_row is None:
        raise MissingProjectionBasis(
            f"{fin.ticker}: need at least two historical periods with positive revenue"
        )
    latest = fin.latest
    sga_rate = latest.sga / latest.revenue
    growth, margin = growth_row.value, margin_row.value

    projected: list[FinancialPeriod] = []
    revenue = latest.revenue
    label = latest.period
    for _ in range(horizon_years):
        revenue = revenue * (1.0 + growth)
        label = next_period_label(label)
        projected.append(
            FinancialPeriod(
                period=label,
                revenue=revenue,
                operating_expense=revenue * (1.0 - margin),
                sga=revenue * sga_rate,
            )
        )
    return projected


def dcf_enterprise_value(base_fcf: float, assumptions: DcfAssumptions) -> float:
    """Present value of the projected cash flows plus Gordon terminal value."""
    if not math.isfinite(base_fcf):
        raise ValueError(f"base_fcf must be finite, got {base_fcf}")
    rate = assumptions.discount_rate
    cash = base_fcf
    discount = 1.0
    present_value = 0.0
    for growth in assumptions.revenue_growth_path:
        cash *= 1.0 + growth
        discount *= 1.0 + rate
        present_value += cash / discount
    terminal = cash * (1.0 + assumptions.terminal_growth) / (rate - assumptions.terminal_growth)
    return present_value + terminal / discount


def target_price(enterprise_value: float, net_debt: float, shares: float) -> TargetPrice:
    """Per-share value of the equity, floored at zero when debt exceeds EV."""
    if shares <= 0:
        raise ZeroShares(f"shares must be > 0, got {shares}")
    equity = enterprise_value - net_debt
    if equity < 0:
        return TargetPrice(price=0.0, negative_equity=True)
    return TargetPrice(price=equity / shares)


def assign_rating(
    target: float, current: float, thresholds: RatingThresholds = RatingThresholds()
) -> Rating:
    if current <= 0:
        raise ZeroPrice(f"current price must be > 0, got {current}")
    ratio = target / current
    if ratio >= thresholds.buy:
        return Rating.BUY
    if ratio <= thresholds.sell:
        return Rating.SELL
    return Rating.HOLD


# ── summary assembly ─────────────────────────────────────────────────────


def derive_assumptions(
    table: MetricTable,
    horizon_years: int,
    terminal_growth: float,
    discount_rate: float,
    capital_intensity: float = 0.6,
) -> DcfAssumptions:
    """Constant-rate paths seeded from the table's projection rows."""
    growth_row = table.projections.get("revenue_growth_projection")
    margin_row = table.projections.get("contribution_margin_projection")
    if growth_row is None or margin_row is None:
        raise MissingProjectionBasis(
            f"{table.ticker}: metric table has no projection rows to seed the paths"
        )
    return DcfAssumptions(
        horizon_years=horizon_years,
        revenue_growth_path=(growth_row.value,) * horizon_years,
        margin_path=(margin_row.value,) * horizon_years,
        terminal_growth=terminal_growth,
        discount_rate=discount_rate,
        capital_intensity=capital_intensity,
    )


def summarize_valuation(
    fin: CompanyFinancials,
    table: MetricTable,
    assumptions: DcfAssumptions,
    wacc_value: float,
    current_price: float,
    thresholds: RatingThresholds = RatingThresholds(),
) -> ValuationSummary:
    """Run the DCF end to end and echo every assumption into the notes.

    Optional statement fields the bridge needs (net debt, share count) must
    be present on the latest period; absent fields raise instead of being
    guessed.
    """
    latest = fin.latest
    if latest.net_debt is None:
        raise MissingFinancialField("net_debt", latest.period)
    if latest.shares_outstanding is None:
        raise MissingFinancialField("shares_outstanding", latest.period)

    ebitda_row = table.get("ebitda", latest.period)
    if ebitda_row is None:
        raise MissingFinancialField("ebitda", latest.period)
    base_fcf = assumptions.capital_intensity * ebitda_row.value

    enterprise_value = dcf_enterprise_value(base_fcf, assumptions)
    per_share = target_price(enterprise_value, latest.net_debt, latest.shares_outstanding)
    rating = assign_rating(per_share.price, current_price, thresholds)

    roic_value: float | None = None
    if latest.nopat is not None and latest.invested_capital is not None:
        roic_value = roic(latest.nopat, latest.invested_capital)

    notes = [
        f"discount rate: {fmt_table_fraction(assumptions.discount_rate)}",
        f"cost of capital (weighted, after tax): {fmt_table_fraction(wacc_value)}",
        f"terminal growth: {fmt_table_fraction(assumptions.terminal_growth)}",
        f"fcf conversion of ebitda: {fmt_table_fraction(assumptions.capital_intensity)}",
        f"horizon years: {assumptions.horizon_years}",
        f"year-1 revenue growth: {fmt_table_fraction(assumptions.revenue_growth_path[0])}"
        " (prior growth plus 0.01, held constant)",
        f"year-1 contribution margin: {fmt_table_fraction(assumptions.margin_path[0])}"
        " (prior margin plus 0.005, held constant)",
        f"buy threshold: {fmt_table_fraction(thresholds.buy)} of current price",
        f"sell threshold: {fmt_table_fraction(thresholds.sell)} of current price",
    ]
    if per_share.negative_equity:
        notes.append("net debt exceeds enterprise value; target price floored at zero")

    return ValuationSummary(
        target_price=per_share.price,
        current_price=current_price,
        rating=rating,
        enterprise_value=enterprise_value,
        equity_value=enterprise_value - latest.net_debt,
        wacc=wacc_value,
        roic=roic_value,
        method_notes=notes,
    )
