from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sellside.errors import (
    DivisionByZero,
    MissingFinancialField,
    MissingProjectionBasis,
    NonConvergent,
    ZeroCapital,
    ZeroPrice,
    ZeroShares,
)
from sellside.metrics import build_metric_table
from sellside.valuation import (
    DcfAssumptions,
    Rating,
    RatingThresholds,
    WaccInputs,
    assign_rating,
    dcf_enterprise_value,
    derive_assumptions,
    project_financials,
    roic,
    summarize_valuation,
    target_price,
    wacc,
)
from tests.conftest import make_financials

REL = 1e-12


def flat_assumptions(n=5, growth=0.0, r=0.10, g=0.0, margin=0.4):
    return DcfAssumptions(
        horizon_years=n,
        revenue_growth_path=(growth,) * n,
        margin_path=(margin,) * n,
        terminal_growth=g,
        discount_rate=r,
    )


# ── roic / wacc ──────────────────────────────────────────────────────────


@pytest.mark.parametrize(("nopat", "capital", "expected"), [(0, 100, 0.0), (12, 100, 0.12)])
def test_roic(nopat, capital, expected):
    assert roic(nopat, capital) == pytest.approx(expected, rel=REL)


def test_roic_zero_capital():
    with pytest.raises(DivisionByZero):
        roic(12, 0)


def test_wacc_examples():
    all_equity = WaccInputs(100, 0, 0.10, 0.99, 0.5)
    assert wacc(all_equity) == pytest.approx(0.10, rel=REL)
    blended = WaccInputs(600, 400, 0.12, 0.05, 0.25)
    assert wacc(blended) == pytest.approx(0.087, rel=REL)
    all_debt = WaccInputs(0, 100, 0.50, 0.06, 0.30)
    assert wacc(all_debt) == pytest.approx(0.042, rel=REL)


def test_wacc_zero_capital():
    with pytest.raises(ZeroCapital):
        wacc(WaccInputs(0, 0, 0.1, 0.05, 0.25))


@given(
    equity=st.floats(min_value=0, max_value=1e12),
    debt=st.floats(min_value=0, max_value=1e12),
    cost_of_equity=st.floats(min_value=0, max_value=0.5),
    cost_of_debt=st.floats(min_value=0, max_value=0.5),
    tax=st.floats(min_value=0, max_value=1),
)
def test_wacc_is_convex_combination(equity, debt, cost_of_equity, cost_of_debt, tax):
    if equity + debt == 0:
        return
    value = wacc(WaccInputs(equity, debt, cost_of_equity, cost_of_debt, tax))
    low = min(cost_of_equity, cost_of_debt * (1 - tax))
    high = max(cost_of_equity, cost_of_debt * (1 - tax))
    assert low - 1e-12 <= value <= high + 1e-12


# ── projections ──────────────────────────────────────────────────────────


def test_project_financials_year_one_applies_rules():
    fin = make_financials([("FY1", 100.0, 60.0, 15.0), ("FY2", 110.0, 65.0, 16.0)])
    table = build_metric_table(fin)
    projected = project_financials(fin, table, 1)
    assert len(projected) == 1
    # growth_prev = 0.10, so year one grows at 0.11
    assert projected[0].revenue == pytest.approx(110.0 * 1.11, rel=REL)
    assert projected[0].period == "FY3"


def test_project_financials_horizon_bounds():
    fin = make_financials([("FY1", 100.0, 60.0, 15.0), ("FY2", 110.0, 65.0, 16.0)])
    table = build_metric_table(fin)
    with pytest.raises(ValueError):
        project_financials(fin, table, 0)
    with pytest.raises(ValueError):
        project_financials(fin, table, 11)


def test_project_financials_needs_projection_basis():
    fin = make_financials([("FY1", 100.0, 60.0, 15.0)])
    table = build_metric_table(fin)
    with pytest.raises(MissingProjectionBasis):
        project_financials(fin, table, 3)


def test_projected_sga_margin_held_constant():
    fin = make_financials([("FY1", 100.0, 60.0, 15.0), ("FY2", 110.0, 65.0, 16.0)])
    table = build_metric_table(fin)
    sga_rate = 16.0 / 110.0
    for period in project_financials(fin, table, 6):
        assert period.sga / period.revenue == pytest.approx(sga_rate, rel=REL)


def test_projected_margin_held_constant():
    fin = make_financials([("FY1", 100.0, 60.0, 15.0), ("FY2", 110.0, 65.0, 16.0)])
    table = build_metric_table(fin)
    margin = table.projections["contribution_margin_projection"].value
    for period in project_financials(fin, table, 4):
        profit = period.revenue - period.operating_expense
        assert profit / period.revenue == pytest.approx(margin, rel=REL)


# ── dcf ──────────────────────────────────────────────────────────────────


def test_dcf_perpetuity_identity_exact_example():
    assert dcf_enterprise_value(100.0, flat_assumptions(n=5, r=0.10)) == pytest.approx(
        1000.0, rel=1e-9
    )


@pytest.mark.parametrize("n", range(1, 11))
def test_dcf_perpetuity_identity_all_horizons(n):
    value = dcf_enterprise_value(100.0, flat_assumptions(n=n, r=0.08))
    assert value == pytest.approx(100.0 / 0.08, rel=1e-9)


def test_dcf_against_spreadsheet_style_oracle():
    assumptions = DcfAssumptions(
        horizon_years=3,
        revenue_growth_path=(0.05, 0.05, 0.05),
        margin_path=(0.4, 0.4, 0.4),
        terminal_growth=0.02,
        discount_rate=0.10,
    )
    # independent year-by-year recomputation
    cash_flows = [100.0 * 1.05, 100.0 * 1.05**2, 100.0 * 1.05**3]
    expected = sum(cf / 1.10**t for t, cf in enumerate(cash_flows, start=1))
    expected += (cash_flows[-1] * 1.02 / (0.10 - 0.02)) / 1.10**3
    assert dcf_enterprise_value(100.0, assumptions) == pytest.approx(expected, rel=1e-9)


def test_dcf_non_convergent():
    with pytest.raises(NonConvergent):
        flat_assumptions(r=0.02, g=0.03)


valid_assumptions = st.builds(
    lambda n, growth, r, spread: DcfAssumptions(
        horizon_years=n,
        revenue_growth_path=(growth,) * n,
        margin_path=(0.4,) * n,
        terminal_growth=r - spread,
        discount_rate=r,
    ),
    n=st.integers(min_value=1, max_value=10),
    growth=st.floats(min_value=-0.2, max_value=0.3),
    r=st.floats(min_value=0.03, max_value=0.3),
    spread=st.floats(min_value=0.01, max_value=0.2),
)


@settings(max_examples=80, deadline=None)
@given(base=st.floats(min_value=1.0, max_value=1e9), assumptions=valid_assumptions)
def test_dcf_loop_oracle_equivalence(base, assumptions):
    cash = base
    flows = []
    for growth in assumptions.revenue_growth_path:
        cash = cash * (1 + growth)
        flows.append(cash)
    r = assumptions.discount_rate
    expected = sum(cf / (1 + r) ** t for t, cf in enumerate(flows, start=1))
    terminal = flows[-1] * (1 + assumptions.terminal_growth) / (r - assumptions.terminal_growth)
    expected += terminal / (1 + r) ** assumptions.horizon_years
    assert dcf_enterprise_value(base, assumptions) == pytest.approx(expected, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(base=st.floats(min_value=1.0, max_value=1e9), assumptions=valid_assumptions)
def test_dcf_monotonicity(base, assumptions):
    value = dcf_enterprise_value(base, assumptions)
    assert dcf_enterprise_value(base * 1.1, assumptions) > value
    higher_g = DcfAssumptions(
        horizon_years=assumptions.horizon_years,
        revenue_growth_path=assumptions.revenue_growth_path,
        margin_path=assumptions.margin_path,
        terminal_growth=assumptions.terminal_growth + 0.005,
        discount_rate=assumptions.discount_rate,
    )
    assert dcf_enterprise_value(base, higher_g) > value
    higher_r = DcfAssumptions(
        horizon_years=assumptions.horizon_years,
        revenue_growth_path=assumptions.revenue_growth_path,
        margin_path=assumptions.margin_path,
        terminal_growth=assumptions.terminal_growth,
        discount_rate=assumptions.discount_rate + 0.01,
    )
    assert dcf_enterprise_value(base, higher_r) < value


# ── target price / rating ────────────────────────────────────────────────


def test_target_price_examples():
    assert target_price(1000, 0, 10).price == pytest.approx(100.0, rel=REL)
    assert target_price(1000, 1000, 10).price == 0.0
    floored = target_price(1000, 1200, 10)
    assert floored.price == 0.0
    assert floored.negative_equity is True


def test_target_price_zero_shares():
    with pytest.raises(ZeroShares):
        target_price(1000, 0, 0)


@pytest.mark.parametrize(
    ("target", "current", "expected"),
    [
        (110, 100, Rating.BUY),  # boundary is Buy-inclusive
        (100, 100, Rating.HOLD),
        (89, 100, Rating.SELL),
        (90, 100, Rating.SELL),
    ],
)
def test_assign_rating(target, current, expected):
    assert assign_rating(target, current) is expected


def test_assign_rating_zero_price():
    with pytest.raises(ZeroPrice):
        assign_rating(100, 0)


def test_assign_rating_custom_thresholds():
    thresholds = RatingThresholds(buy=1.25, sell=0.80)
    assert assign_rating(120, 100, thresholds) is Rating.HOLD
    assert assign_rating(125, 100, thresholds) is Rating.BUY


@given(
    ratio=st.floats(min_value=0.2, max_value=3.0),
    current=st.floats(min_value=1.0, max_value=1e4),
    c=st.floats(min_value=1e-3, max_value=1e3),
)
def test_assign_rating_scale_invariant(ratio, current, c):
    # stay off the exact threshold boundaries, where a final ulp can differ
    if min(abs(ratio - 1.10), abs(ratio - 0.90)) < 1e-6:
        return
    target = current * ratio
    assert assign_rating(target, current) is assign_rating(c * target, c * current)


# ── summary assembly ─────────────────────────────────────────────────────


def fixture_fin():
    return make_financials(
        [("FY2022", 19698e6, 12111e6, 1938e6), ("FY2023", 20426e6, 12606e6, 2069e6)],
        ticker="WM",
        net_debt=15000e6,
        shares_outstanding=402e6,
        tax_rate=0.25,
        invested_capital=22000e6,
        nopat=2900e6,
    )


def test_summarize_valuation_end_to_end():
    fin = fixture_fin()
    table = build_metric_table(fin)
    cost = wacc(WaccInputs(64000e6, 16000e6, 0.095, 0.045, 0.25))
    assert cost == pytest.approx(0.08275, rel=REL)
    assumptions = derive_assumptions(
        table, horizon_years=5, terminal_growth=0.02, discount_rate=cost, capital_intensity=0.6
    )
    summary = summarize_valuation(fin, table, assumptions, cost, current_price=105.0)

    # independent recomputation of the whole chain
    ebitda_latest = (20426e6 - 12606e6) - 2069e6
    base = 0.6 * ebitda_latest
    growth = (20426e6 - 19698e6) / 19698e6 + 0.01
    flows, cash = [], base
    for _ in range(5):
        cash *= 1 + growth
        flows.append(cash)
    expected_ev = sum(cf / (1 + cost) ** t for t, cf in enumerate(flows, start=1))
    expected_ev += (flows[-1] * 1.02 / (cost - 0.02)) / (1 + cost) ** 5
    assert summary.enterprise_value == pytest.approx(expected_ev, rel=1e-9)
    assert summary.target_price == pytest.approx((expected_ev - 15000e6) / 402e6, rel=1e-9)
    assert summary.rating is assign_rating(summary.target_price, 105.0)
    assert summary.roic == pytest.approx(2900e6 / 22000e6, rel=REL)
    assert summary.method_notes  # every assumption echoed
    assert any("discount rate" in note for note in summary.method_notes)


def test_summarize_valuation_requires_optional_fields():
    fin = make_financials(
        [("FY2022", 100.0, 60.0, 15.0), ("FY2023", 110.0, 65.0, 16.0)]
    )
    table = build_metric_table(fin)
    assumptions = derive_assumptions(table, 3, 0.02, 0.10)
    with pytest.raises(MissingFinancialField):
        summarize_valuation(fin, table, assumptions, 0.10, current_price=10.0)


def test_wacc_invalid_inputs_rejected():
    with pytest.raises(ValueError):
        WaccInputs(100, 0, -0.1, 0.05, 0.25)
    with pytest.raises(ValueError):
        WaccInputs(100, 0, 0.1, 0.05, 1.5)
    with pytest.raises(ValueError):
        WaccInputs(100, 0, 0.1, math.inf, 0.25)
