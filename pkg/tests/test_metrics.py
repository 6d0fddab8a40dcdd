from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sellside.errors import DivisionByZero, NegativePrevious, NonPositiveInput, ZeroYears
from sellside.metrics import (
    MetricValue,
    Unit,
    build_metric_table,
    cagr,
    contribution_margin,
    contribution_margin_projection,
    contribution_profit,
    ebitda,
    ebitda_margin,
    enterprise_multiple,
    revenue_growth,
    revenue_growth_projection,
    sga_margin,
)
from tests.conftest import make_financials

REL = 1e-12

amounts = st.floats(min_value=1.0, max_value=1e12, allow_nan=False, allow_infinity=False)
# zero or a normal-range positive float; subnormals would make even
# power-of-two scaling inexact
small_amounts = st.just(0.0) | st.floats(
    min_value=1e-6, max_value=1e12, allow_nan=False, allow_infinity=False
)


# ── scalar formulas against hand oracles ─────────────────────────────────


@pytest.mark.parametrize(
    ("current", "previous", "expected"),
    [(100, 100, 0.0), (110, 100, 0.10), (90, 100, -0.10)],
)
def test_revenue_growth(current, previous, expected):
    assert revenue_growth(current, previous) == pytest.approx(expected, rel=REL)


def test_revenue_growth_errors():
    with pytest.raises(DivisionByZero):
        revenue_growth(100, 0)
    with pytest.raises(NegativePrevious):
        revenue_growth(100, -5)


@pytest.mark.parametrize(
    ("previous", "expected"), [(0.0, 0.01), (0.10, 0.11), (-0.05, -0.04)]
)
def test_revenue_growth_projection(previous, expected):
    assert revenue_growth_projection(previous) == pytest.approx(expected, rel=REL)
    # additive percentage points, exactly
    assert revenue_growth_projection(previous) == previous + 0.01


@pytest.mark.parametrize(
    ("revenue", "opex", "expected"), [(100, 100, 0), (100, 60, 40), (50, 60, -10)]
)
def test_contribution_profit(revenue, opex, expected):
    assert contribution_profit(revenue, opex) == expected


@pytest.mark.parametrize(("profit", "revenue", "expected"), [(0, 100, 0.0), (40, 100, 0.40)])
def test_contribution_margin(profit, revenue, expected):
    assert contribution_margin(profit, revenue) == pytest.approx(expected, rel=REL)


def test_contribution_margin_zero_revenue():
    with pytest.raises(DivisionByZero):
        contribution_margin(40, 0)


@pytest.mark.parametrize(
    ("previous", "expected"), [(0.0, 0.005), (0.40, 0.405), (0.995, 1.000)]
)
def test_contribution_margin_projection(previous, expected):
    assert contribution_margin_projection(previous) == pytest.approx(expected, rel=REL)
    assert contribution_margin_projection(previous) == previous + 0.005


@pytest.mark.parametrize(("sga", "revenue", "expected"), [(0, 100, 0.0), (15, 100, 0.15)])
def test_sga_margin(sga, revenue, expected):
    assert sga_margin(sga, revenue) == pytest.approx(expected, rel=REL)


def test_sga_margin_zero_revenue():
    with pytest.raises(DivisionByZero):
        sga_margin(15, 0)


@pytest.mark.parametrize(("profit", "sga", "expected"), [(40, 40, 0), (40, 15, 25), (10, 15, -5)])
def test_ebitda(profit, sga, expected):
    assert ebitda(profit, sga) == expected


@pytest.mark.parametrize(("earnings", "revenue", "expected"), [(0, 100, 0.0), (25, 100, 0.25)])
def test_ebitda_margin(earnings, revenue, expected):
    assert ebitda_margin(earnings, revenue) == pytest.approx(expected, rel=REL)


def test_ebitda_margin_zero_revenue():
    with pytest.raises(DivisionByZero):
        ebitda_margin(25, 0)


def test_cagr_identity_and_perfect_square():
    assert cagr(100, 100, 5) == 0.0
    assert cagr(121, 100, 2) == 10.0


def test_cagr_cube_oracle():
    # 2^(1/3) - 1, hand-computed to more than 6 significant digits
    assert cagr(200, 100, 3) == pytest.approx(25.9921049894873, rel=1e-12)


def test_cagr_errors():
    with pytest.raises(ZeroYears):
        cagr(100, 100, 0)
    with pytest.raises(NonPositiveInput):
        cagr(-1, 100, 2)
    with pytest.raises(NonPositiveInput):
        cagr(100, 0, 2)


@pytest.mark.parametrize(
    ("ev", "earnings", "value", "nm"),
    [(500, 500, 1.0, False), (500, 50, 10.0, False), (500, -50, -10.0, True)],
)
def test_enterprise_multiple(ev, earnings, value, nm):
    result = enterprise_multiple(ev, earnings)
    assert result.value == pytest.approx(value, rel=REL)
    assert result.not_meaningful is nm


def test_enterprise_multiple_zero():
    with pytest.raises(DivisionByZero):
        enterprise_multiple(500, 0)


# ── properties ───────────────────────────────────────────────────────────


@given(revenue=amounts, opex=small_amounts, sga=small_amounts)
def test_composition_identity(revenue, opex, sga):
    # ebitda == revenue - opex - sga by substitution, exactly (same float ops)
    assert ebitda(contribution_profit(revenue, opex), sga) == (revenue - opex) - sga


@given(
    revenue=amounts,
    opex=small_amounts,
    sga=small_amounts,
    exponent=st.integers(min_value=-10, max_value=10),
)
def test_scale_invariance_power_of_two(revenue, opex, sga, exponent):
    # Scaling by 2^k is exact in binary floating point: fractions unchanged
    # bit-for-bit, currency metrics scaled by exactly c.
    c = 2.0**exponent
    assert contribution_profit(c * revenue, c * opex) == c * contribution_profit(revenue, opex)
    assert contribution_margin(contribution_profit(c * revenue, c * opex), c * revenue) == (
        contribution_margin(contribution_profit(revenue, opex), revenue)
    )
    assert sga_margin(c * sga, c * revenue) == sga_margin(sga, revenue)


@given(
    revenue=amounts,
    opex=small_amounts,
    sga=small_amounts,
    c=st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False),
)
def test_scale_invariance_general(revenue, opex, sga, c):
    profit = contribution_profit(revenue, opex)
    scaled_profit = contribution_profit(c * revenue, c * opex)
    assert scaled_profit == pytest.approx(c * profit, rel=REL, abs=1e-6 * c)
    assert contribution_margin(scaled_profit, c * revenue) == pytest.approx(
        contribution_margin(profit, revenue), rel=REL, abs=1e-12
    )
    assert sga_margin(c * sga, c * revenue) == pytest.approx(
        sga_margin(sga, revenue), rel=REL, abs=1e-12
    )


@given(x=amounts, years=st.integers(min_value=1, max_value=50))
def test_cagr_self_is_zero(x, years):
    assert cagr(x, x, years) == 0.0


@given(
    beginning=amounts,
    ratio=st.floats(min_value=1e-3, max_value=1e3, allow_nan=False, allow_infinity=False),
    years=st.integers(min_value=1, max_value=30),
)
def test_cagr_inverse_reconstruction(beginning, ratio, years):
    # Ratio kept within a realistic band: for ending/beginning near zero the
    # 1 + g term cancels catastrophically and no double-precision route can
    # reconstruct to 1e-9.
    ending = beginning * ratio
    rate = cagr(ending, beginning, years)
    assert beginning * (1.0 + rate / 100.0) ** years == pytest.approx(ending, rel=1e-9)


# ── metric table ─────────────────────────────────────────────────────────


def two_period_fin():
    return make_financials([("FY1", 100.0, 60.0, 15.0), ("FY2", 110.0, 65.0, 16.0)])


def test_build_table_two_periods_oracle():
    table = build_metric_table(two_period_fin())
    assert table.get("revenue_growth", "FY2").value == pytest.approx(0.10, rel=REL)
    assert table.get("ebitda", "FY2").value == pytest.approx(29.0, rel=REL)
    assert table.get("ebitda_margin", "FY2").value == pytest.approx(29.0 / 110.0, rel=REL)
    assert table.get("contribution_profit", "FY1").value == pytest.approx(40.0, rel=REL)
    assert table.get("contribution_margin", "FY1").value == pytest.approx(0.40, rel=REL)
    assert table.get("sga_margin", "FY1").value == pytest.approx(0.15, rel=REL)
    assert table.get("cagr", "FY2").value == pytest.approx(10.0, rel=REL)
    proj = table.projections["revenue_growth_projection"]
    assert proj.value == pytest.approx(0.11, rel=REL)
    assert proj.period == "FY3"
    margin_proj = table.projections["contribution_margin_projection"]
    assert margin_proj.value == pytest.approx(45.0 / 110.0 + 0.005, rel=REL)


def test_build_table_single_period():
    table = build_metric_table(make_financials([("FY1", 100.0, 60.0, 15.0)]))
    assert table.get("contribution_profit", "FY1") is not None
    assert table.get("ebitda", "FY1") is not None
    assert table.get("ebitda_margin", "FY1") is not None
    assert table.get("revenue_growth", "FY1") is None
    assert not table.projections
    assert table.get("cagr", "FY1") is None


def test_build_table_zero_revenue_period():
    fin = make_financials([("FY1", 0.0, 5.0, 2.0), ("FY2", 100.0, 60.0, 15.0)])
    table = build_metric_table(fin)
    # margins need revenue > 0; profit rows still present
    assert table.get("contribution_margin", "FY1") is None
    assert table.get("sga_margin", "FY1") is None
    assert table.get("ebitda_margin", "FY1") is None
    assert table.get("contribution_profit", "FY1") is not None
    # growth into FY2 needs a positive previous revenue
    assert table.get("revenue_growth", "FY2") is None
    assert table.get("contribution_margin", "FY2") is not None


def test_build_table_deterministic_and_serialization_stable():
    a = build_metric_table(two_period_fin())
    b = build_metric_table(two_period_fin())
    assert a.serialize() == b.serialize()
    assert a.to_dict() == b.to_dict()
    lines = a.serialize().splitlines()
    assert lines[0] == "metric\tperiod\tvalue\tunit"
    assert all(len(line.split("\t")) == 4 for line in lines)


def test_duplicate_cell_rejected():
    table = build_metric_table(two_period_fin())
    with pytest.raises(ValueError):
        table.add(MetricValue("ebitda", "FY2", 1.0, Unit.CURRENCY))


@st.composite
def histories(draw, min_periods=2, max_periods=6):
    n = draw(st.integers(min_value=min_periods, max_value=max_periods))
    rows = []
    for i in range(n):
        revenue = draw(st.floats(min_value=10.0, max_value=1e9))
        opex = draw(st.floats(min_value=0.0, max_value=revenue))
        sga = draw(st.floats(min_value=0.0, max_value=revenue))
        rows.append((f"FY{2000 + i}", revenue, opex, sga))
    return rows


@settings(max_examples=60, deadline=None)
@given(rows=histories())
def test_build_table_matches_straight_formula_recomputation(rows):
    fin = make_financials(rows)
    table = build_metric_table(fin)
    for i, (label, revenue, opex, sga) in enumerate(rows):
        profit = revenue - opex
        assert table.get("contribution_profit", label).value == pytest.approx(profit, rel=REL)
        assert table.get("ebitda", label).value == pytest.approx(profit - sga, rel=REL)
        assert table.get("contribution_margin", label).value == pytest.approx(
            profit / revenue, rel=REL
        )
        if i > 0:
            prev_revenue = rows[i - 1][1]
            assert table.get("revenue_growth", label).value == pytest.approx(
                (revenue - prev_revenue) / prev_revenue, rel=REL
            )
    first_revenue, last_revenue = rows[0][1], rows[-1][1]
    expected_cagr = ((last_revenue / first_revenue) ** (1.0 / (len(rows) - 1)) - 1.0) * 100.0
    assert table.get("cagr", rows[-1][0]).value == pytest.approx(expected_cagr, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(rows=histories(min_periods=3, max_periods=6))
def test_projections_use_only_latest_periods(rows):
    fin = make_financials(rows)
    # keep the last two periods, mangle everything earlier
    mangled = [(label, revenue * 3 + 7, opex, sga) for label, revenue, opex, sga in rows[:-2]]
    alt = make_financials(mangled + rows[-2:])
    a = build_metric_table(fin).projections
    b = build_metric_table(alt).projections
    assert a["revenue_growth_projection"].value == b["revenue_growth_projection"].value
    assert (
        a["contribution_margin_projection"].value == b["contribution_margin_projection"].value
    )
