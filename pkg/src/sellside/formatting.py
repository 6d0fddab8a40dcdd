"""Number display rules shared by prompts, report rendering, and the fact audit.

All user-facing numbers flow through these helpers so that a value quoted in
narrative text, a table cell, and the audit comparison all round the same way:
percents at 1 decimal place, currency in millions at 1 decimal place,
multiples at 1 decimal place, per-share prices at 2 decimal places.
Table serialization uses 6 significant digits for fractions and
integer-or-2dp for currency so that goldens are byte-stable.
"""

from __future__ import annotations

MILLION = 1e6


def fmt_percent(fraction: float) -> str:
    """Render a fraction as a percent with one decimal: 0.2815 -> '28.2%'."""
    return f"{fraction * 100:.1f}%"


def fmt_currency(amount: float) -> str:
    """Render a base-unit currency amount in millions: 20426e6 -> '$20,426.0M'."""
    return f"${amount / MILLION:,.1f}M"


def fmt_price(per_share: float) -> str:
    """Render a per-share price: 119.2843 -> '$119.28'."""
    return f"${per_share:,.2f}"


def fmt_multiple(value: float) -> str:
    """Render a valuation multiple: 10.04 -> '10.0x'."""
    return f"{value:.1f}x"


def fmt_table_fraction(value: float) -> str:
    """Serialize a fraction/percent/multiple cell to 6 significant digits."""
    return f"{value:.6g}"


def fmt_table_currency(value: float) -> str:
    """Serialize a currency cell as an integer when whole, else 2 decimals."""
    if value == int(value):
        return f"{value:.0f}"
    return f"{value:.2f}"
