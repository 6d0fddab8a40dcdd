"""Fiscal-period label handling.

Two label shapes are understood: annual ``FY2023`` and quarterly
``Q2-2024``. Anything else sorts after the recognized labels,
lexicographically, and projects forward with a ``+1`` suffix.
"""

from __future__ import annotations

import re

_FY_RE = re.compile(r"^FY(\d+)$")
_Q_RE = re.compile(r"^Q([1-4])-(\d+)$")

# A full fiscal year sorts after that year's quarters.
_FY_SLOT = 5


def period_sort_key(label: str) -> tuple[int, int, str]:
    m = _FY_RE.match(label)
    if m:
        return (int(m.group(1)), _FY_SLOT, label)
    m = _Q_RE.match(label)
    if m:
        return (int(m.group(2)), int(m.group(1)), label)
    return (9999, 9, label)


def next_period_label(label: str) -> str:
    """Label of the fiscal period immediately after ``label``."""
    m = _FY_RE.match(label)
    if m:
        return f"FY{int(m.group(1)) + 1}"
    m = _Q_RE.match(label)
    if m:
        quarter, year = int(m.group(1)), int(m.group(2))
        if quarter == 4:
            return f"Q1-{year + 1}"
        return f"Q{quarter + 1}-{year}"
    return f"{label}+1"
