from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

from sellside.agents.providers import TemplateMockProvider
from sellside.config import RunConfig, load_config
from sellside.ingestion.types import CompanyFinancials, FinancialPeriod

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES / "wm"


@pytest.fixture
def mock_provider() -> TemplateMockProvider:
    return TemplateMockProvider()


def make_financials(
    rows: list[tuple[str, float, float, float]],
    ticker: str = "TST",
    **latest_extras,
) -> CompanyFinancials:
    """Build CompanyFinancials from (period, revenue, opex, sga) rows.

    ``latest_extras`` (net_debt, shares_outstanding, ...) attach to the last
    period.
    """
    periods = []
    for i, (label, revenue, opex, sga) in enumerate(rows):
        extras = latest_extras if i == len(rows) - 1 else {}
        periods.append(
            FinancialPeriod(
                period=label, revenue=revenue, operating_expense=opex, sga=sga, **extras
            )
        )
    return CompanyFinancials(
        ticker=ticker, company_name=f"{ticker} Test Co", currency="USD", periods=periods
    )


@pytest.fixture
def wm_financials(fixtures_dir) -> CompanyFinancials:
    from datetime import date

    from sellside.ingestion.parser import parse_statements
    from sellside.ingestion.sources import FixtureSource
    from sellside.ingestion.types import SourceKind

    docs = FixtureSource(fixtures_dir).fetch("WM", set(SourceKind), date(1970, 1, 1))
    return parse_statements(docs)


@pytest.fixture
def pipeline_env(tmp_path, monkeypatch) -> Path:
    """A working directory holding the fixture company and run config.

    Layout matches the committed config's relative paths, so the config
    hash (and therefore report bytes) is identical on every machine.
    """
    shutil.copytree(FIXTURES / "wm", tmp_path / "fixtures")
    shutil.copy(FIXTURES / "wm_config.json", tmp_path / "wm_config.json")
    monkeypatch.chdir(tmp_path)
    return tmp_path / "wm_config.json"


@pytest.fixture
def pipeline_config(pipeline_env) -> RunConfig:
    return load_config(pipeline_env)


def write_fixture_doc(
    root: Path, doc_id: str, ticker: str, body: str, kind: str = "fixture", period: str = "FY2023"
) -> None:
    """Add one document (and manifest entry) to an ad-hoc fixture directory."""
    root.mkdir(parents=True, exist_ok=True)
    manifest_path = root / "manifest.json"
    manifest = (
        json.loads(manifest_path.read_text()) if manifest_path.exists() else {"documents": []}
    )
    filename = f"{doc_id}.txt"
    (root / filename).write_text(body, "utf-8")
    manifest["documents"].append(
        {
            "id": doc_id,
            "ticker": ticker,
            "kind": kind,
            "period": period,
            "content_type": "text/plain",
            "path": filename,
        }
    )
    manifest_path.write_text(json.dumps(manifest, indent=2), "utf-8")
