"""Document sources: local fixture directories and the public SEC endpoints.

All unit tests run against :class:`FixtureSource`. :class:`SecEdgarSource`
talks to the live company-facts and full-text-search services and is only
exercised by opt-in integration tests; it throttles itself (the public
service requires both a descriptive User-Agent and a polite request rate)
and backs off exponentially on 429/503.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Protocol

import requests

from sellside.errors import RateLimited, SourceUnavailable, UnknownTicker
from sellside.ingestion.store import DocumentStore
from sellside.ingestion.types import RawDocument, SourceKind

# Fixture documents get a pinned retrieval timestamp (overridable per entry
# in the manifest) so repeated runs are byte-identical.
FIXTURE_RETRIEVED_AT = datetime(2024, 1, 1, tzinfo=timezone.utc)

SEC_FACTS_BASE = "https://data.sec.gov"
SEC_TICKER_MAP_URL = "https://www.sec.gov/files/company_tickers.json"
SEC_FULL_TEXT_URL = "https://efts.sec.gov/LATEST/search-index"

# Company-facts concept tags accepted for each normalized statement field,
# in preference order.
GAAP_TAGS = {
    "revenue": (
        "Revenues",
        "RevenueFromContractWithCustomerExcludingAssessedTax",
        "RevenueFromContractWithCustomerIncludingAssessedTax",
        "SalesRevenueNet",
    ),
    "operating expenses": ("OperatingExpenses", "CostsAndExpenses", "OperatingCostsAndExpenses"),
    "selling, general and administrative": (
        "SellingGeneralAndAdministrativeExpense",
        "GeneralAndAdministrativeExpense",
    ),
    "depreciation and amortization": (
        "DepreciationDepletionAndAmortization",
        "DepreciationAmortizationAndAccretionNet",
        "DepreciationAndAmortization",
    ),
}


class DataSource(Protocol):
    """Anything that can produce raw documents for a ticker."""

    name: str

    def fetch(self, ticker: str, kinds: set[SourceKind], since: date) -> list[RawDocument]: ...


class FixtureSource:
    """Reads documents from a directory described by ``manifest.json``.

    The manifest is a list of records under the ``documents`` key, each with
    ``id``, ``ticker``, ``kind``, ``period``, ``content_type``, ``path`` and
    an optional ``retrieved_at`` ISO timestamp.
    """

    name = "fixtures"

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def _entries(self) -> list[dict]:
        manifest = self.root / "manifest.json"
        try:
            return json.loads(manifest.read_text("utf-8"))["documents"]
        except FileNotFoundError as exc:
            raise SourceUnavailable(self.name, f"no manifest at {manifest}") from exc
        except (ValueError, KeyError) as exc:
            raise SourceUnavailable(self.name, f"bad manifest at {manifest}: {exc}") from exc

    def fetch(self, ticker: str, kinds: set[SourceKind], since: date) -> list[RawDocument]:
        entries = self._entries()
        if not any(e["ticker"] == ticker for e in entries):
            raise UnknownTicker(f"no fixture documents for ticker {ticker!r}")
        docs = []
        for entry in entries:
            kind = SourceKind(entry["kind"])
            retrieved = (
                datetime.fromisoformat(entry["retrieved_at"])
                if "retrieved_at" in entry
                else FIXTURE_RETRIEVED_AT
            )
            if entry["ticker"] != ticker or kind not in kinds or retrieved.date() < since:
                continue
            body = (self.root / entry["path"]).read_bytes()
            docs.append(
                RawDocument(
                    id=entry["id"],
                    company=ticker,
                    kind=kind,
                    period=entry["period"],
                    retrieved_at=retrieved,
                    body=body,
                    content_type=entry.get("content_type", "text/plain"),
                )
            )
        return sorted(docs, key=lambda d: d.id)


class RateLimiter:
    """Spaces requests to at most ``max_per_second``."""

    def __init__(
        self,
        max_per_second: float,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
    ) -> None:
        self.interval = 1.0 / max_per_second if max_per_second > 0 else 0.0
        self._sleep = sleep
        self._clock = clock
        self._last = -1e9

    def wait(self) -> None:
        now = self._clock()
        due = self._last + self.interval
        if now < due:
            self._sleep(due - now)
            now = due
        self._last = now


@dataclass(frozen=True)
class SecSourceConfig:
    user_agent: str
    base_url: str = SEC_FACTS_BASE
    ticker_map_url: str = SEC_TICKER_MAP_URL
    full_text_url: str = SEC_FULL_TEXT_URL
    max_requests_per_second: float = 8.0
    backoff_base_s: float = 0.5
    max_retries: int = 4
    timeout_s: float = 30.0


class SecEdgarSource:
    """SEC company-facts (statements) and full-text search (releases).

    Company-facts responses are flattened into the same ``key: value``
    statement text the fixture documents use, one block per fiscal year,
    with ``units: ones`` (the service reports plain USD). The document's
    retrieval timestamp is pinned to the newest filing date it contains so
    re-fetching an unchanged company is idempotent byte-for-byte.
    """

    name = "sec_edgar"

    def __init__(
        self,
        config: SecSourceConfig,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.config = config
        self.session = session or requests.Session()
        self._sleep = sleep
        self._limiter = RateLimiter(config.max_requests_per_second, sleep=sleep)

    # ── transport ────────────────────────────────────────────────────

    def _get_json(self, url: str, params: dict | None = None) -> dict:
        headers = {"User-Agent": self.config.user_agent, "Accept-Encoding": "gzip, deflate"}
        last_retry_after: float | None = None
        for attempt in range(self.config.max_retries + 1):
            self._limiter.wait()
            try:
                resp = self.session.get(
                    url, params=params, headers=headers, timeout=self.config.timeout_s
                )
            except requests.RequestException as exc:
                raise SourceUnavailable(self.name, str(exc)) from exc
            if resp.status_code in (429, 503):
                retry_after = _retry_after_seconds(resp)
                last_retry_after = retry_after
                if attempt < self.config.max_retries:
                    self._sleep(retry_after if retry_after else self.config.backoff_base_s * 2**attempt)
                    continue
                if resp.status_code == 429:
                    raise RateLimited(self.name, last_retry_after)
                raise SourceUnavailable(self.name, f"HTTP {resp.status_code} after retries")
            if resp.status_code >= 400:
                raise SourceUnavailable(self.name, f"HTTP {resp.status_code} for {url}")
            try:
                return resp.json()
            except ValueError as exc:
                raise SourceUnavailable(self.name, f"non-JSON response for {url}") from exc
        raise SourceUnavailable(self.name, "retries exhausted")

    # ── company facts → statement document ───────────────────────────

    def _resolve_cik(self, ticker: str) -> int:
        table = self._get_json(self.config.ticker_map_url)
        for entry in table.values():
            if entry.get("ticker", "").upper() == ticker.upper():
                return int(entry["cik_str"])
        raise UnknownTicker(f"ticker {ticker!r} not listed by {self.name}")

    def _statement_document(self, ticker: str, cik: int) -> RawDocument | None:
        facts = self._get_json(f"{self.config.base_url}/api/xbrl/companyfacts/CIK{cik:010d}.json")
        gaap = facts.get("facts", {}).get("us-gaap", {})
        by_year: dict[int, dict[str, float]] = {}
        filed_dates: list[str] = []
        for field_name, tags in GAAP_TAGS.items():
            chosen: dict[int, tuple[str, float]] = {}
            for tag in tags:
                for unit_entries in gaap.get(tag, {}).get("units", {}).get("USD", []):
                    if unit_entries.get("form") != "10-K" or unit_entries.get("fp") != "FY":
                        continue
                    end = unit_entries.get("end", "")
                    filed = unit_entries.get("filed", "")
                    if len(end) < 4:
                        continue
                    year = int(end[:4])
                    # Most recently filed figure for a year wins.
                    if year not in chosen or filed > chosen[year][0]:
                        chosen[year] = (filed, float(unit_entries["val"]))
                if chosen:
                    break  # first tag with data wins for this field
            for year, (filed, val) in chosen.items():
                by_year.setdefault(year, {})[field_name] = val
                filed_dates.append(filed)
        # only years with the full required trio become statement periods
        required = ("revenue", "operating expenses", "selling, general and administrative")
        years = sorted(y for y, vals in by_year.items() if all(k in vals for k in required))
        if not years:
            return None
        lines = [
            f"ticker: {ticker.upper()}",
            f"company_name: {facts.get('entityName', ticker.upper())}",
            "currency: USD",
            "units: ones",
        ]
        for year in years:
            lines.append("")
            lines.append(f"period: FY{year}")
            for field_name in GAAP_TAGS:
                if field_name in by_year[year]:
                    lines.append(f"{field_name}: {by_year[year][field_name]:.0f}")
        latest_filed = max(filed_dates) if filed_dates else "1970-01-01"
        return RawDocument(
            id=f"sec-companyfacts-{cik:010d}",
            company=ticker.upper(),
            kind=SourceKind.SEC_FILING,
            period=f"FY{years[-1]}",
            retrieved_at=datetime.fromisoformat(latest_filed).replace(tzinfo=timezone.utc),
            body=("\n".join(lines) + "\n").encode("utf-8"),
            content_type="text/plain",
        )

    # ── full-text search → release stubs ─────────────────────────────

    def _release_documents(self, ticker: str, since: date) -> list[RawDocument]:
        payload = self._get_json(
            self.config.full_text_url,
            params={"q": f'"{ticker.upper()}"', "forms": "8-K", "dateRange": "custom",
                    "startdt": since.isoformat(), "enddt": date.today().isoformat()},
        )
        docs = []
        for hit in payload.get("hits", {}).get("hits", []):
            source = hit.get("_source", {})
            adsh = source.get("_id") or hit.get("_id", "")
            file_date = source.get("file_date", "1970-01-01")
            body = json.dumps(source, sort_keys=True, indent=2).encode("utf-8")
            if not adsh or not body:
                continue
            docs.append(
                RawDocument(
                    id=f"sec-fts-{adsh}",
                    company=ticker.upper(),
                    kind=SourceKind.CORPORATE_RELEASE,
                    period=f"FY{file_date[:4]}",
                    retrieved_at=datetime.fromisoformat(file_date).replace(tzinfo=timezone.utc),
                    body=body,
                    content_type="application/json",
                )
            )
        return docs

    def fetch(self, ticker: str, kinds: set[SourceKind], since: date) -> list[RawDocument]:
        cik = self._resolve_cik(ticker)
        docs: list[RawDocument] = []
        if SourceKind.SEC_FILING in kinds:
            statement = self._statement_document(ticker, cik)
            if statement is not None and statement.retrieved_at.date() >= since:
                docs.append(statement)
        if SourceKind.CORPORATE_RELEASE in kinds:
            docs.extend(self._release_documents(ticker, since))
        return sorted(docs, key=lambda d: d.id)


def _retry_after_seconds(resp: requests.Response) -> float | None:
    value = resp.headers.get("Retry-After")
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        return None


def fetch_documents(
    ticker: str,
    kinds: set[SourceKind],
    since: date,
    *,
    sources: Iterable[DataSource],
    store: DocumentStore,
) -> list[RawDocument]:
    """Fetch matching documents from every source and persist them.

    Idempotent: documents are keyed by id in the store, so repeating an
    identical fetch leaves the store unchanged.
    """
    if not ticker:
        raise UnknownTicker("empty ticker")
    if not kinds:
        raise ValueError("at least one source kind must be requested")
    fetched: dict[str, RawDocument] = {}
    for source in sources:
        for doc in source.fetch(ticker, kinds, since):
            fetched[doc.id] = doc
    for doc in fetched.values():
        store.store(doc)
    return sorted(fetched.values(), key=lambda d: d.id)
