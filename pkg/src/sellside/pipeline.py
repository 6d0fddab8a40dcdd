"""End-to-end orchestration with a content-addressed stage cache.

Stages run strictly in order: ingest -> metrics -> concept -> valuation ->
thesis -> report. Each stage's cache key hashes its stage id, the artifact
hashes of its inputs, and the slice of the config it reads, so editing a
rating threshold invalidates the valuation stage onward while earlier
stages keep hitting. Ingestion itself always runs (sources are
authoritative; fresh data must be seen) and its artifact hash is what keys
everything downstream.

A run owns its output directory through a lock file; artifacts and outputs
are written atomically, so an interrupted run re-runs cleanly.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from sellside import __version__
from sellside.agents.orchestration import (
    CompetitorBenchmark,
    Insight,
    ThesisContent,
    benchmark_competitors,
    load_question_bank,
    run_concept_cot,
    run_thesis_cot,
    verify_insight_refs,
)
from sellside.agents.providers import (
    CountingProvider,
    HttpChatProvider,
    HttpProviderConfig,
    LlmProvider,
    ReplayProvider,
    TemplateMockProvider,
)
from sellside.config import RunConfig, canonical_hash
from sellside.errors import (
    CacheCorruption,
    ConcurrentRun,
    SellsideError,
    StageError,
)
from sellside.ingestion.parser import parse_statements
from sellside.ingestion.sources import DataSource, FixtureSource, SecEdgarSource, SecSourceConfig, fetch_documents
from sellside.ingestion.store import DocumentStore, atomic_write
from sellside.ingestion.types import CompanyFinancials, FinancialPeriod, RawDocument, SourceKind
from sellside.metrics import MetricTable, build_metric_table
from sellside.report import (
    ReportDocument,
    ReportMetadata,
    assemble_report,
    audit_facts,
    render,
)
from sellside.valuation import (
    ValuationSummary,
    derive_assumptions,
    project_financials,
    summarize_valuation,
    wacc,
)

log = logging.getLogger(__name__)

PIPELINE_STAGES = ("ingest", "metrics", "concept", "valuation", "thesis", "report")


# ── stage cache ──────────────────────────────────────────────────────────


class StageCache:
    """Content-addressed artifact cache keyed by (stage, input hash)."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def _path(self, stage: str, input_hash: str) -> Path:
        return self.root / stage / f"{input_hash}.json"

    def lookup(self, stage: str, input_hash: str) -> str | None:
        """The cached artifact text, or None. Corrupt entries are evicted."""
        path = self._path(stage, input_hash)
        try:
            entry = json.loads(path.read_text("utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, ValueError):
            self._evict(path, "unreadable entry")
            return None
        artifact = entry.get("artifact")
        recorded = entry.get("artifact_sha256")
        if (
            not isinstance(artifact, str)
            or entry.get("stage") != stage
            or entry.get("input_hash") != input_hash
            or canonical_hash(artifact) != recorded
        ):
            self._evict(path, str(CacheCorruption(f"{stage}/{input_hash} failed integrity check")))
            return None
        return artifact

    def store(self, stage: str, input_hash: str, artifact: str) -> None:
        entry = {
            "stage": stage,
            "input_hash": input_hash,
            "artifact": artifact,
            "artifact_sha256": canonical_hash(artifact),
        }
        payload = json.dumps(entry, sort_keys=True).encode("utf-8")
        atomic_write(self._path(stage, input_hash), payload)

    def _evict(self, path: Path, reason: str) -> None:
        log.warning("evicting cache entry %s: %s", path, reason)
        try:
            path.unlink()
        except OSError:
            pass


# ── manifest ─────────────────────────────────────────────────────────────


@dataclass
class StageRecord:
    name: str
    artifact_hash: str
    seconds: float
    cache_hit: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "artifact_hash": self.artifact_hash,
            "seconds": round(self.seconds, 6),
            "cache_hit": self.cache_hit,
        }


@dataclass
class RunManifest:
    config_hash: str
    engine_version: str
    provider_name: str
    input_document_ids: list[str]
    stages: list[StageRecord] = field(default_factory=list)
    provider_calls: int = 0
    audit_passed: bool | None = None

    def fingerprint(self) -> str:
        """Content identity of the run: config, inputs, and artifact hashes.

        Timings and cache-hit flags are excluded, so identical runs have
        identical fingerprints regardless of wall-clock or cache state.
        """
        return canonical_hash(
            {
                "config_hash": self.config_hash,
                "engine_version": self.engine_version,
                "input_document_ids": self.input_document_ids,
                "stages": {s.name: s.artifact_hash for s in self.stages},
            }
        )

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "engine_version": self.engine_version,
            "provider_name": self.provider_name,
            "input_document_ids": list(self.input_document_ids),
            "stages": [s.to_dict() for s in self.stages],
            "provider_calls": self.provider_calls,
            "audit_passed": self.audit_passed,
            "fingerprint": self.fingerprint(),
        }


# ── provider / source construction ───────────────────────────────────────


def make_provider(config: RunConfig) -> LlmProvider:
    settings = config.provider
    if settings.kind == "mock":
        return TemplateMockProvider()
    if settings.kind == "replay":
        return ReplayProvider(settings.replay_path)
    return HttpChatProvider(
        HttpProviderConfig(
            endpoint=settings.endpoint,
            model=settings.model,
            token_env=settings.token_env,
            timeout_s=settings.timeout_s,
            retries=settings.retries,
        )
    )


def make_sources(config: RunConfig) -> list[DataSource]:
    sources: list[DataSource] = []
    if config.sources.fixtures_dir:
        sources.append(FixtureSource(config.sources.fixtures_dir))
    if config.sources.sec_user_agent:
        sources.append(
            SecEdgarSource(
                SecSourceConfig(
                    user_agent=config.sources.sec_user_agent,
                    max_requests_per_second=config.sources.max_requests_per_second,
                    backoff_base_s=config.sources.backoff_base_s,
                    max_retries=config.sources.max_retries,
                )
            )
        )
    return sources


# ── the pipeline ─────────────────────────────────────────────────────────


class _Lock:
    def __init__(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        self.path = directory / ".lock"

    def __enter__(self) -> _Lock:
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConcurrentRun(
                f"output directory locked by another run (remove {self.path} if stale)"
            ) from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        return self

    def __exit__(self, *exc_info) -> None:
        try:
            self.path.unlink()
        except OSError:
            pass


def run_pipeline(config: RunConfig) -> tuple[ReportDocument, RunManifest]:
    """Execute all six stages and write the report, manifest, and cache."""
    output_dir = Path(config.output_dir)
    cache = StageCache(config.cache_dir)
    store = DocumentStore(config.store_dir)
    sources = make_sources(config)
    provider = CountingProvider(make_provider(config))
    as_of = date.fromisoformat(config.as_of) if config.as_of else date.today()
    config_hash = config.config_hash()

    manifest = RunManifest(
        config_hash=config_hash,
        engine_version=__version__,
        provider_name=provider.name,
        input_document_ids=[],
    )

    with _Lock(output_dir):
        runner = _StageRunner(config, cache, store, sources, provider, manifest, output_dir)
        try:
            docs = runner.ingest()
            fin, table = runner.metrics(docs)
            insights, benchmark = runner.concept(fin, table, docs)
            valuation, projections = runner.valuation(fin, table)
            thesis = runner.thesis(insights, valuation, benchmark, fin)
            doc = runner.report(
                fin, table, projections, valuation, insights, benchmark, thesis, as_of
            )
        except StageError:
            runner.persist_partial()
            raise

        for fmt in config.output_formats:
            payload = render(doc, fmt)
            suffix = "md" if fmt == "markdown" else fmt
            atomic_write(output_dir / f"{doc.ticker}-{as_of.isoformat()}.{suffix}", payload)
        manifest.provider_calls = provider.calls
        manifest_path = output_dir / f"{doc.ticker}-{as_of.isoformat()}-manifest.json"
        atomic_write(
            manifest_path,
            (json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n").encode("utf-8"),
        )
    return doc, manifest


class _StageRunner:
    """Runs stages with caching, timing, and stage-tagged error handling."""

    def __init__(
        self,
        config: RunConfig,
        cache: StageCache,
        store: DocumentStore,
        sources: list[DataSource],
        provider: CountingProvider,
        manifest: RunManifest,
        output_dir: Path,
    ) -> None:
        self.config = config
        self.cache = cache
        self.store = store
        self.sources = sources
        self.provider = provider
        self.manifest = manifest
        self.output_dir = output_dir
        self._hashes: dict[str, str] = {}

    # ── plumbing ────────────────────────────────────────────────────

    def _record(self, stage: str, artifact_hash: str, seconds: float, cache_hit: bool) -> None:
        self._hashes[stage] = artifact_hash
        self.manifest.stages.append(StageRecord(stage, artifact_hash, seconds, cache_hit))

    def _cached_stage(self, stage: str, config_slice: dict, inputs: list[str], compute):
        """Look up (stage, inputs, config slice); compute and store on miss."""
        input_hash = canonical_hash({"stage": stage, "inputs": inputs, "config": config_slice})
        started = time.perf_counter()
        cached = self.cache.lookup(stage, input_hash)
        if cached is not None:
            self._record(stage, canonical_hash(cached), time.perf_counter() - started, True)
            return json.loads(cached)
        try:
            result = compute()
        except SellsideError as exc:
            raise StageError(stage, exc) from exc
        artifact = json.dumps(result, sort_keys=True)
        self.cache.store(stage, input_hash, artifact)
        self._record(stage, canonical_hash(artifact), time.perf_counter() - started, False)
        return result

    def persist_partial(self) -> None:
        payload = {
            "config_hash": self.manifest.config_hash,
            "completed_stages": [s.to_dict() for s in self.manifest.stages],
            "input_document_ids": self.manifest.input_document_ids,
        }
        atomic_write(
            self.output_dir / "partial-run.json",
            (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode("utf-8"),
        )

    def _fetch(self, ticker: str) -> list[RawDocument]:
        return fetch_documents(
            ticker,
            set(SourceKind),
            date.fromisoformat(self.config.sources.since),
            sources=self.sources,
            store=self.store,
        )

    # ── stages ──────────────────────────────────────────────────────

    def ingest(self) -> list[RawDocument]:
        started = time.perf_counter()
        try:
            docs = self._fetch(self.config.ticker)
        except SellsideError as exc:
            raise StageError("ingest", exc) from exc
        self.manifest.input_document_ids = [d.id for d in docs]
        artifact_hash = canonical_hash(
            [{"id": d.id, "body": hashlib.sha256(d.body).hexdigest()} for d in docs]
        )
        self._record("ingest", artifact_hash, time.perf_counter() - started, False)
        return docs

    def metrics(self, docs: list[RawDocument]) -> tuple[CompanyFinancials, MetricTable]:
        result = self._cached_stage(
            "metrics",
            config_slice={},
            inputs=[self._hashes["ingest"]],
            compute=lambda: self._compute_metrics(docs),
        )
        return (
            CompanyFinancials.from_dict(result["fin"]),
            MetricTable.from_dict(result["table"]),
        )

    def _compute_metrics(self, docs: list[RawDocument]) -> dict:
        fin = parse_statements(docs)
        table = build_metric_table(fin)
        return {"fin": fin.to_dict(), "table": table.to_dict()}

    def concept(
        self, fin: CompanyFinancials, table: MetricTable, docs: list[RawDocument]
    ) -> tuple[list[Insight], CompetitorBenchmark]:
        peer_tickers = list(self.config.peers) if self.config.peers else fin.peers
        config_slice = {
            "provider": self.provider.name,
            "question_bank": self.config.question_bank,
            "byte_budget": self.config.context_byte_budget,
            "peers": peer_tickers,
        }
        result = self._cached_stage(
            "concept",
            config_slice=config_slice,
            inputs=[self._hashes["metrics"]],
            compute=lambda: self._compute_concept(fin, table, docs, peer_tickers),
        )
        return (
            [Insight.from_dict(i) for i in result["insights"]],
            CompetitorBenchmark.from_dict(result["benchmark"]),
        )

    def _compute_concept(
        self,
        fin: CompanyFinancials,
        table: MetricTable,
        docs: list[RawDocument],
        peer_tickers: list[str],
    ) -> dict:
        questions = load_question_bank(self.config.question_bank or None)
        insights = run_concept_cot(
            fin,
            table,
            docs,
            self.provider,
            questions=questions,
            byte_budget=self.config.context_byte_budget,
            max_concurrency=self.config.max_concurrent_prompts,
        )
        if not verify_insight_refs(insights, table, set(self.manifest.input_document_ids)):
            raise SellsideError("insight references failed to resolve")
        peers = []
        for ticker in peer_tickers:
            try:
                peer_docs = self._fetch(ticker)
                peers.append(parse_statements(peer_docs))
            except SellsideError as exc:
                log.warning("skipping peer %s: %s", ticker, exc)
        benchmark = benchmark_competitors(fin, peers, self.provider)
        return {
            "insights": [i.to_dict() for i in insights],
            "benchmark": benchmark.to_dict(),
        }

    def valuation(
        self, fin: CompanyFinancials, table: MetricTable
    ) -> tuple[ValuationSummary, list]:
        config_slice = {
            "wacc": self.config.wacc.to_dict(),
            "dcf": {
                "horizon_years": self.config.dcf.horizon_years,
                "terminal_growth": self.config.dcf.terminal_growth,
                "capital_intensity": self.config.dcf.capital_intensity,
                "discount_rate": self.config.dcf.discount_rate,
            },
            "thresholds": {"buy": self.config.buy_threshold, "sell": self.config.sell_threshold},
            "current_price": self.config.current_price,
        }
        result = self._cached_stage(
            "valuation",
            config_slice=config_slice,
            inputs=[self._hashes["metrics"]],
            compute=lambda: self._compute_valuation(fin, table),
        )
        return (
            ValuationSummary.from_dict(result["valuation"]),
            [FinancialPeriod.from_dict(p) for p in result["projections"]],
        )

    def _compute_valuation(self, fin: CompanyFinancials, table: MetricTable) -> dict:
        cost_of_capital = wacc(self.config.wacc)
        discount = (
            self.config.dcf.discount_rate
            if self.config.dcf.discount_rate is not None
            else cost_of_capital
        )
        assumptions = derive_assumptions(
            table,
            horizon_years=self.config.dcf.horizon_years,
            terminal_growth=self.config.dcf.terminal_growth,
            discount_rate=discount,
            capital_intensity=self.config.dcf.capital_intensity,
        )
        projections = project_financials(fin, table, self.config.dcf.horizon_years)
        summary = summarize_valuation(
            fin,
            table,
            assumptions,
            wacc_value=cost_of_capital,
            current_price=self.config.current_price,
            thresholds=self.config.thresholds(),
        )
        return {
            "valuation": summary.to_dict(),
            "projections": [p.to_dict() for p in projections],
        }

    def thesis(
        self,
        insights: list[Insight],
        valuation: ValuationSummary,
        benchmark: CompetitorBenchmark,
        fin: CompanyFinancials,
    ) -> ThesisContent:
        result = self._cached_stage(
            "thesis",
            config_slice={"provider": self.provider.name},
            inputs=[self._hashes["concept"], self._hashes["valuation"]],
            compute=lambda: run_thesis_cot(
                insights, valuation, benchmark, self.provider, company_name=fin.company_name
            ).to_dict(),
        )
        return ThesisContent.from_dict(result)

    def report(
        self,
        fin: CompanyFinancials,
        table: MetricTable,
        projections: list,
        valuation: ValuationSummary,
        insights: list[Insight],
        benchmark: CompetitorBenchmark,
        thesis: ThesisContent,
        as_of: date,
    ) -> ReportDocument:
        config_slice = {
            "as_of": as_of.isoformat(),
            "engine_version": __version__,
            "config_hash": self.manifest.config_hash,
            "provider": self.provider.name,
        }
        result = self._cached_stage(
            "report",
            config_slice=config_slice,
            inputs=[
                self._hashes["metrics"],
                self._hashes["concept"],
                self._hashes["valuation"],
                self._hashes["thesis"],
            ],
            compute=lambda: self._compute_report(
                fin, table, projections, valuation, insights, benchmark, thesis, as_of
            ),
        )
        doc = ReportDocument.from_dict(result)
        self.manifest.audit_passed = doc.audit.passed if doc.audit is not None else None
        return doc

    def _compute_report(
        self, fin, table, projections, valuation, insights, benchmark, thesis, as_of
    ) -> dict:
        metadata = ReportMetadata(
            engine_version=__version__,
            config_hash=self.manifest.config_hash,
            provider_name=self.provider.name,
        )
        doc = assemble_report(
            fin,
            table,
            projections,
            valuation,
            insights,
            benchmark,
            thesis,
            as_of=as_of,
            metadata=metadata,
        )
        doc.audit = audit_facts(doc, table, valuation)
        if not doc.audit.passed:
            log.warning(
                "fact audit failed for %s: %d unmatched literals",
                fin.ticker,
                len(doc.audit.failures()),
            )
        return doc.to_dict()
