"""Exception hierarchy shared across the engine.

Domain errors map to CLI exit code 1; usage errors are left to argparse
(exit code 2). Every error carries enough context to locate the failing
input (source name, document id, stage label, ...).
"""

from __future__ import annotations


class SellsideError(Exception):
    """Base class for all domain errors raised by this package."""


# ── data sources / ingestion ─────────────────────────────────────────────


class SourceUnavailable(SellsideError):
    """A data source could not be reached or answered with a server error."""

    def __init__(self, source: str, detail: str = "") -> None:
        self.source = source
        super().__init__(f"source {source!r} unavailable" + (f": {detail}" if detail else ""))


class RateLimited(SellsideError):
    """The remote service throttled us; ``retry_after`` is a hint in seconds."""

    def __init__(self, source: str, retry_after: float | None = None) -> None:
        self.source = source
        self.retry_after = retry_after
        hint = f", retry after {retry_after:g}s" if retry_after is not None else ""
        super().__init__(f"rate limited by {source!r}{hint}")


class UnknownTicker(SellsideError):
    """The requested ticker is empty or not known to any configured source."""


class ParseFailure(SellsideError):
    """Statement parsing failed; carries the document id and byte offset."""

    def __init__(self, doc_id: str, offset: int, detail: str) -> None:
        self.doc_id = doc_id
        self.offset = offset
        super().__init__(f"cannot parse document {doc_id!r} at byte {offset}: {detail}")


class InconsistentTicker(SellsideError):
    """Documents passed to the parser refer to more than one ticker."""


class StorageFailure(SellsideError):
    """The document store could not complete a read or write."""


class MissingFinancialField(SellsideError):
    """A downstream computation needs an optional statement field that was
    absent from the source data (the parser never invents values)."""

    def __init__(self, field: str, period: str) -> None:
        self.field = field
        self.period = period
        super().__init__(f"field {field!r} absent from period {period!r}")


# ── metrics / valuation arithmetic ───────────────────────────────────────


class DivisionByZero(SellsideError):
    """A ratio was requested with a zero denominator."""


class NegativePrevious(SellsideError):
    """Growth was requested against a negative base value."""


class NonPositiveInput(SellsideError):
    """A growth-rate computation received a non-positive value."""


class ZeroYears(SellsideError):
    """A compound growth rate was requested over zero years."""


class ZeroCapital(SellsideError):
    """Capital-cost weighting was requested with zero total capital."""


class MissingProjectionBasis(SellsideError):
    """Forward projections need at least two historical periods."""


class NonConvergent(SellsideError):
    """Terminal value does not converge (discount rate <= terminal growth)."""


class ZeroShares(SellsideError):
    """Per-share value was requested with a non-positive share count."""


class ZeroPrice(SellsideError):
    """A rating was requested against a non-positive market price."""


# ── agents ───────────────────────────────────────────────────────────────


class ProviderFailure(SellsideError):
    """The completion provider failed; carries provider name and prompt hash."""

    def __init__(self, provider: str, prompt_hash: str, detail: str = "") -> None:
        self.provider = provider
        self.prompt_hash = prompt_hash
        msg = f"provider {provider!r} failed for prompt {prompt_hash[:12]}"
        super().__init__(msg + (f": {detail}" if detail else ""))


class EmptyContext(SellsideError):
    """An analysis prompt would have been issued with no grounding context."""


class NoComparablePeriod(SellsideError):
    """Competitor benchmarking found no fiscal period shared by all companies."""


class RatingMismatch(SellsideError):
    """Generated narrative asserts a rating different from the computed one."""


# ── report assembly ──────────────────────────────────────────────────────


class MissingSection(SellsideError):
    """A report section cannot be populated; names the section and why."""

    def __init__(self, section: str, reason: str) -> None:
        self.section = section
        super().__init__(f"cannot populate section {section!r}: {reason}")


class UnsupportedFormat(SellsideError):
    """An output format outside the supported set was requested."""


# ── evaluation ───────────────────────────────────────────────────────────


class MalformedResponse(SellsideError):
    """A judge response is missing a dimension block; names the first one."""

    def __init__(self, dimension: str) -> None:
        self.dimension = dimension
        super().__init__(f"judge response missing dimension {dimension!r}")


class OutOfRangeScore(SellsideError):
    """A judge score fell outside the 0..10 scale."""


class EmptyInput(SellsideError):
    """Aggregation was requested over an empty sample."""


class GenerationFailure(SellsideError):
    """A stability-run report generation failed; carries method and run index."""

    def __init__(self, method: str, run_index: int, detail: str) -> None:
        self.method = method
        self.run_index = run_index
        super().__init__(f"generation failed for method {method!r} run {run_index}: {detail}")


class JudgeFailure(SellsideError):
    """A stability-run judging step failed; carries method and run index."""

    def __init__(self, method: str, run_index: int, detail: str) -> None:
        self.method = method
        self.run_index = run_index
        super().__init__(f"judging failed for method {method!r} run {run_index}: {detail}")


# ── pipeline ─────────────────────────────────────────────────────────────


class CacheCorruption(SellsideError):
    """A cache entry failed its integrity check (treated as a miss upstream)."""


class ConcurrentRun(SellsideError):
    """Another pipeline run already owns the requested output directory."""


class StageError(SellsideError):
    """Wraps an error raised inside a pipeline stage with the stage name."""

    def __init__(self, stage: str, cause: Exception) -> None:
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
