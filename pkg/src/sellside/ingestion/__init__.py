"""Data collection and normalization: sources, document store, parser."""

from sellside.ingestion.parser import parse_statements, provenance_complete
from sellside.ingestion.sources import (
    DataSource,
    FixtureSource,
    SecEdgarSource,
    SecSourceConfig,
    fetch_documents,
)
from sellside.ingestion.store import DocumentStore
from sellside.ingestion.types import (
    CompanyFinancials,
    FinancialPeriod,
    RawDocument,
    SourceKind,
    SourceSpan,
)

__all__ = [
    "CompanyFinancials",
    "DataSource",
    "DocumentStore",
    "FinancialPeriod",
    "FixtureSource",
    "RawDocument",
    "SecEdgarSource",
    "SecSourceConfig",
    "SourceKind",
    "SourceSpan",
    "fetch_documents",
    "parse_statements",
    "provenance_complete",
]
