"""Content-addressed document store on the local filesystem.

Bodies live under ``objects/<sha256>``; per-document metadata records live
under ``documents/<key>.json`` and point at the body hash. Writes go through
a temp file plus ``os.replace`` so a crashed write never leaves a partial
record, and concurrent writers of the same document converge on identical
content (last write wins).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
from datetime import datetime
from pathlib import Path

from sellside.errors import StorageFailure
from sellside.ingestion.types import RawDocument, SourceKind

_SAFE = re.compile(r"[^A-Za-z0-9._-]")


def atomic_write(path: Path, data: bytes) -> None:
    """Write via a temp file and rename; a crash never leaves partial data."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise StorageFailure(f"cannot write {path}: {exc}") from exc


def _doc_key(doc_id: str) -> str:
    # Human-readable prefix plus a digest so distinct ids never collide
    # after sanitization.
    digest = hashlib.sha256(doc_id.encode("utf-8")).hexdigest()[:16]
    return f"{_SAFE.sub('_', doc_id)[:80]}-{digest}"


class DocumentStore:
    """Filesystem-backed store keyed by document id."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def store(self, doc: RawDocument) -> str:
        """Persist ``doc`` and return its id. Re-storing an id is a no-op."""
        if not doc.body:
            raise StorageFailure(f"document {doc.id!r} has an empty body")
        body_hash = hashlib.sha256(doc.body).hexdigest()
        atomic_write(self.root / "objects" / body_hash, doc.body)
        record = dict(doc.to_record(), body_sha256=body_hash)
        payload = json.dumps(record, sort_keys=True, indent=2).encode("utf-8")
        atomic_write(self.root / "documents" / f"{_doc_key(doc.id)}.json", payload)
        return doc.id

    def load(self, doc_id: str) -> RawDocument:
        record_path = self.root / "documents" / f"{_doc_key(doc_id)}.json"
        try:
            record = json.loads(record_path.read_text("utf-8"))
            body = (self.root / "objects" / record["body_sha256"]).read_bytes()
        except FileNotFoundError as exc:
            raise StorageFailure(f"no stored document with id {doc_id!r}") from exc
        except (OSError, ValueError, KeyError) as exc:
            raise StorageFailure(f"corrupt record for document {doc_id!r}: {exc}") from exc
        return RawDocument(
            id=record["id"],
            company=record["company"],
            kind=SourceKind(record["kind"]),
            period=record["period"],
            retrieved_at=datetime.fromisoformat(record["retrieved_at"]),
            body=body,
            content_type=record["content_type"],
        )

    def has(self, doc_id: str) -> bool:
        return (self.root / "documents" / f"{_doc_key(doc_id)}.json").exists()

    def ids(self) -> list[str]:
        doc_dir = self.root / "documents"
        if not doc_dir.is_dir():
            return []
        out = []
        for path in sorted(doc_dir.glob("*.json")):
            try:
                out.append(json.loads(path.read_text("utf-8"))["id"])
            except (OSError, ValueError, KeyError):
                continue
        return sorted(out)
