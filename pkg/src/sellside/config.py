"""Run configuration: one serializable dataclass tree per pipeline run.

Configs load from JSON. Hashing canonicalizes through ``to_dict`` with
sorted keys, so the hash is stable under key reordering in the file.
Relative paths are interpreted against the working directory at run time
and are hashed as written.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from sellside.valuation import RatingThresholds, WaccInputs


@dataclass(frozen=True)
class ProviderSettings:
    kind: str = "mock"  # mock | replay | http
    endpoint: str = ""
    model: str = ""
    token_env: str = "SELLSIDE_API_TOKEN"
    timeout_s: float = 60.0
    retries: int = 2
    replay_path: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "replay", "http"):
            raise ValueError(f"provider kind must be mock, replay, or http, got {self.kind!r}")


@dataclass(frozen=True)
class SourceSettings:
    fixtures_dir: str = ""
    sec_user_agent: str = ""  # empty disables the live SEC source
    max_requests_per_second: float = 8.0
    backoff_base_s: float = 0.5
    max_retries: int = 4
    since: str = "1970-01-01"


@dataclass(frozen=True)
class DcfSettings:
    horizon_years: int = 5
    terminal_growth: float = 0.02
    capital_intensity: float = 0.6
    discount_rate: float | None = None  # None: discount at the computed WACC


@dataclass(frozen=True)
class RunConfig:
    ticker: str
    current_price: float
    wacc: WaccInputs
    as_of: str = ""  # ISO date; empty means "today" at run time
    sources: SourceSettings = SourceSettings()
    provider: ProviderSettings = ProviderSettings()
    dcf: DcfSettings = DcfSettings()
    buy_threshold: float = 1.10
    sell_threshold: float = 0.90
    peers: tuple[str, ...] = ()  # empty: take peers from the parsed statements
    question_bank: str = ""  # path to a question bank JSON; empty: shipped bank
    output_dir: str = "out"
    cache_dir: str = ".sellside-cache"
    store_dir: str = "docstore"
    output_formats: tuple[str, ...] = ("markdown",)
    context_byte_budget: int = 2000
    max_concurrent_prompts: int = 1
    random_seed: int = 0  # reserved; deterministic paths ignore it

    def thresholds(self) -> RatingThresholds:
        return RatingThresholds(buy=self.buy_threshold, sell=self.sell_threshold)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["peers"] = list(self.peers)
        d["output_formats"] = list(self.output_formats)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        return cls(
            ticker=d["ticker"],
            current_price=d["current_price"],
            wacc=WaccInputs.from_dict(d["wacc"]),
            as_of=d.get("as_of", ""),
            sources=SourceSettings(**d.get("sources", {})),
            provider=ProviderSettings(**d.get("provider", {})),
            dcf=DcfSettings(**d.get("dcf", {})),
            buy_threshold=d.get("buy_threshold", 1.10),
            sell_threshold=d.get("sell_threshold", 0.90),
            peers=tuple(d.get("peers", ())),
            question_bank=d.get("question_bank", ""),
            output_dir=d.get("output_dir", "out"),
            cache_dir=d.get("cache_dir", ".sellside-cache"),
            store_dir=d.get("store_dir", "docstore"),
            output_formats=tuple(d.get("output_formats", ("markdown",))),
            context_byte_budget=d.get("context_byte_budget", 2000),
            max_concurrent_prompts=d.get("max_concurrent_prompts", 1),
            random_seed=d.get("random_seed", 0),
        )

    def config_hash(self) -> str:
        return canonical_hash(self.to_dict())


def canonical_hash(payload: object) -> str:
    """SHA-256 of the canonical JSON rendering (sorted keys, tight separators)."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: str | Path) -> RunConfig:
    raw = json.loads(Path(path).read_text("utf-8"))
    return RunConfig.from_dict(raw)


def save_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n", "utf-8")
