"""Completion providers behind one small interface.

Four implementations ship:

* :class:`TemplateMockProvider` — deterministic; answers by restating the
  question and echoing the grounding context verbatim, so generated text
  never contains a number that was not supplied to the prompt. Judge-style
  prompts (anything asking for a score from 0 to 10) get a well-formed
  scored response derived from the prompt hash.
* :class:`ReplayProvider` / :class:`RecordingProvider` — fixture playback
  and capture, keyed by prompt hash.
* :class:`HttpChatProvider` — a chat-completions HTTP client for hosted
  models; the auth token comes from an environment variable only.
* :class:`ScriptedProvider` — returns a queued list of responses in order
  (a test instrument; not deterministic per prompt).
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import requests

from sellside.errors import ProviderFailure

_JUDGE_MARKERS = ("score from 0 to 10",)
_DIMENSION_WORDS = (
    ("Accuracy", ("accuracy",)),
    ("Logicality", ("logicality", "logical coherence")),
    ("Storytelling", ("storytelling",)),
)


@dataclass(frozen=True)
class PromptEnvelope:
    """A fully specified prompt; rendering is a pure function of the fields."""

    system_text: str
    user_text: str
    context_blocks: tuple[tuple[str, str], ...] = ()
    max_tokens: int = 1024
    temperature: float = 0.0

    def render_user(self) -> str:
        parts = []
        for label, text in self.context_blocks:
            parts.append(f"[CONTEXT: {label}]\n{text}")
        parts.append(f"[USER]\n{self.user_text}")
        return "\n\n".join(parts)

    def render(self) -> str:
        return f"[SYSTEM]\n{self.system_text}\n\n{self.render_user()}\n"

    @property
    def prompt_hash(self) -> str:
        return hashlib.sha256(self.render().encode("utf-8")).hexdigest()


@runtime_checkable
class LlmProvider(Protocol):
    name: str
    deterministic: bool

    def complete(self, prompt: PromptEnvelope) -> str: ...


class TemplateMockProvider:
    name = "mock"
    deterministic = True

    def complete(self, prompt: PromptEnvelope) -> str:
        haystack = f"{prompt.system_text}\n{prompt.user_text}".lower()
        if any(marker in haystack for marker in _JUDGE_MARKERS):
            return self._judge_response(prompt, haystack)
        lines = [f"Assessment: {prompt.user_text.splitlines()[0] if prompt.user_text else ''}"]
        for label, text in prompt.context_blocks:
            if label.startswith("document"):
                # Raw source excerpts may contain numbers with no computed
                # counterpart; never quote them back.
                continue
            lines.extend(ln.strip() for ln in text.splitlines() if ln.strip())
        return "\n".join(lines)

    def _judge_response(self, prompt: PromptEnvelope, haystack: str) -> str:
        digest = prompt.prompt_hash
        named = [
            (i, dim)
            for i, (dim, needles) in enumerate(_DIMENSION_WORDS)
            if any(needle in haystack for needle in needles)
        ]
        blocks = []
        for i, dim in named:
            score = 5.0 + (int(digest[2 * i : 2 * i + 2], 16) % 11) * 0.5
            blocks.append(
                f"[{dim}] {score:g}:\n"
                f"Deterministic {dim.lower()} assessment derived from the report contents."
            )
        return "\n\n".join(blocks)


class ScriptedProvider:
    """Replies with a fixed sequence of responses, in call order."""

    deterministic = False

    def __init__(self, responses: list[str], name: str = "scripted") -> None:
        self.name = name
        self._responses = list(responses)
        self._lock = threading.Lock()
        self.calls = 0

    def complete(self, prompt: PromptEnvelope) -> str:
        with self._lock:
            if self.calls >= len(self._responses):
                raise ProviderFailure(self.name, prompt.prompt_hash, "script exhausted")
            response = self._responses[self.calls]
            self.calls += 1
            return response


class ReplayProvider:
    """Serves completions recorded earlier, keyed by prompt hash."""

    deterministic = True

    def __init__(self, path: str | Path, name: str = "replay") -> None:
        self.name = name
        self.path = Path(path)
        try:
            self._responses: dict[str, str] = json.loads(self.path.read_text("utf-8"))
        except FileNotFoundError:
            self._responses = {}

    def complete(self, prompt: PromptEnvelope) -> str:
        key = prompt.prompt_hash
        if key not in self._responses:
            raise ProviderFailure(self.name, key, f"no recorded completion in {self.path}")
        return self._responses[key]


class RecordingProvider:
    """Wraps a live provider and captures its completions for replay."""

    def __init__(self, inner: LlmProvider, path: str | Path) -> None:
        self.inner = inner
        self.name = f"recording:{inner.name}"
        self.deterministic = inner.deterministic
        self.path = Path(path)
        self._lock = threading.Lock()

    def complete(self, prompt: PromptEnvelope) -> str:
        completion = self.inner.complete(prompt)
        with self._lock:
            try:
                existing = json.loads(self.path.read_text("utf-8"))
            except FileNotFoundError:
                existing = {}
            existing[prompt.prompt_hash] = completion
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(json.dumps(existing, sort_keys=True, indent=2), "utf-8")
        return completion


@dataclass(frozen=True)
class HttpProviderConfig:
    endpoint: str
    model: str
    token_env: str = "SELLSIDE_API_TOKEN"
    timeout_s: float = 60.0
    retries: int = 2


class HttpChatProvider:
    """Chat-completions wire format: messages in, first choice text out."""

    deterministic = False

    def __init__(self, config: HttpProviderConfig, session: requests.Session | None = None) -> None:
        self.config = config
        self.name = f"http:{config.model}"
        self.session = session or requests.Session()

    def complete(self, prompt: PromptEnvelope) -> str:
        token = os.environ.get(self.config.token_env, "")
        if not token:
            raise ProviderFailure(
                self.name, prompt.prompt_hash, f"no token in ${self.config.token_env}"
            )
        payload = {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.render_user()},
            ],
            "temperature": prompt.temperature,
            "max_tokens": prompt.max_tokens,
        }
        last_error = "no attempts made"
        for _ in range(self.config.retries + 1):
            try:
                resp = self.session.post(
                    self.config.endpoint,
                    json=payload,
                    headers={"Authorization": f"Bearer {token}"},
                    timeout=self.config.timeout_s,
                )
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise ProviderFailure(self.name, prompt.prompt_hash, f"HTTP {resp.status_code}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, LookupError) as exc:
                raise ProviderFailure(
                    self.name, prompt.prompt_hash, f"malformed response: {exc}"
                ) from exc
        raise ProviderFailure(self.name, prompt.prompt_hash, last_error)


@dataclass
class CountingProvider:
    """Delegates to ``inner`` while counting calls (used by run manifests)."""

    inner: LlmProvider
    calls: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def name(self) -> str:
        return self.inner.name

    @property
    def deterministic(self) -> bool:
        return self.inner.deterministic

    def complete(self, prompt: PromptEnvelope) -> str:
        with self._lock:
            self.calls += 1
        return self.inner.complete(prompt)
