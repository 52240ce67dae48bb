"""Model backends for patch generation and classification prompts.

Two implementations of one `complete(prompt) -> text` interface:

* HttpBackend speaks a chat-completion-style JSON protocol, so any local or
  hosted model server can act as the generator.
* ReplayBackend returns canned responses keyed by a fingerprint of the
  prompt text, giving byte-deterministic offline runs and easy fault
  injection (delete or corrupt a store entry).

`generate_patch` wraps a backend call with response parsing and a trial
application, classifying failures into model/parse/apply categories.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Protocol, Sequence

from .linediff import (
    LineDiffPatch,
    PatchApplyError,
    PatchParseError,
    SourceFile,
    apply_patch,
    parse_patch,
)

if TYPE_CHECKING:
    from .classify import ReviewComment

__all__ = [
    "Backend",
    "BackendError",
    "ReplayBackend",
    "HttpBackendConfig",
    "HttpBackend",
    "GenerationRequest",
    "GenerationOutcome",
    "OutcomeStatus",
    "DEFAULT_SYSTEM_INSTRUCTION",
    "PATCH_OPEN",
    "PATCH_CLOSE",
    "fingerprint",
    "load_replay_store",
    "save_replay_store",
    "build_patch_prompt",
    "extract_fenced_patch",
    "generate_patch",
    "spg_rate",
]

PATCH_OPEN = "<<<PATCH"
PATCH_CLOSE = "PATCH>>>"

DEFAULT_SYSTEM_INSTRUCTION = (
    "You fix code in response to review comments. Reply with a line-diff patch "
    f"between {PATCH_OPEN} and {PATCH_CLOSE} delimiter lines. Each hunk starts with "
    "a header `@@ <start> <end> @@` giving the 1-based inclusive line range of the "
    "original file to replace (end = start-1 inserts before start), followed by "
    "replacement lines each prefixed with `+`. Output nothing else."
)


class BackendError(RuntimeError):
    """Model call failed: transport error, bad response shape, or replay miss."""


class Backend(Protocol):
    def complete(self, prompt: str) -> str: ...


def fingerprint(prompt: str) -> str:
    """Stable hex key for a prompt; replay stores are indexed by this."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def load_replay_store(path: str) -> dict[str, str]:
    """Read a replay store: JSONL of {"fingerprint": hex, "response": text}."""
    store: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                store[str(obj["fingerprint"])] = str(obj["response"])
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad replay entry: {exc}") from exc
    return store


def save_replay_store(store: dict[str, str], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for fp, response in store.items():
            fh.write(json.dumps({"fingerprint": fp, "response": response}, sort_keys=True))
            fh.write("\n")


@dataclass
class ReplayBackend:
    """Deterministic model stand-in: responses canned per prompt fingerprint."""

    store: dict[str, str] = field(default_factory=dict)
    _calls: int = field(default=0, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def from_file(cls, path: str) -> "ReplayBackend":
        return cls(store=load_replay_store(path))

    @property
    def call_count(self) -> int:
        with self._lock:
            return self._calls

    def complete(self, prompt: str) -> str:
        with self._lock:
            self._calls += 1
        fp = fingerprint(prompt)
        try:
            return self.store[fp]
        except KeyError:
            raise BackendError(f"no replay entry for fingerprint {fp}") from None


@dataclass(frozen=True)
class HttpBackendConfig:
    endpoint: str
    model: str
    auth_token_env: str = ""
    timeout_s: float = 60.0


class HttpBackend:
    """Chat-completion JSON client: one user turn in, one text response out."""

    def __init__(self, config: HttpBackendConfig, system_instruction: str = ""):
        self.config = config
        self.system_instruction = system_instruction

    def complete(self, prompt: str) -> str:
        import requests

        messages = []
        if self.system_instruction:
            messages.append({"role": "system", "content": self.system_instruction})
        messages.append({"role": "user", "content": prompt})
        headers = {"Content-Type": "application/json"}
        if self.config.auth_token_env:
            token = os.environ.get(self.config.auth_token_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        body = {"model": self.config.model, "messages": messages, "temperature": 0}
        try:
            resp = requests.post(
                self.config.endpoint,
                json=body,
                headers=headers,
                timeout=self.config.timeout_s,
            )
            resp.raise_for_status()
            payload = resp.json()
            return str(payload["choices"][0]["message"]["content"])
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed model response: {exc}") from exc
        except requests.RequestException as exc:
            raise BackendError(f"model call failed: {exc}") from exc


@dataclass(frozen=True)
class GenerationRequest:
    """Everything the generator sees: the file, the comment, and the range."""

    comment: "ReviewComment"
    file: SourceFile
    system_instruction: str = DEFAULT_SYSTEM_INSTRUCTION
    max_output_tokens: int = 1024
    temperature: float = 0.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.comment.line_end > len(self.file.lines):
            raise ValueError(
                f"comment range {self.comment.line_start}..{self.comment.line_end} "
                f"exceeds {len(self.file.lines)}-line file"
            )


class OutcomeStatus(str, Enum):
    OK = "ok"
    MODEL_ERROR = "model_error"
    PARSE_ERROR = "parse_error"
    APPLY_ERROR = "apply_error"


@dataclass(frozen=True)
class GenerationOutcome:
    status: OutcomeStatus
    patch: LineDiffPatch | None
    raw_response: str
    latency_ms: int
    detail: str | None = None

    def __post_init__(self):
        if (self.status is OutcomeStatus.OK) != (self.patch is not None):
            raise ValueError("patch must be present exactly when status is ok")


def build_patch_prompt(request: GenerationRequest) -> str:
    """Deterministic generation prompt: numbered file, comment, target range."""
    numbered = "\n".join(
        f"{i}: {line}" for i, line in enumerate(request.file.lines, start=1)
    )
    comment = request.comment
    return "\n".join(
        [
            request.system_instruction,
            "",
            f"File: {request.file.path}",
            numbered,
            "",
            f"Review comment on lines {comment.line_start}-{comment.line_end}:",
            comment.comment_text,
            "",
            f"Produce the patch between {PATCH_OPEN} and {PATCH_CLOSE}.",
        ]
    )


def extract_fenced_patch(raw: str) -> str:
    """Return the text between the first PATCH delimiter pair.

    Delimiters must appear on their own lines; raises PatchParseError when
    the fence is absent or unterminated.
    """
    lines = raw.split("\n")
    start = None
    for i, line in enumerate(lines):
        if line.strip() == PATCH_OPEN:
            start = i
            break
    if start is None:
        raise PatchParseError(f"no {PATCH_OPEN} delimiter in response")
    for j in range(start + 1, len(lines)):
        if lines[j].strip() == PATCH_CLOSE:
            return "\n".join(lines[start + 1 : j])
    raise PatchParseError(f"missing closing {PATCH_CLOSE} delimiter")


def generate_patch(backend: Backend, request: GenerationRequest) -> GenerationOutcome:
    """One model call, parsed and trial-applied.

    Failures become statuses, not exceptions: model_error (call failed),
    parse_error (no fence or bad patch text), apply_error (patch does not
    fit the request's file).
    """
    prompt = build_patch_prompt(request)
    t0 = time.perf_counter()
    try:
        raw = backend.complete(prompt)
    except BackendError as exc:
        latency = int((time.perf_counter() - t0) * 1000)
        return GenerationOutcome(
            status=OutcomeStatus.MODEL_ERROR,
            patch=None,
            raw_response="",
            latency_ms=latency,
            detail=str(exc),
        )
    latency = int((time.perf_counter() - t0) * 1000)
    try:
        patch_text = extract_fenced_patch(raw)
        patch = parse_patch(patch_text, len(request.file.lines))
    except PatchParseError as exc:
        return GenerationOutcome(
            status=OutcomeStatus.PARSE_ERROR,
            patch=None,
            raw_response=raw,
            latency_ms=latency,
            detail=str(exc),
        )
    try:
        apply_patch(request.file, patch)
    except PatchApplyError as exc:
        return GenerationOutcome(
            status=OutcomeStatus.APPLY_ERROR,
            patch=None,
            raw_response=raw,
            latency_ms=latency,
            detail=str(exc),
        )
    return GenerationOutcome(
        status=OutcomeStatus.OK, patch=patch, raw_response=raw, latency_ms=latency
    )


def spg_rate(outcomes: Sequence[GenerationOutcome] | Iterable[GenerationOutcome]) -> float:
    """Fraction of outcomes where a patch was generated and applied cleanly."""
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("empty input")
    ok = sum(1 for o in outcomes if o.status is OutcomeStatus.OK)
    return ok / len(outcomes)
