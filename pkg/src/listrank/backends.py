"""Generation backends for the reranker.

Every backend implements ``generate(request) -> BackendResponse`` and must be
safe to call from several threads at once.

HTTP wire format (OpenAI-style chat completions)
------------------------------------------------
POST ``{base_url}/chat/completions`` with JSON::

    {"model": str, "messages": [{"role": "user", "content": str}],
     "temperature": float, "max_tokens": int}

With ``split_system`` the instruction block goes into a leading
``{"role": "system"}`` message. From the response the backend reads
``choices[0].message.content`` and ``usage.prompt_tokens`` /
``usage.completion_tokens``. When the server returns reasoning separately
(``choices[0].message.reasoning_content``, as vLLM and DeepSeek do) it is
re-attached as ``<think>...</think>`` in front of the content so trace
statistics see the full generation.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol

import httpx

from listrank.model import ListrankError, Qrels, StructuralError, TiedRanking, identity_ranking

logger = logging.getLogger(__name__)

DEFAULT_MAX_OUTPUT_TOKENS = 8192


class BackendError(ListrankError):
    """The backend could not produce a generation (after any retries)."""


@dataclass(frozen=True)
class BackendRequest:
    prompt: str
    temperature: float = 0.0
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    messages: tuple[Mapping[str, str], ...] = ()
    # routing metadata for test doubles; never sent over the wire
    query_id: str = ""
    doc_ids: tuple[str, ...] = ()
    call_index: int = 0

    def __post_init__(self) -> None:
        if not self.prompt:
            raise StructuralError("backend request prompt must be non-empty")
        if self.temperature < 0:
            raise StructuralError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_output_tokens < 1:
            raise StructuralError("max_output_tokens must be positive")

    def chat_messages(self) -> list[dict[str, str]]:
        if self.messages:
            return [dict(m) for m in self.messages]
        return [{"role": "user", "content": self.prompt}]


@dataclass(frozen=True)
class BackendResponse:
    text: str
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self) -> None:
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise StructuralError("token counts must be non-negative")


class Backend(Protocol):
    def generate(self, request: BackendRequest) -> BackendResponse: ...


def whitespace_tokens(text: str) -> int:
    return len(text.split())


def _respond(request: BackendRequest, text: str) -> BackendResponse:
    return BackendResponse(text, whitespace_tokens(request.prompt), whitespace_tokens(text))


class IdentityBackend:
    """Always answers ``[1] > [2] > ... > [n]``."""

    def generate(self, request: BackendRequest) -> BackendResponse:
        return _respond(request, identity_ranking(len(request.doc_ids)).render())


def oracle_ranking(grades: list[int]) -> TiedRanking:
    """Indices sorted by descending grade; equal grades form one tie group."""
    by_grade: dict[int, list[int]] = {}
    for idx, grade in enumerate(grades, start=1):
        by_grade.setdefault(grade, []).append(idx)
    return TiedRanking(tuple(tuple(by_grade[g]) for g in sorted(by_grade, reverse=True)))


class OracleBackend:
    """Perfect reranker that reads the answer off the qrels."""

    def __init__(self, qrels: Qrels):
        self.qrels = qrels

    def generate(self, request: BackendRequest) -> BackendResponse:
        grades = [self.qrels.grade(request.query_id, d) for d in request.doc_ids]
        return _respond(request, oracle_ranking(grades).render())


def oracle_backend(qrels: Qrels) -> OracleBackend:
    return OracleBackend(qrels)


class ScriptedBackend:
    """Answers with ``script(request)``; a raised BackendError simulates a failed call."""

    def __init__(self, script: Callable[[BackendRequest], str]):
        self.script = script

    def generate(self, request: BackendRequest) -> BackendResponse:
        return _respond(request, self.script(request))

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> ScriptedBackend:
        """Replay responses from JSON lines ``{"query_id", "call", "response"}``.

        ``call`` is the 0-based window call index within the query (default 0).
        """
        table: dict[tuple[str, int], str] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    table[(str(rec["query_id"]), int(rec.get("call", 0)))] = rec["response"]

        def lookup(request: BackendRequest) -> str:
            try:
                return table[(request.query_id, request.call_index)]
            except KeyError:
                raise BackendError(
                    f"no scripted response for query {request.query_id!r} call {request.call_index}"
                ) from None

        return cls(lookup)


@dataclass
class HttpBackend:
    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 600.0
    max_retries: int = 4
    backoff: float = 1.0
    transport: httpx.BaseTransport | None = None
    sleep: Callable[[float], None] = time.sleep
    client: httpx.Client = field(init=False, repr=False)

    RETRYABLE_STATUS = frozenset({408, 409, 429, 500, 502, 503, 504})

    def __post_init__(self) -> None:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.client = httpx.Client(
            base_url=self.base_url.rstrip("/"),
            headers=headers,
            timeout=self.timeout,
            transport=self.transport,
        )

    def payload(self, request: BackendRequest) -> dict:
        return {
            "model": self.model,
            "messages": request.chat_messages(),
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }

    def generate(self, request: BackendRequest) -> BackendResponse:
        body = self.payload(request)
        last_error = "no attempt made"
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = self.backoff * 2 ** (attempt - 1)
                logger.info("retrying %s in %.1fs (%s)", request.query_id, delay, last_error)
                self.sleep(delay)
            try:
                resp = self.client.post("/chat/completions", json=body)
            except httpx.TransportError as exc:
                last_error = f"transport error: {exc}"
                continue
            if resp.status_code in self.RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return parse_chat_response(resp.json())
        raise BackendError(f"giving up after {self.max_retries + 1} attempts: {last_error}")


def parse_chat_response(data: Mapping) -> BackendResponse:
    try:
        message = data["choices"][0]["message"]
    except (KeyError, IndexError, TypeError):
        raise BackendError("response has no choices[0].message") from None
    text = message.get("content") or ""
    reasoning = message.get("reasoning_content") or message.get("reasoning")
    if reasoning:
        text = f"<think>\n{reasoning}\n</think>\n{text}"
    usage = data.get("usage") or {}
    return BackendResponse(
        text,
        int(usage.get("prompt_tokens") or 0),
        int(usage.get("completion_tokens") or 0),
    )
