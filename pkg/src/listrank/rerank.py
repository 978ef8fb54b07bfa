"""Single-call and sliding-window listwise reranking, plus reciprocal rank fusion."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from listrank.backends import (
    DEFAULT_MAX_OUTPUT_TOKENS,
    Backend,
    BackendError,
    BackendRequest,
)
from listrank.model import (
    Passage,
    Query,
    RunList,
    StructuralError,
    TiedRanking,
    identity_ranking,
    ranking_to_runlist,
)
from listrank.parser import DEFAULT_MIN_INDICES, TraceAnalysis, extract_final
from listrank.prompt import DEFAULT_TRUNCATE, build_prompt

logger = logging.getLogger(__name__)

DEFAULT_K_RRF = 60.0
DEFAULT_WINDOW = 20
DEFAULT_STRIDE = 10


@dataclass(frozen=True)
class RerankSettings:
    temperature: float = 0.0
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    truncate: int = DEFAULT_TRUNCATE
    instruction: str | None = None
    split_system: bool = False
    min_indices: int = DEFAULT_MIN_INDICES
    system_tag: str = "rerank"


@dataclass(frozen=True)
class BackendExchange:
    """One backend call: what was sent, what came back, and how it parsed."""

    query_id: str
    call_index: int
    window: tuple[int, int]
    prompt: str
    response: str
    input_tokens: int
    output_tokens: int
    status: str  # "ok", "fallback" (unparseable) or "failed" (backend error)
    ranking_count: int = 0
    error: str = ""

    @property
    def n(self) -> int:
        return self.window[1] - self.window[0]

    def to_record(self) -> dict:
        return {
            "query_id": self.query_id,
            "call": self.call_index,
            "window": list(self.window),
            "n": self.n,
            "prompt": self.prompt,
            "response": self.response,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "status": self.status,
            "ranking_count": self.ranking_count,
            "error": self.error,
        }


@dataclass(frozen=True)
class WindowPlan:
    ranges: tuple[tuple[int, int], ...]

    def __iter__(self):
        return iter(self.ranges)

    def __len__(self) -> int:
        return len(self.ranges)


def plan_windows(
    depth: int, window: int, stride: int, extra_top_pass: bool = False
) -> WindowPlan:
    """Bottom-up window ranges, deepest first; the last one always starts at 0.

    ``extra_top_pass`` appends one more ``(0, window)`` call.
    """
    if not 1 <= stride <= window <= depth:
        raise StructuralError(
            f"need 1 <= stride <= window <= depth, got stride={stride}, "
            f"window={window}, depth={depth}"
        )
    ranges = []
    start = depth - window
    while start > 0:
        ranges.append((start, start + window))
        start -= stride
    ranges.append((0, window))
    if extra_top_pass:
        ranges.append((0, window))
    return WindowPlan(tuple(ranges))


def _rerank_window(
    backend: Backend,
    query: Query,
    doc_ids: Sequence[str],
    passages: Mapping[str, Passage],
    settings: RerankSettings,
    call_index: int = 0,
    offset: int = 0,
) -> tuple[list[str], BackendExchange, TraceAnalysis]:
    """Rerank one window of doc ids; returns the new order for that window."""
    n = len(doc_ids)
    missing = [d for d in doc_ids if d not in passages]
    if missing:
        raise StructuralError(f"query {query.id}: no passage text for {missing[:5]}")
    window = build_prompt(
        query, [passages[d] for d in doc_ids], settings.truncate, settings.instruction
    )
    request = BackendRequest(
        window.rendered,
        settings.temperature,
        settings.max_output_tokens,
        messages=tuple(window.messages(settings.split_system)),
        query_id=query.id,
        doc_ids=tuple(doc_ids),
        call_index=call_index,
    )
    span = (offset, offset + n)
    try:
        response = backend.generate(request)
    except BackendError as exc:
        logger.error("query %s call %d failed: %s", query.id, call_index, exc)
        analysis = TraceAnalysis(0, identity_ranking(n), True)
        exchange = BackendExchange(
            query.id, call_index, span, window.rendered, "", 0, 0, "failed", 0, str(exc)
        )
        return list(doc_ids), exchange, analysis

    analysis = extract_final(response.text, n, settings.min_indices)
    if analysis.fallback_used:
        logger.warning("query %s call %d: unparseable output, keeping input order",
                       query.id, call_index)
    ranking: TiedRanking = analysis.final or identity_ranking(n)
    ordered = ranking_to_runlist(ranking, [(d, i) for i, d in enumerate(doc_ids, start=1)])
    exchange = BackendExchange(
        query.id,
        call_index,
        span,
        window.rendered,
        response.text,
        response.input_tokens,
        response.output_tokens,
        "fallback" if analysis.fallback_used else "ok",
        analysis.ranking_count,
    )
    return ordered.doc_ids, exchange, analysis


def rerank_single(
    backend: Backend,
    query: Query,
    candidates: RunList,
    passages: Mapping[str, Passage],
    depth: int | None = None,
    settings: RerankSettings = RerankSettings(),
) -> tuple[RunList, BackendExchange, TraceAnalysis]:
    """Rerank the top ``depth`` candidates in one call; the rest keep their order below."""
    if not len(candidates):
        raise StructuralError(f"query {query.id}: no candidates to rerank")
    ids = candidates.doc_ids
    depth = len(ids) if depth is None else min(depth, len(ids))
    head, exchange, analysis = _rerank_window(backend, query, ids[:depth], passages, settings)
    run = RunList.from_ranked_ids(query.id, head + ids[depth:], settings.system_tag)
    return run, exchange, analysis


def rerank_sliding(
    backend: Backend,
    query: Query,
    candidates: RunList,
    passages: Mapping[str, Passage],
    depth: int | None = None,
    window: int = DEFAULT_WINDOW,
    stride: int = DEFAULT_STRIDE,
    settings: RerankSettings = RerankSettings(),
    extra_top_pass: bool = False,
) -> tuple[RunList, list[BackendExchange]]:
    """Single bottom-up pass of overlapping windows over the top ``depth`` candidates.

    Window and stride shrink to fit when fewer candidates exist than requested.
    A failed or unparseable window leaves its range untouched.
    """
    ids = candidates.doc_ids
    if not ids:
        raise StructuralError(f"query {query.id}: no candidates to rerank")
    depth = len(ids) if depth is None else min(depth, len(ids))
    window = min(window, depth)
    plan = plan_windows(depth, window, min(stride, window), extra_top_pass)
    order = list(ids)
    exchanges = []
    for call_index, (start, end) in enumerate(plan):
        new, exchange, _ = _rerank_window(
            backend, query, order[start:end], passages, settings, call_index, start
        )
        order[start:end] = new
        exchanges.append(exchange)
    return RunList.from_ranked_ids(query.id, order, settings.system_tag), exchanges


def rrf_fuse(
    runs: Sequence[RunList], k_rrf: float = DEFAULT_K_RRF, system_tag: str = "rrf"
) -> RunList:
    if not runs:
        raise StructuralError("rrf_fuse needs at least one run")
    query_ids = {run.query_id for run in runs}
    if len(query_ids) != 1:
        raise StructuralError(f"cannot fuse runs of different queries: {sorted(query_ids)}")
    scores: dict[str, float] = {}
    for run in runs:
        for entry in run.entries:
            scores[entry.doc_id] = scores.get(entry.doc_id, 0.0) + 1.0 / (k_rrf + entry.rank)
    return RunList.from_scores(runs[0].query_id, scores, system_tag)


@dataclass
class BatchResult:
    runs: dict[str, RunList] = field(default_factory=dict)
    exchanges: list[BackendExchange] = field(default_factory=list)
    failed_queries: list[str] = field(default_factory=list)


def rerank_batch(
    backend: Backend,
    queries: Iterable[Query],
    runs: Mapping[str, RunList],
    passages: Mapping[str, Passage],
    depth: int = 20,
    window: int = DEFAULT_WINDOW,
    stride: int = DEFAULT_STRIDE,
    settings: RerankSettings = RerankSettings(),
    extra_top_pass: bool = False,
    concurrency: int = 1,
) -> BatchResult:
    """Rerank every query that has a run; queries run concurrently, windows never do.

    Uses one call when ``window >= depth``, the sliding window otherwise.
    Output order follows the query order regardless of concurrency.
    """
    todo = [q for q in queries if q.id in runs and len(runs[q.id])]

    def one(query: Query) -> tuple[RunList, list[BackendExchange]]:
        candidates = runs[query.id]
        if window >= min(depth, len(candidates)):
            run, exchange, _ = rerank_single(backend, query, candidates, passages, depth, settings)
            return run, [exchange]
        return rerank_sliding(
            backend, query, candidates, passages, depth, window, stride, settings, extra_top_pass
        )

    result = BatchResult()
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        for query, (run, exchanges) in zip(todo, pool.map(one, todo)):
            result.runs[query.id] = run
            result.exchanges.extend(exchanges)
            if any(ex.status == "failed" for ex in exchanges):
                result.failed_queries.append(query.id)
    return result
