"""Distillation dataset construction.

Per query: fuse the first-stage runs with RRF, cut a head slice (ranks 1-20)
and a mid slice (ranks 10-30, inclusive, so 21 candidates), draw a set size
uniformly from 10..20 for each slice and render the ranking prompt over the
sampled passages. Teacher generation happens elsewhere; its outputs are
attached afterwards, either as full traces or reduced to the final ranking.

Every draw uses its own ``random.Random(f"{seed}:{query_id}:{slice}")`` so the
dataset does not depend on processing order.
"""

from __future__ import annotations

import json
import logging
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Literal, Mapping, Sequence

from listrank.io import PathLike
from listrank.model import Passage, Query, RunList
from listrank.parser import extract_final
from listrank.prompt import DEFAULT_TRUNCATE, build_prompt, truncate_passage
from listrank.rerank import DEFAULT_K_RRF, rrf_fuse

logger = logging.getLogger(__name__)

MIN_SET = 10
MAX_SET = 20
HEAD_SLICE = (1, 20)
MID_SLICE = (10, 30)

SubsetMode = Literal["prefix", "random"]


def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def dedup_queries(queries: Iterable[Query]) -> list[Query]:
    """Drop queries whose lowercased, whitespace-collapsed text was already seen."""
    seen: set[str] = set()
    kept = []
    for q in queries:
        key = _normalize(q.text)
        if key not in seen:
            seen.add(key)
            kept.append(q)
    return kept


def fuse_first_stages(runs: Sequence[RunList], k_rrf: float = DEFAULT_K_RRF) -> RunList:
    return rrf_fuse(runs, k_rrf, system_tag="fused")


def slice_candidates(run: RunList) -> tuple[list[str], list[str]] | None:
    """Head (ranks 1-20) and mid (ranks 10-30) slices; None when under 10 entries."""
    ids = run.doc_ids
    if len(ids) < MIN_SET:
        logger.warning("query %s: only %d candidates, skipped", run.query_id, len(ids))
        return None
    if len(ids) < MID_SLICE[1]:
        logger.warning(
            "query %s: %d candidates, slices truncated", run.query_id, len(ids)
        )
    head = ids[HEAD_SLICE[0] - 1:HEAD_SLICE[1]]
    mid = ids[MID_SLICE[0] - 1:MID_SLICE[1]]
    return head, mid


def sample_set(
    candidates: Sequence[str],
    rng: random.Random | int | str,
    mode: SubsetMode = "prefix",
) -> list[str] | None:
    """Draw n uniformly from [10, min(20, len)] and take that many candidates.

    ``prefix`` keeps the top n; ``random`` keeps n random members in slice order.
    Returns None (with a warning) for slices shorter than 10.
    """
    if len(candidates) < MIN_SET:
        logger.warning("slice of %d candidates is below the minimum of %d", len(candidates), MIN_SET)
        return None
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    n = rng.randint(MIN_SET, min(MAX_SET, len(candidates)))
    if mode == "prefix":
        return list(candidates[:n])
    if mode == "random":
        picked = sorted(rng.sample(range(len(candidates)), n))
        return [candidates[i] for i in picked]
    raise ValueError(f"unknown subset mode {mode!r}")


@dataclass
class TrainingRecord:
    query_id: str
    query: str
    slice: str
    passages: list[dict]
    prompt: str
    target: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> TrainingRecord:
        return cls(**json.loads(line))

    def rerender(self) -> str:
        passages = [Passage(p["doc_id"], p["text"]) for p in self.passages]
        return build_prompt(Query(self.query_id, self.query), passages).rendered


@dataclass
class SamplerStats:
    queries: int = 0
    usable_queries: int = 0
    records: int = 0
    skipped_slices: int = 0
    skipped_unresolvable: int = 0
    size_histogram: dict[int, int] = field(default_factory=dict)
    prompt_tokens: int = 0
    passage_tokens: int = 0

    def to_json(self) -> str:
        data = asdict(self)
        data["size_histogram"] = {str(k): v for k, v in sorted(self.size_histogram.items())}
        return json.dumps(data, indent=2) + "\n"


def make_record(
    query: Query,
    slice_tag: str,
    doc_ids: Sequence[str],
    passages: Mapping[str, Passage],
    truncate: int = DEFAULT_TRUNCATE,
) -> TrainingRecord:
    docs = [passages[d] for d in doc_ids]
    window = build_prompt(query, docs, truncate)
    items = [
        {"index": i, "doc_id": p.id, "text": truncate_passage(p.text, truncate)}
        for i, p in enumerate(docs, start=1)
    ]
    return TrainingRecord(query.id, query.text, slice_tag, items, window.rendered)


def build_records(
    queries: Iterable[Query],
    passages: Mapping[str, Passage],
    runs_per_system: Sequence[Mapping[str, RunList]],
    seed: int,
    mode: SubsetMode = "prefix",
    k_rrf: float = DEFAULT_K_RRF,
) -> tuple[list[TrainingRecord], SamplerStats]:
    stats = SamplerStats()
    sizes: Counter[int] = Counter()
    records: list[TrainingRecord] = []
    for query in dedup_queries(queries):
        stats.queries += 1
        system_runs = [runs[query.id] for runs in runs_per_system if query.id in runs]
        if not system_runs:
            logger.warning("query %s: no first-stage run, skipped", query.id)
            continue
        slices = slice_candidates(fuse_first_stages(system_runs, k_rrf))
        if slices is None:
            continue
        stats.usable_queries += 1
        for tag, candidates in zip(("head", "mid"), slices):
            chosen = sample_set(candidates, f"{seed}:{query.id}:{tag}", mode)
            if chosen is None:
                stats.skipped_slices += 1
                continue
            missing = [d for d in chosen if d not in passages]
            if missing:
                logger.warning("query %s/%s: unresolvable doc ids %s, skipped",
                               query.id, tag, missing[:5])
                stats.skipped_unresolvable += 1
                continue
            record = make_record(query, tag, chosen, passages)
            records.append(record)
            sizes[len(chosen)] += 1
            stats.prompt_tokens += len(record.prompt.split())
            stats.passage_tokens += sum(len(p["text"].split()) for p in record.passages)
    stats.records = len(records)
    stats.size_histogram = dict(sorted(sizes.items()))
    return records, stats


def emit_records(
    queries: Iterable[Query],
    passages: Mapping[str, Passage],
    runs_per_system: Sequence[Mapping[str, RunList]],
    seed: int,
    out_path: PathLike,
    mode: SubsetMode = "prefix",
    k_rrf: float = DEFAULT_K_RRF,
) -> SamplerStats:
    """Write one JSON line per (query, slice) to ``out_path`` and stats to ``<out>.stats.json``."""
    records, stats = build_records(queries, passages, runs_per_system, seed, mode, k_rrf)
    with open(out_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_json() + "\n")
    with open(f"{out_path}.stats.json", "w", encoding="utf-8") as fh:
        fh.write(stats.to_json())
    return stats


def read_records(path: PathLike) -> list[TrainingRecord]:
    with open(path, encoding="utf-8") as fh:
        return [TrainingRecord.from_json(line) for line in fh if line.strip()]


def extract_naive_target(teacher_output: str, n: int) -> str | None:
    """Canonical final ranking string from a teacher trace, or None if unparseable."""
    analysis = extract_final(teacher_output, n)
    if analysis.fallback_used or analysis.final is None:
        return None
    return analysis.final.render()


def attach_targets(
    records: Iterable[TrainingRecord],
    teacher_outputs: Mapping[tuple[str, str], str],
    naive: bool = False,
) -> tuple[list[TrainingRecord], int]:
    """Fill ``target`` from teacher outputs keyed by ``(query_id, slice)``.

    With ``naive`` only the extracted final ranking is kept, and records whose
    trace has no parseable ranking are dropped. Returns the records and the
    number excluded.
    """
    out: list[TrainingRecord] = []
    excluded = 0
    for rec in records:
        output = teacher_outputs.get((rec.query_id, rec.slice))
        if output is None:
            excluded += 1
            continue
        target = extract_naive_target(output, len(rec.passages)) if naive else output
        if target is None:
            logger.warning("query %s/%s: no final ranking in teacher output, excluded",
                           rec.query_id, rec.slice)
            excluded += 1
            continue
        out.append(TrainingRecord(rec.query_id, rec.query, rec.slice, rec.passages,
                                  rec.prompt, target))
    return out, excluded
