"""Readers and writers for corpora, queries, TREC run files and qrels.

Formats
-------
corpus   JSON lines, one record per line: ``{"id": ..., "text": ..., "title": ...}``
         (``title`` optional; prepended to the text with one space).
queries  JSON lines ``{"id": ..., "text": ...}`` or TSV ``qid<TAB>text``.
run      ``qid Q0 docid rank score tag`` (whitespace separated).
qrels    ``qid iteration docid grade`` (whitespace separated).
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from listrank.model import ParseError, Passage, Qrels, Query, RunList, StructuralError

logger = logging.getLogger(__name__)

PathLike = str | os.PathLike


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    text: str
    title: str | None = None

    @property
    def full_text(self) -> str:
        if self.title:
            return f"{self.title} {self.text}" if self.text else self.title
        return self.text

    def to_passage(self) -> Passage:
        return Passage(self.id, self.full_text)


def _json_lines(path: PathLike) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("record is not a JSON object", lineno)
            yield lineno, obj


def read_corpus(path: PathLike) -> Iterator[CorpusRecord]:
    seen: dict[str, int] = {}
    for lineno, obj in _json_lines(path):
        doc_id, text, title = obj.get("id"), obj.get("text"), obj.get("title")
        if not isinstance(doc_id, str) or not doc_id:
            raise ParseError("missing or non-string 'id'", lineno)
        if not isinstance(text, str):
            raise ParseError("missing or non-string 'text'", lineno)
        if title is not None and not isinstance(title, str):
            raise ParseError("'title' must be a string", lineno)
        if doc_id in seen:
            raise StructuralError(
                f"line {lineno}: duplicate id {doc_id!r} (first seen on line {seen[doc_id]})"
            )
        seen[doc_id] = lineno
        record = CorpusRecord(doc_id, text, title)
        if not record.full_text.strip():
            logger.warning("corpus line %d: document %r has empty text", lineno, doc_id)
        yield record


def load_passages(path: PathLike) -> dict[str, Passage]:
    return {rec.id: rec.to_passage() for rec in read_corpus(path)}


def write_corpus(records: Iterable[CorpusRecord], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {"id": rec.id, "text": rec.text}
            if rec.title is not None:
                obj["title"] = rec.title
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_queries(path: PathLike) -> list[Query]:
    """Read queries from JSON lines (``.jsonl``/``.json``) or ``qid<TAB>text`` TSV."""
    queries: list[Query] = []
    seen: set[str] = set()
    if Path(path).suffix in {".jsonl", ".json"}:
        rows: Iterable[tuple[int, str, str]] = (
            (lineno, str(obj.get("id", "")), str(obj.get("text", "")))
            for lineno, obj in _json_lines(path)
        )
    else:
        rows = _tsv_queries(path)
    for lineno, qid, text in rows:
        if not qid or not text.strip():
            raise ParseError("query needs a non-empty id and text", lineno)
        if qid in seen:
            raise StructuralError(f"line {lineno}: duplicate query id {qid!r}")
        seen.add(qid)
        queries.append(Query(qid, text))
    return queries


def _tsv_queries(path: PathLike) -> Iterator[tuple[int, str, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            qid, sep, text = line.partition("\t")
            if not sep:
                raise ParseError("expected 'qid<TAB>text'", lineno)
            yield lineno, qid.strip(), text


def write_queries(queries: Iterable[Query], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in queries:
            if Path(path).suffix in {".jsonl", ".json"}:
                fh.write(json.dumps({"id": q.id, "text": q.text}, ensure_ascii=False) + "\n")
            else:
                fh.write(f"{q.id}\t{' '.join(q.text.split())}\n")


def read_run(path: PathLike) -> dict[str, RunList]:
    """Read a TREC run; ranks are recomputed from scores (ties by doc_id)."""
    scores: dict[str, dict[str, float]] = {}
    tags: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ParseError(f"expected 6 columns, got {len(parts)}", lineno)
            qid, _q0, doc_id, rank, score, tag = parts
            try:
                int(rank)
            except ValueError:
                raise ParseError(f"non-integer rank {rank!r}", lineno) from None
            try:
                value = float(score)
            except ValueError:
                raise ParseError(f"non-numeric score {score!r}", lineno) from None
            per_query = scores.setdefault(qid, {})
            if doc_id in per_query:
                raise StructuralError(f"line {lineno}: duplicate doc {doc_id!r} for query {qid!r}")
            per_query[doc_id] = value
            tags.setdefault(qid, tag)
    return {qid: RunList.from_scores(qid, docs, tags[qid]) for qid, docs in scores.items()}


def write_run(
    runs: Mapping[str, RunList] | Iterable[RunList],
    system_tag: str | None,
    path: PathLike,
) -> None:
    """Write runs in TREC format; ``system_tag`` overrides each run's own tag."""
    items = runs.values() if isinstance(runs, Mapping) else runs
    with open(path, "w", encoding="utf-8") as fh:
        for run in items:
            tag = system_tag or run.system_tag or "listrank"
            for entry in run.entries:
                fh.write(f"{run.query_id} Q0 {entry.doc_id} {entry.rank} {entry.score!r} {tag}\n")


def read_qrels(path: PathLike) -> Qrels:
    qrels = Qrels()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ParseError(f"expected 4 columns, got {len(parts)}", lineno)
            qid, _iteration, doc_id, grade_text = parts
            try:
                grade = int(grade_text)
            except ValueError:
                raise ParseError(f"non-integer grade {grade_text!r}", lineno) from None
            if grade < 0:
                raise ParseError(f"negative grade {grade}", lineno)
            if doc_id in qrels.for_query(qid):
                logger.warning(
                    "qrels line %d: duplicate judgment for (%s, %s); keeping later grade %d",
                    lineno, qid, doc_id, grade,
                )
            qrels.set(qid, doc_id, grade)
    return qrels


def write_qrels(qrels: Qrels, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid, docs in qrels.judgments.items():
            for doc_id, grade in docs.items():
                fh.write(f"{qid} 0 {doc_id} {grade}\n")
