"""In-memory BM25 over a whitespace-tokenized inverted index.

Scoring uses the Lucene-style idf ``ln(1 + (N - df + 0.5) / (df + 0.5))`` so
term weights never go negative. Query terms are treated as a multiset:
a repeated query term contributes once per occurrence.
"""

from __future__ import annotations

import heapq
import json
import math
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from listrank.io import CorpusRecord, PathLike
from listrank.model import ParseError, Query, RunList, StructuralError

INDEX_FORMAT = "listrank-bm25-index"
INDEX_VERSION = 1

_PUNCT = string.punctuation + "“”‘’«»…"


def tokenize(text: str) -> list[str]:
    tokens = (tok.strip(_PUNCT) for tok in text.lower().split())
    return [tok for tok in tokens if tok]


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self) -> None:
        if not self.k1 > 0:
            raise StructuralError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise StructuralError(f"b must be in [0, 1], got {self.b}")


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    doc_lengths: list[int] = field(default_factory=list)
    doc_ids: list[str] = field(default_factory=list)

    @property
    def N(self) -> int:
        return len(self.doc_ids)

    @property
    def avgdl(self) -> float:
        return sum(self.doc_lengths) / len(self.doc_lengths) if self.doc_lengths else 0.0

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.N - df + 0.5) / (df + 0.5))

    def save(self, path: PathLike) -> None:
        """Write the line-based index format (header, documents, postings)."""
        with open(path, "w", encoding="utf-8") as fh:
            header = {"format": INDEX_FORMAT, "version": INDEX_VERSION, "N": self.N,
                      "terms": len(self.postings)}
            fh.write(json.dumps(header) + "\n")
            for doc_id, length in zip(self.doc_ids, self.doc_lengths):
                fh.write(json.dumps(["d", doc_id, length], ensure_ascii=False) + "\n")
            for term in sorted(self.postings):
                flat = [x for pair in self.postings[term] for x in pair]
                fh.write(json.dumps(["t", term, flat], ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: PathLike) -> InvertedIndex:
        index = cls()
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline() or "{}")
            if header.get("format") != INDEX_FORMAT:
                raise ParseError(f"{path} is not a {INDEX_FORMAT} file", 1)
            if header.get("version") != INDEX_VERSION:
                raise ParseError(f"unsupported index version {header.get('version')}", 1)
            for lineno, line in enumerate(fh, start=2):
                kind, key, value = json.loads(line)
                if kind == "d":
                    index.doc_ids.append(key)
                    index.doc_lengths.append(value)
                elif kind == "t":
                    index.postings[key] = list(zip(value[0::2], value[1::2]))
                else:
                    raise ParseError(f"unknown record kind {kind!r}", lineno)
        if index.N != header["N"]:
            raise ParseError(f"header says N={header['N']}, found {index.N} documents")
        return index


def build_index(corpus: Iterable[CorpusRecord]) -> InvertedIndex:
    index = InvertedIndex()
    seen: set[str] = set()
    for ordinal, record in enumerate(corpus):
        if record.id in seen:
            raise StructuralError(f"duplicate document id {record.id!r}")
        seen.add(record.id)
        tokens = tokenize(record.full_text)
        index.doc_ids.append(record.id)
        index.doc_lengths.append(len(tokens))
        for term, tf in Counter(tokens).items():
            index.postings.setdefault(term, []).append((ordinal, tf))
    return index


def score_all(index: InvertedIndex, query_text: str, params: Bm25Params) -> dict[int, float]:
    """BM25 score for every document matching at least one query term."""
    scores: dict[int, float] = {}
    avgdl = index.avgdl
    k1, b = params.k1, params.b
    for term, qtf in Counter(tokenize(query_text)).items():
        postings = index.postings.get(term)
        if not postings:
            continue
        idf = index.idf(term)
        for ordinal, tf in postings:
            norm = k1 * (1.0 - b + b * index.doc_lengths[ordinal] / avgdl)
            scores[ordinal] = scores.get(ordinal, 0.0) + qtf * idf * tf * (k1 + 1.0) / (tf + norm)
    return scores


def search(
    index: InvertedIndex,
    query: Query,
    k: int,
    params: Bm25Params = Bm25Params(),
    system_tag: str = "bm25",
) -> RunList:
    if k < 1:
        raise StructuralError(f"k must be >= 1, got {k}")
    scores = score_all(index, query.text, params)
    top = heapq.nsmallest(
        k, scores.items(), key=lambda item: (-item[1], index.doc_ids[item[0]])
    )
    return RunList.from_scores(
        query.id, {index.doc_ids[ordinal]: score for ordinal, score in top}, system_tag
    )
