"""Shared data model: queries, passages, run lists, tied rankings and qrels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence


class ListrankError(Exception):
    """Base class for all toolkit errors."""


class StructuralError(ListrankError, ValueError):
    """Input violates a structural precondition (bad index, duplicate id, ...)."""


class ParseError(ListrankError, ValueError):
    """Text input could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Query:
    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise StructuralError("query id must be non-empty")
        if not self.text.strip():
            raise StructuralError(f"query {self.id!r} has empty text")


@dataclass(frozen=True)
class Passage:
    id: str
    text: str
    language: str | None = None

    @property
    def is_empty(self) -> bool:
        return not self.text.strip()


@dataclass(frozen=True)
class RunEntry:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class RunList:
    """Ranked list for one query; entries are sorted by rank 1..n."""

    query_id: str
    entries: tuple[RunEntry, ...] = ()
    system_tag: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        seen: set[str] = set()
        prev_score = float("inf")
        for pos, entry in enumerate(self.entries, start=1):
            if entry.rank != pos:
                raise StructuralError(
                    f"run for {self.query_id!r}: expected rank {pos}, got {entry.rank}"
                )
            if entry.doc_id in seen:
                raise StructuralError(
                    f"run for {self.query_id!r}: duplicate doc_id {entry.doc_id!r}"
                )
            if entry.score > prev_score:
                raise StructuralError(
                    f"run for {self.query_id!r}: score increases at rank {pos}"
                )
            seen.add(entry.doc_id)
            prev_score = entry.score

    @classmethod
    def from_ranked_ids(
        cls, query_id: str, doc_ids: Sequence[str], system_tag: str = ""
    ) -> RunList:
        """Build a run whose scores are derived from position (n, n-1, ..., 1)."""
        n = len(doc_ids)
        entries = tuple(
            RunEntry(doc_id, float(n - pos), pos + 1) for pos, doc_id in enumerate(doc_ids)
        )
        return cls(query_id, entries, system_tag)

    @classmethod
    def from_scores(
        cls, query_id: str, scores: Mapping[str, float], system_tag: str = ""
    ) -> RunList:
        """Sort by descending score, ties by ascending doc_id, and number ranks."""
        ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        entries = tuple(
            RunEntry(doc_id, float(score), pos)
            for pos, (doc_id, score) in enumerate(ordered, start=1)
        )
        return cls(query_id, entries, system_tag)

    @property
    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    def head(self, k: int) -> RunList:
        return RunList(self.query_id, self.entries[:k], self.system_tag)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[RunEntry]:
        return iter(self.entries)


@dataclass(frozen=True)
class TiedRanking:
    """Weak ordering over 1-based window-local indices, best group first."""

    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        groups = tuple(tuple(g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        seen: set[int] = set()
        for group in groups:
            if not group:
                raise StructuralError("tie groups must be non-empty")
            for idx in group:
                if idx < 1:
                    raise StructuralError(f"index {idx} is not a positive window index")
                if idx in seen:
                    raise StructuralError(f"index {idx} appears more than once")
                seen.add(idx)

    @property
    def indices(self) -> list[int]:
        return [idx for group in self.groups for idx in group]

    def check_window(self, n: int) -> None:
        for idx in self.indices:
            if idx > n:
                raise StructuralError(f"index {idx} out of range for window of size {n}")

    def render(self) -> str:
        """Canonical ranking string, e.g. ``[3] > [2] > [4] = [1] > [5]``."""
        return " > ".join(" = ".join(f"[{idx}]" for idx in group) for group in self.groups)

    def __str__(self) -> str:
        return self.render()


def identity_ranking(n: int) -> TiedRanking:
    if n < 1:
        raise StructuralError(f"identity ranking needs n >= 1, got {n}")
    return TiedRanking(tuple((i,) for i in range(1, n + 1)))


def ranking_to_runlist(
    ranking: TiedRanking,
    window: Sequence[tuple[str, int]],
    base_score: float = 0.0,
    query_id: str = "",
    system_tag: str = "",
) -> RunList:
    """Order a window of ``(doc_id, first_stage_rank)`` pairs by ``ranking``.

    Members of a tie group are ordered by first-stage rank; indices the
    ranking never mentions follow all groups, also in first-stage order.
    Scores are ``base_score + n - position`` so they strictly decrease.
    """
    n = len(window)
    doc_ids = [doc_id for doc_id, _ in window]
    if len(set(doc_ids)) != n:
        raise StructuralError("window doc_ids must be unique")
    ranking.check_window(n)

    def first_stage(idx: int) -> int:
        return window[idx - 1][1]

    order: list[int] = []
    for group in ranking.groups:
        order.extend(sorted(group, key=first_stage))
    mentioned = set(order)
    order.extend(sorted((i for i in range(1, n + 1) if i not in mentioned), key=first_stage))

    entries = tuple(
        RunEntry(window[idx - 1][0], base_score + float(n - pos), pos + 1)
        for pos, idx in enumerate(order)
    )
    return RunList(query_id, entries, system_tag)


@dataclass
class Qrels:
    """Graded judgments ``query_id -> doc_id -> grade``; unjudged pairs grade 0."""

    judgments: dict[str, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for qid, docs in self.judgments.items():
            for doc_id, grade in docs.items():
                if grade < 0:
                    raise StructuralError(f"negative grade for ({qid}, {doc_id})")

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, int]]) -> Qrels:
        qrels = cls()
        for qid, doc_id, grade in triples:
            qrels.set(qid, doc_id, grade)
        return qrels

    def set(self, query_id: str, doc_id: str, grade: int) -> None:
        if grade < 0:
            raise StructuralError(f"negative grade for ({query_id}, {doc_id})")
        self.judgments.setdefault(query_id, {})[doc_id] = grade

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.judgments.get(query_id, {}).get(doc_id, 0)

    def for_query(self, query_id: str) -> dict[str, int]:
        return self.judgments.get(query_id, {})

    def __contains__(self, query_id: object) -> bool:
        return query_id in self.judgments

    def __len__(self) -> int:
        return sum(len(docs) for docs in self.judgments.values())
