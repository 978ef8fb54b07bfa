"""Parsing tie-aware rankings (``[3] > [2] > [4] = [1] > [5]``) out of model output."""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from listrank.model import ParseError, TiedRanking, identity_ranking

logger = logging.getLogger(__name__)

_MEMBER = r"\[\d+\]"
RANKING_RE = re.compile(rf"{_MEMBER}(?:\s*[>=]\s*{_MEMBER})*")
_TOKEN_RE = re.compile(r"\[(\d+)\]|([>=])")

THINK_END_MARKERS = ("</think>", "</thinking>", "</reasoning>", "◁/think▷")
# decoration models put around an answer line; stripped before the full-line test
_LINE_DECORATION = " \t`*\"'."

DEFAULT_MIN_INDICES = 2


def _tokens(expr: str) -> list[tuple[str, str]]:
    return [(m.group(1) or "", m.group(2) or "") for m in _TOKEN_RE.finditer(expr)]


def parse_ranking(s: str, n: int) -> TiedRanking:
    """Parse the first ranking expression in ``s`` against a window of size ``n``.

    Duplicate indices keep their first occurrence and out-of-range indices are
    dropped; both are logged as warnings. Missing indices are not filled in.
    """
    if n < 1:
        raise ParseError(f"window size must be >= 1, got {n}")
    match = RANKING_RE.search(s)
    if match is None:
        raise ParseError(f"no ranking found in {s[:80]!r}")

    groups: list[list[int]] = [[]]
    seen: set[int] = set()
    for digits, sep in _tokens(match.group(0)):
        if sep == ">":
            groups.append([])
            continue
        if sep == "=":
            continue
        idx = int(digits)
        if not 1 <= idx <= n:
            logger.warning("dropping out-of-range index [%d] (window size %d)", idx, n)
        elif idx in seen:
            logger.warning("dropping duplicate index [%d]", idx)
        else:
            seen.add(idx)
            groups[-1].append(idx)

    kept = tuple(tuple(g) for g in groups if g)
    if not kept:
        raise ParseError(f"no valid index in {match.group(0)[:80]!r} for window size {n}")
    return TiedRanking(kept)


def count_indices(expr: str) -> int:
    return sum(1 for digits, _ in _tokens(expr) if digits)


@dataclass(frozen=True)
class TraceAnalysis:
    ranking_count: int
    final: TiedRanking | None
    fallback_used: bool


def _answer_region(output: str) -> str | None:
    ends = [(output.rfind(m), m) for m in THINK_END_MARKERS]
    pos, marker = max(ends)
    return output[pos + len(marker):] if pos >= 0 else None


def _full_line_rankings(text: str) -> list[str]:
    lines = (line.strip(_LINE_DECORATION) for line in text.splitlines())
    return [line for line in lines if line and RANKING_RE.fullmatch(line)]


def _last_parseable(candidates: Iterable[str], n: int) -> tuple[TiedRanking, str] | None:
    for expr in reversed(list(candidates)):
        try:
            return parse_ranking(expr, n), expr
        except ParseError:
            continue
    return None


def extract_final(
    output: str, n: int, min_indices: int = DEFAULT_MIN_INDICES
) -> TraceAnalysis:
    """Find the final ranking in a (possibly reasoning) model output.

    The last full-line ranking after the thinking block wins; without a
    thinking block the whole output is searched. Failing that, the last
    ranking anywhere (including inside prose) is used, and failing that the
    identity ranking is returned with ``fallback_used`` set.

    ``ranking_count`` counts every ranking string with at least
    ``min_indices`` indices, embedded ones included. A shorter string chosen
    as the final answer (e.g. ``[1]`` for a one-passage window) is counted too.
    """
    embedded = [m.group(0) for m in RANKING_RE.finditer(output)]
    count = sum(1 for expr in embedded if count_indices(expr) >= min_indices)

    region = _answer_region(output)
    found = _last_parseable(_full_line_rankings(output if region is None else region), n)
    if found is None:
        found = _last_parseable(
            (e for e in embedded if count_indices(e) >= min(min_indices, n)), n
        )
    if found is None:
        logger.warning("no parseable ranking in output; using identity order for %d passages", n)
        return TraceAnalysis(count, identity_ranking(n), True)

    ranking, expr = found
    if count_indices(expr) < min_indices:
        count += 1
    return TraceAnalysis(count, ranking, False)


@dataclass(frozen=True)
class TraceHistogram:
    counts: dict[int, int] = field(default_factory=dict)
    total: int = 0

    @property
    def single_fraction(self) -> float:
        return self.counts.get(1, 0) / self.total if self.total else 0.0

    def to_csv(self) -> str:
        rows = ["ranking_count,queries"]
        rows += [f"{k},{v}" for k, v in sorted(self.counts.items())]
        return "\n".join(rows) + "\n"


def trace_histogram(analyses: Iterable[TraceAnalysis]) -> TraceHistogram:
    counts = Counter(a.ranking_count for a in analyses)
    return TraceHistogram(dict(sorted(counts.items())), sum(counts.values()))
