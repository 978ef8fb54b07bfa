"""Listwise ranking prompt rendering.

The canonical instruction block ships as ``assets/rank_prompt.txt`` and is
used verbatim. A rendered prompt is::

    <instruction block>Query: <query>

    [1] <passage 1>

    [2] <passage 2>
    ...

Passage text is cut to the first 450 whitespace tokens and re-joined with
single spaces, which also guarantees no passage can open a line with a
fake ``[i] `` header.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

from listrank.model import Passage, Query, StructuralError

DEFAULT_TRUNCATE = 450
QUERY_PREFIX = "Query: "


@lru_cache(maxsize=1)
def canonical_instruction() -> str:
    return resources.files("listrank").joinpath("assets/rank_prompt.txt").read_text("utf-8")


def load_template(path: str | Path | None) -> str:
    """Instruction block from ``path``, or the canonical one when ``path`` is None.

    Alternate templates are non-canonical: models trained on the canonical
    prompt are not expected to behave the same under them.
    """
    if path is None:
        return canonical_instruction()
    return Path(path).read_text(encoding="utf-8")


def truncate_passage(text: str, limit: int = DEFAULT_TRUNCATE) -> str:
    if limit < 1:
        raise StructuralError(f"truncation limit must be >= 1, got {limit}")
    return " ".join(text.split()[:limit])


@dataclass(frozen=True)
class PromptWindow:
    query: Query
    passages: tuple[tuple[int, Passage], ...]
    rendered: str
    instruction: str

    @property
    def body(self) -> str:
        """Everything after the instruction block (query and numbered passages)."""
        return self.rendered[len(self.instruction):]

    def messages(self, split_system: bool = False) -> list[dict[str, str]]:
        if split_system:
            return [
                {"role": "system", "content": self.instruction.rstrip()},
                {"role": "user", "content": self.body},
            ]
        return [{"role": "user", "content": self.rendered}]


def render_prompt(query_text: str, passage_texts: Sequence[str], instruction: str) -> str:
    parts = [instruction, QUERY_PREFIX, " ".join(query_text.split())]
    for i, text in enumerate(passage_texts, start=1):
        parts.append(f"\n\n[{i}] {text}")
    return "".join(parts)


def build_prompt(
    query: Query,
    passages: Sequence[Passage],
    limit: int = DEFAULT_TRUNCATE,
    instruction: str | None = None,
) -> PromptWindow:
    if not passages:
        raise StructuralError("cannot build a prompt for an empty passage list")
    instruction = canonical_instruction() if instruction is None else instruction
    truncated = [truncate_passage(p.text, limit) for p in passages]
    rendered = render_prompt(query.text, truncated, instruction)
    numbered = tuple(
        (i, Passage(p.id, text, p.language))
        for i, (p, text) in enumerate(zip(passages, truncated), start=1)
    )
    return PromptWindow(query, numbered, rendered, instruction)
