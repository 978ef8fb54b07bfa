"""Retrieve-and-rerank toolkit for listwise reasoning rerankers."""

__version__ = "0.1.0"

from listrank.model import (  # noqa: E402
    ParseError,
    Passage,
    Qrels,
    Query,
    RunEntry,
    RunList,
    StructuralError,
    TiedRanking,
    identity_ranking,
    ranking_to_runlist,
)

__all__ = [
    "ParseError",
    "Passage",
    "Qrels",
    "Query",
    "RunEntry",
    "RunList",
    "StructuralError",
    "TiedRanking",
    "identity_ranking",
    "ranking_to_runlist",
]
