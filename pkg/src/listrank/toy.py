"""Synthetic graded test collection for end-to-end checks.

Each document belongs to one topic and has a grade (0-3) for that topic's
query. Keyword counts only loosely follow the grade, and every document also
carries one to three keywords of random topics as distractors, so BM25 gets
the order partly wrong.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from listrank.io import CorpusRecord, write_corpus, write_qrels, write_queries
from listrank.model import Qrels, Query


@dataclass
class ToyCollection:
    corpus: list[CorpusRecord]
    queries: list[Query]
    qrels: Qrels

    def write(self, directory: str | Path) -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": directory / "corpus.jsonl",
            "queries": directory / "queries.tsv",
            "qrels": directory / "qrels.txt",
        }
        write_corpus(self.corpus, paths["corpus"])
        write_queries(self.queries, paths["queries"])
        write_qrels(self.qrels, paths["qrels"])
        return paths


def make_toy_collection(
    n_docs: int = 200, n_topics: int = 20, seed: int = 0, doc_len: int = 40
) -> ToyCollection:
    rng = random.Random(seed)
    background = [f"w{i:03d}" for i in range(400)]
    topics = [[f"t{t:02d}k{j}" for j in range(5)] for t in range(n_topics)]

    corpus: list[CorpusRecord] = []
    qrels = Qrels()
    for d in range(n_docs):
        topic = d % n_topics
        grade = rng.choice((0, 0, 1, 1, 2, 3))
        words = rng.choices(background, k=doc_len)
        words += rng.choices(topics[topic][:3], k=max(0, grade + rng.randint(-1, 1)))
        for _ in range(rng.randint(1, 3)):
            words.append(rng.choice(topics[rng.randrange(n_topics)][:3]))
        rng.shuffle(words)
        doc_id = f"doc{d:04d}"
        corpus.append(CorpusRecord(doc_id, " ".join(words), title=f"document {d}"))
        qrels.set(f"q{topic:02d}", doc_id, grade)

    queries = [Query(f"q{t:02d}", " ".join(topics[t][:3])) for t in range(n_topics)]
    return ToyCollection(corpus, queries, qrels)
