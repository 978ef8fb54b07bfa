"""End-to-end run on the toy collection: index, BM25, rerank, evaluate.

Reranks BM25 top-``depth`` with the oracle backend (or the identity backend
with ``--backend identity``) and prints the nDCG@10 table against BM25. Every
step goes through the ``listrank`` CLI, so the work directory ends up with the
same artifacts and manifests a real experiment would produce.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from listrank.cli import main as cli
from listrank.toy import make_toy_collection


def step(*argv: str) -> None:
    code = cli(list(argv))
    if code != 0:
        sys.exit(f"step failed with exit code {code}: {' '.join(argv[:1])}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("workdir", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--depth", type=int, default=20)
    ap.add_argument("--window", type=int, default=20)
    ap.add_argument("--stride", type=int, default=10)
    ap.add_argument("--backend", choices=["oracle", "identity"], default="oracle")
    args = ap.parse_args()

    w = args.workdir
    files = {k: str(v) for k, v in make_toy_collection(seed=args.seed).write(w / "toy").items()}
    step("index", "--corpus", files["corpus"], "--out", str(w / "index"))
    step("search", "--index", str(w / "index"), "--queries", files["queries"],
         "--k", str(args.depth), "--out", str(w / "bm25.run"))
    step("rerank", "--run", str(w / "bm25.run"), "--corpus", files["corpus"],
         "--queries", files["queries"], "--backend", args.backend, "--qrels", files["qrels"],
         "--depth", str(args.depth), "--window", str(args.window), "--stride", str(args.stride),
         "--out", str(w / "rerank.run"), "--exchanges", str(w / "exchanges.jsonl"))
    step("eval", "--run", str(w / "rerank.run"), "--qrels", files["qrels"],
         "--baseline-run", str(w / "bm25.run"), "--out", str(w / "report.txt"))
    step("trace-stats", "--traces", str(w / "exchanges.jsonl"), "--out", str(w / "traces.csv"))


if __name__ == "__main__":
    main()
