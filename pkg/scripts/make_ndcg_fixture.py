"""Regenerate the 20-query nDCG fixture and its trec_eval reference values.

Writes tests/fixtures/ndcg20.qrels, ndcg20.run and ndcg20_reference.json.
The reference numbers come from pytrec_eval (trec_eval compiled as a Python
extension), so this script needs the ``test`` extra installed.
"""

from __future__ import annotations

import argparse
import json
import random
from pathlib import Path

import pytrec_eval

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def build(seed: int) -> tuple[dict, dict]:
    rng = random.Random(seed)
    qrels, runs = {}, {}
    for q in range(20):
        qid = f"Q{q:02d}"
        docs = [f"D{q:02d}-{i:03d}" for i in range(60)]
        judged = rng.sample(docs, rng.randint(8, 40))
        qrels[qid] = {d: rng.choice([0, 0, 0, 1, 1, 2, 3]) for d in judged}
        ranked = rng.sample(docs, rng.randint(5, 50))
        # distinct scores so trec_eval's tie order never matters
        runs[qid] = {d: round(50.0 - i * 0.37, 4) for i, d in enumerate(ranked)}
    if all(v == 0 for v in qrels["Q00"].values()):
        qrels["Q00"][next(iter(qrels["Q00"]))] = 2
    return qrels, runs


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1019)
    ap.add_argument("--out", type=Path, default=FIXTURES)
    args = ap.parse_args()

    qrels, runs = build(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "ndcg20.qrels", "w") as fh:
        for qid, judged in qrels.items():
            for doc, grade in judged.items():
                fh.write(f"{qid} 0 {doc} {grade}\n")
    with open(args.out / "ndcg20.run", "w") as fh:
        for qid, scores in runs.items():
            for rank, (doc, score) in enumerate(scores.items(), start=1):
                fh.write(f"{qid} Q0 {doc} {rank} {score} fixture\n")
    reference = pytrec_eval.RelevanceEvaluator(qrels, {"ndcg_cut.10"}).evaluate(runs)
    values = {qid: reference[qid]["ndcg_cut_10"] for qid in sorted(reference)}
    (args.out / "ndcg20_reference.json").write_text(json.dumps(values, indent=2) + "\n")
    print(f"wrote {len(values)} queries to {args.out}")


if __name__ == "__main__":
    main()
