"""Write the synthetic toy collection (corpus, queries, graded qrels) to a directory."""

from __future__ import annotations

import argparse

from listrank.toy import make_toy_collection


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", help="output directory")
    ap.add_argument("--docs", type=int, default=200)
    ap.add_argument("--topics", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    toy = make_toy_collection(args.docs, args.topics, args.seed)
    for name, path in toy.write(args.out).items():
        print(f"{name:8s} {path}")


if __name__ == "__main__":
    main()
