"""Recompute a results-table row: macro average over collections and the delta.

Example (five collections against a baseline average of 0.416):

    python3 scripts/reporting_math.py 0.662 0.643 0.440 0.434 0.447 --baseline 0.416
    0.525 (26%)
"""

from __future__ import annotations

import argparse

from listrank.evaluate import aggregate, format_delta, format_metric, percent_delta


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("values", type=float, nargs="+", help="per-collection nDCG@10")
    ap.add_argument("--baseline", type=float, help="baseline macro average")
    args = ap.parse_args()

    tags = {f"c{i}": f"c{i}" for i in range(len(args.values))}
    macro = aggregate(dict(zip(tags, args.values)), tags).macro_average
    line = format_metric(macro)
    if args.baseline is not None:
        line += f" ({format_delta(percent_delta(macro, args.baseline))})"
    print(line)


if __name__ == "__main__":
    main()
