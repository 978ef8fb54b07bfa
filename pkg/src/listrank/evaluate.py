"""nDCG@k, per-collection macro averages, deltas and token accounting.

nDCG uses linear gain ``grade / log2(rank + 1)`` with the ideal ordering
built from every judged document of the query, as trec_eval's
``ndcg_cut`` does. Evaluators using exponential gain ``2^grade - 1`` will
report different numbers on multi-grade qrels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import fmean
from typing import Mapping, Sequence

from listrank.model import Qrels, RunList, StructuralError


def dcg(grades: Sequence[int], k: int) -> float:
    return sum(g / math.log2(i + 2) for i, g in enumerate(grades[:k]))


def ndcg_at_k(run: RunList, qrels: Qrels, k: int = 10) -> float:
    if not len(run):
        raise StructuralError(f"cannot evaluate empty run for query {run.query_id!r}")
    judged = qrels.for_query(run.query_id)
    ideal = dcg(sorted((g for g in judged.values() if g > 0), reverse=True), k)
    if ideal == 0:
        return 0.0
    return dcg([judged.get(d, 0) for d in run.doc_ids[:k]], k) / ideal


@dataclass
class MetricReport:
    per_query: dict[str, float]
    per_collection: dict[str, float]
    macro_average: float
    delta_vs_baseline: float | None = None
    baseline_macro: float | None = None
    baseline_per_collection: dict[str, float] = field(default_factory=dict)
    metric: str = "ndcg_cut_10"

    def table(self) -> str:
        """Aligned text table: one row per collection, then the macro average."""
        names = list(self.per_collection) + ["Avg."]
        width = max(len(n) for n in names + ["collection"])
        header = f"{'collection':<{width}}  {'system':>7}"
        if self.baseline_macro is not None:
            header += f"  {'baseline':>8}"
        lines = [header]
        for name, value in self.per_collection.items():
            row = f"{name:<{width}}  {format_metric(value):>7}"
            if self.baseline_macro is not None:
                base = self.baseline_per_collection.get(name)
                row += f"  {format_metric(base) if base is not None else '--':>8}"
            lines.append(row)
        row = f"{'Avg.':<{width}}  {format_metric(self.macro_average):>7}"
        if self.baseline_macro is not None:
            row += f"  {format_metric(self.baseline_macro):>8}"
        if self.delta_vs_baseline is not None:
            row += f"  ({format_delta(self.delta_vs_baseline)})"
        lines.append(row)
        return "\n".join(lines) + "\n"

    def csv(self) -> str:
        rows = ["kind,key,value"]
        rows += [f"query,{q},{v:.6f}" for q, v in self.per_query.items()]
        rows += [f"collection,{c},{v:.6f}" for c, v in self.per_collection.items()]
        rows.append(f"macro,all,{self.macro_average:.6f}")
        if self.delta_vs_baseline is not None:
            rows.append(f"delta,all,{self.delta_vs_baseline:.6f}")
        return "\n".join(rows) + "\n"


def aggregate(per_query: Mapping[str, float], collection_map: Mapping[str, str]) -> MetricReport:
    """Unweighted mean per collection, then unweighted mean over collections."""
    buckets: dict[str, list[float]] = {}
    for qid, value in per_query.items():
        if qid not in collection_map:
            raise StructuralError(f"query {qid!r} has no collection tag")
        buckets.setdefault(collection_map[qid], []).append(value)
    if not buckets:
        raise StructuralError("nothing to aggregate")
    per_collection = {tag: fmean(values) for tag, values in buckets.items()}
    return MetricReport(dict(per_query), per_collection, fmean(per_collection.values()))


def percent_delta(system_macro: float, baseline_macro: float) -> float:
    """Relative change as a fraction, e.g. 0.262 for +26%."""
    if baseline_macro <= 0:
        raise StructuralError(f"baseline must be positive, got {baseline_macro}")
    return system_macro / baseline_macro - 1.0


def format_metric(value: float) -> str:
    return f"{value:.3f}"


def format_delta(delta: float) -> str:
    pct = round(delta * 100)
    return f"{pct + 0}%"  # + 0 turns -0 into 0


def evaluate_runs(
    runs: Mapping[str, RunList],
    qrels: Qrels,
    k: int = 10,
    collection_map: Mapping[str, str] | None = None,
) -> MetricReport:
    """Score every run whose query has judgments; unjudged queries are skipped."""
    per_query = {
        qid: ndcg_at_k(run, qrels, k) for qid, run in runs.items() if qid in qrels and len(run)
    }
    tags = collection_map or {qid: "all" for qid in per_query}
    report = aggregate(per_query, tags)
    report.metric = f"ndcg_cut_{k}"
    return report


def compare(report: MetricReport, baseline: MetricReport) -> MetricReport:
    report.baseline_macro = baseline.macro_average
    report.baseline_per_collection = dict(baseline.per_collection)
    report.delta_vs_baseline = percent_delta(report.macro_average, baseline.macro_average)
    return report


@dataclass(frozen=True)
class TokenReport:
    calls: int
    passages: int
    per_call_input: float
    per_call_output: float
    per_passage_input: float
    per_passage_output: float

    @property
    def output_input_ratio(self) -> float:
        return self.per_call_output / self.per_call_input if self.per_call_input else math.inf


def token_report(exchanges: Sequence, passage_counts: Sequence[int]) -> TokenReport:
    """Average input/output tokens per call and per passage.

    ``exchanges`` are objects with ``input_tokens`` and ``output_tokens``.
    """
    if not exchanges:
        raise StructuralError("token report needs at least one exchange")
    if len(exchanges) != len(passage_counts):
        raise StructuralError("exchanges and passage_counts must be aligned")
    total_in = sum(e.input_tokens for e in exchanges)
    total_out = sum(e.output_tokens for e in exchanges)
    n_passages = sum(passage_counts)
    if n_passages <= 0:
        raise StructuralError("total passage count must be positive")
    calls = len(exchanges)
    return TokenReport(
        calls, n_passages,
        total_in / calls, total_out / calls,
        total_in / n_passages, total_out / n_passages,
    )
