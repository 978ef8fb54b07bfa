"""Command-line entry point: ``listrank <subcommand> [options]``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error
(unparseable or inconsistent input files), 4 backend error.
Every subcommand writes ``<out>.manifest.json`` next to its main output.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from pathlib import Path
from typing import Callable, Sequence

from listrank import __version__
from listrank.backends import (
    Backend,
    BackendError,
    HttpBackend,
    IdentityBackend,
    OracleBackend,
    ScriptedBackend,
)
from listrank.bm25 import Bm25Params, InvertedIndex, build_index, search
from listrank.config import ConfigError, PipelineConfig, apply_config_file
from listrank.evaluate import compare, evaluate_runs
from listrank.io import load_passages, read_corpus, read_qrels, read_queries, read_run, write_run
from listrank.model import ListrankError
from listrank.parser import extract_final, trace_histogram
from listrank.prompt import load_template
from listrank.rerank import RerankSettings, rerank_batch, rrf_fuse
from listrank.sampler import emit_records

logger = logging.getLogger("listrank")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_BACKEND = 0, 2, 3, 4


def write_manifest(cfg: PipelineConfig, extra: dict | None = None) -> None:
    if not cfg.out:
        return
    manifest = {
        "command": cfg.command,
        "config": cfg.snapshot(),
        "versions": {"listrank": __version__, "python": platform.python_version()},
    }
    if extra:
        manifest.update(extra)
    Path(f"{cfg.out}.manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def cmd_index(cfg: PipelineConfig) -> dict:
    cfg.require_existing("corpus")
    cfg.require("out")
    index = build_index(read_corpus(cfg.corpus))
    index.save(cfg.out)
    logger.info("indexed %d documents, %d terms", index.N, len(index.postings))
    return {"documents": index.N, "terms": len(index.postings)}


def cmd_search(cfg: PipelineConfig) -> dict:
    cfg.require_existing("index", "queries")
    cfg.require("out")
    index = InvertedIndex.load(cfg.index)
    params = Bm25Params(cfg.k1, cfg.b)
    k = cfg.k or 100
    runs = [search(index, q, k, params, cfg.tag or "bm25") for q in read_queries(cfg.queries)]
    write_run([r for r in runs if len(r)], cfg.tag or "bm25", cfg.out)
    return {"queries": len(runs)}


def make_backend(cfg: PipelineConfig) -> Backend:
    if cfg.backend == "identity":
        return IdentityBackend()
    if cfg.backend == "oracle":
        cfg.require_existing("qrels")
        return OracleBackend(read_qrels(cfg.qrels))
    if cfg.backend == "scripted":
        cfg.require_existing("script")
        return ScriptedBackend.from_file(cfg.script)
    if cfg.backend == "http":
        cfg.require("base_url", "model")
        return HttpBackend(cfg.base_url, cfg.model, cfg.api_key_env)
    raise ConfigError(f"unknown backend {cfg.backend!r}")


def cmd_rerank(cfg: PipelineConfig) -> dict:
    cfg.require_existing("run", "corpus", "queries")
    cfg.require("out")
    if cfg.template:
        cfg.require_existing("template")
        logger.warning("using non-canonical prompt template %s", cfg.template)
    backend = make_backend(cfg)
    settings = RerankSettings(
        temperature=cfg.temperature,
        max_output_tokens=cfg.max_tokens,
        truncate=cfg.truncate,
        instruction=load_template(cfg.template) if cfg.template else None,
        split_system=cfg.system_prompt,
        min_indices=cfg.min_indices,
        system_tag=cfg.tag or "rerank",
    )
    runs = read_run(cfg.run)
    result = rerank_batch(
        backend, read_queries(cfg.queries), runs, load_passages(cfg.corpus),
        depth=cfg.depth, window=cfg.window, stride=cfg.stride, settings=settings,
        extra_top_pass=cfg.extra_top_pass, concurrency=cfg.concurrency,
    )
    out_runs = result.runs
    if cfg.fuse_initial:
        out_runs = {
            qid: rrf_fuse([run, runs[qid]], cfg.k_rrf, settings.system_tag + "+rrf")
            for qid, run in out_runs.items()
        }
    write_run(out_runs, None, cfg.out)
    if cfg.exchanges:
        with open(cfg.exchanges, "w", encoding="utf-8") as fh:
            for ex in result.exchanges:
                fh.write(json.dumps(ex.to_record(), ensure_ascii=False) + "\n")
    statuses: dict[str, int] = {}
    for ex in result.exchanges:
        statuses[ex.status] = statuses.get(ex.status, 0) + 1
    if result.failed_queries:
        logger.error("%d queries had failed backend calls: %s",
                     len(result.failed_queries), result.failed_queries[:10])
    return {"queries": len(out_runs), "calls": statuses, "failed_queries": result.failed_queries}


def cmd_fuse(cfg: PipelineConfig) -> dict:
    cfg.require_existing("runs")
    cfg.require("out")
    loaded = [read_run(p) for p in cfg.runs]
    qids = list(dict.fromkeys(qid for runs in loaded for qid in runs))
    tag = cfg.tag or "rrf"
    fused = {qid: rrf_fuse([r[qid] for r in loaded if qid in r], cfg.k_rrf, tag) for qid in qids}
    write_run(fused, tag, cfg.out)
    return {"queries": len(fused)}


def _read_collections(path: str) -> dict[str, str]:
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 'qid collection'")
            mapping[parts[0]] = parts[1]
    return mapping


def cmd_eval(cfg: PipelineConfig) -> dict:
    cfg.require_existing("run", "qrels")
    cfg.require("out")
    if cfg.collections:
        cfg.require_existing("collections")
    if cfg.baseline_run:
        cfg.require_existing("baseline_run")
    k = cfg.k or 10
    qrels = read_qrels(cfg.qrels)
    collections = _read_collections(cfg.collections) if cfg.collections else None
    report = evaluate_runs(read_run(cfg.run), qrels, k, collections)
    if cfg.baseline_run:
        baseline = evaluate_runs(read_run(cfg.baseline_run), qrels, k, collections)
        compare(report, baseline)
    Path(cfg.out).write_text(report.table(), encoding="utf-8")
    Path(f"{cfg.out}.csv").write_text(report.csv(), encoding="utf-8")
    sys.stdout.write(report.table())
    return {"queries": len(report.per_query), "macro_average": report.macro_average}


def cmd_sample(cfg: PipelineConfig) -> dict:
    cfg.require_existing("queries", "runs", "corpus")
    cfg.require("out")
    stats = emit_records(
        read_queries(cfg.queries),
        load_passages(cfg.corpus),
        [read_run(p) for p in cfg.runs],
        cfg.seed,
        cfg.out,
        cfg.subset_mode,  # type: ignore[arg-type]
        cfg.k_rrf,
    )
    return {"records": stats.records, "usable_queries": stats.usable_queries}


def cmd_trace_stats(cfg: PipelineConfig) -> dict:
    """Histogram of ranking counts over an exchange log or plain JSON-lines traces.

    Each line needs ``response`` (or ``text``/``target``) and, unless ``--n``
    is given, a window size ``n``.
    """
    cfg.require_existing("traces")
    cfg.require("out")
    analyses = []
    with open(cfg.traces, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            text = rec.get("response", rec.get("text", rec.get("target")))
            n = cfg.n or rec.get("n")
            if text is None or not n:
                raise ConfigError(f"{cfg.traces}:{lineno}: need a response and a window size")
            analyses.append(extract_final(text, int(n), cfg.min_indices))
    hist = trace_histogram(analyses)
    fallbacks = sum(a.fallback_used for a in analyses)
    report = hist.to_csv()
    Path(cfg.out).write_text(report, encoding="utf-8")
    sys.stdout.write(report)
    sys.stdout.write(f"single-ranking fraction: {hist.single_fraction:.2f}\n")
    return {"traces": hist.total, "single_fraction": hist.single_fraction, "fallbacks": fallbacks}


COMMANDS: dict[str, Callable[[PipelineConfig], dict]] = {
    "index": cmd_index,
    "search": cmd_search,
    "rerank": cmd_rerank,
    "fuse": cmd_fuse,
    "eval": cmd_eval,
    "sample": cmd_sample,
    "trace-stats": cmd_trace_stats,
}


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="listrank", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI config file; command-line flags override it")
    parser.add_argument("--log-level", default="INFO")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    subs: dict[str, argparse.ArgumentParser] = {}

    p = subs["index"] = sub.add_parser("index", help="build a BM25 index")
    p.add_argument("--corpus")
    p.add_argument("--out")

    p = subs["search"] = sub.add_parser("search", help="BM25 retrieval to a TREC run")
    p.add_argument("--index")
    p.add_argument("--queries")
    p.add_argument("--k", type=int, help="results per query (default 100)")
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--tag")
    p.add_argument("--out")

    p = subs["rerank"] = sub.add_parser("rerank", help="listwise reranking of a run")
    p.add_argument("--run")
    p.add_argument("--corpus")
    p.add_argument("--queries")
    p.add_argument("--depth", type=int, help="candidates reranked per query (20, 50, 100...)")
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--extra-top-pass", action="store_true",
                   help="append one more top window after the bottom-up pass")
    p.add_argument("--backend", choices=["http", "oracle", "scripted", "identity"])
    p.add_argument("--qrels", help="judgments for the oracle backend")
    p.add_argument("--script", help="JSON-lines responses for the scripted backend")
    p.add_argument("--base-url")
    p.add_argument("--model")
    p.add_argument("--api-key-env", help="environment variable holding the API token")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--truncate", type=int, help="passage limit in whitespace tokens")
    p.add_argument("--template", help="alternate (non-canonical) instruction block")
    p.add_argument("--system-prompt", action="store_true",
                   help="send the instruction block as a system message")
    p.add_argument("--min-indices", type=int)
    p.add_argument("--concurrency", type=int)
    p.add_argument("--fuse-initial", action="store_true",
                   help="RRF-fuse each reranked list with its first-stage list")
    p.add_argument("--k-rrf", type=float)
    p.add_argument("--tag")
    p.add_argument("--out")
    p.add_argument("--exchanges", help="JSON-lines log of every backend call")

    p = subs["fuse"] = sub.add_parser("fuse", help="reciprocal rank fusion of runs")
    p.add_argument("--runs", nargs="+")
    p.add_argument("--k-rrf", type=float)
    p.add_argument("--tag")
    p.add_argument("--out")

    p = subs["eval"] = sub.add_parser("eval", help="nDCG@k with macro averages")
    p.add_argument("--run")
    p.add_argument("--qrels")
    p.add_argument("--k", type=int)
    p.add_argument("--collections", help="file of 'qid collection' lines")
    p.add_argument("--baseline-run")
    p.add_argument("--out")

    p = subs["sample"] = sub.add_parser("sample", help="build the distillation dataset")
    p.add_argument("--queries")
    p.add_argument("--runs", nargs="+")
    p.add_argument("--corpus")
    p.add_argument("--seed", type=int)
    p.add_argument("--subset-mode", choices=["prefix", "random"])
    p.add_argument("--k-rrf", type=float)
    p.add_argument("--out")

    p = subs["trace-stats"] = sub.add_parser("trace-stats", help="ranking-count histogram")
    p.add_argument("--traces")
    p.add_argument("--n", type=int)
    p.add_argument("--min-indices", type=int)
    p.add_argument("--out")
    return parser, subs


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        pre, _ = parser.parse_known_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=pre.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    if pre.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        if pre.config:
            apply_config_file(pre.config, pre.command, subs[pre.command])
        try:
            ns = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        cfg = PipelineConfig.from_namespace(ns)
        cfg.validate()
        extra = COMMANDS[cfg.command](cfg)
        write_manifest(cfg, {"result": extra})
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except BackendError as exc:
        logger.error("backend error: %s", exc)
        return EXIT_BACKEND
    except (ListrankError, OSError, ValueError, KeyError) as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
