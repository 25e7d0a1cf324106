"""Command-line interface: ingest, index, search, ask, eval, serve, bench."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from collections import Counter
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from .config import AppConfig, bundled_data, load_config, provider_for_index
from .corpus import IngestOptions, annotate_corpus, is_chunk_file, load_chunks, load_corpus, save_corpus
from .errors import BackendError, ConfigError, HistragError
from .evaluation import (
    EvalReport,
    LlmJudge,
    OfflineJudge,
    latent_block,
    ner_block,
    read_qrels,
    read_queries,
    run_qa_evaluation,
    run_retrieval_benchmark,
)
from .evaluation.benchmark import index_entity_sets
from .index import build_index, index_to_bytes, load_index
from .pipeline import AskResponse, Pipeline, search_payload

log = logging.getLogger("histrag")

ENDPOINT_VARS = {"embedding": "EMBED_API_BASE", "llm": "LLM_API_BASE", "ner": "NER_API_BASE"}


# -- argument groups ---------------------------------------------------------

def _embed_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("embedding provider")
    g.add_argument("--embed-kind", choices=("fallback", "remote"))
    g.add_argument("--embed-dim", type=int)
    g.add_argument("--embed-model")
    g.add_argument("--embed-seed", type=int)


def _llm_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("LLM backend")
    g.add_argument("--llm-kind", choices=("auto", "remote", "scripted", "none"),
                   help="auto = remote when LLM_API_BASE is set")
    g.add_argument("--llm-script", help="rule file for --llm-kind scripted (default: bundled mock)")
    g.add_argument("--llm-model")


def _retrieval_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("retrieval")
    g.add_argument("--expand", type=int, metavar="N", help="number of LLM reformulations (0 disables LLM calls)")
    g.add_argument("--rrf-k", type=int)
    g.add_argument("--lexical", action="store_true", default=None, help="add BM25 lists to the fusion")
    g.add_argument("--lang", default="en")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="histrag", description=__doc__)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING, ...")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="clean, chunk and annotate a JSONL corpus")
    p.add_argument("corpus", help="JSONL with doc_id, title, text, lang")
    p.add_argument("out", help="output chunk JSONL (manifest written alongside)")
    p.add_argument("--max-tokens", type=int, default=512)
    p.add_argument("--overlap", type=int, default=64)
    p.add_argument("--ner-kind", choices=("none", "remote", "gazetteer"))
    p.add_argument("--gazetteer", help="surface->label JSON for --ner-kind gazetteer (default: bundled)")
    p.add_argument("--on-error", choices=("abort", "skip"), default="abort")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="embed chunks and write a binary index")
    p.add_argument("corpus", help="chunk JSONL from 'ingest', or a raw document JSONL")
    p.add_argument("out")
    _embed_args(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="fused ranking for one query")
    p.add_argument("index")
    p.add_argument("query")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--json", action="store_true")
    _retrieval_args(p)
    _llm_args(p)
    _embed_args(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("ask", help="answer a question from retrieved evidence")
    p.add_argument("index")
    p.add_argument("question")
    p.add_argument("--json", action="store_true", help="emit the full response as JSON")
    _retrieval_args(p)
    _llm_args(p)
    _embed_args(p)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("eval", help="dense-vs-fusion benchmark and QA metrics")
    p.add_argument("index")
    p.add_argument("queries", help="JSONL with query_id, text, lang, category")
    p.add_argument("qrels", help="TREC qrels")
    p.add_argument("--out", default=None, help="report directory (default: paths.reports)")
    p.add_argument("--csv", action="store_true", help="also write per-query CSV")
    p.add_argument("--latent", action="store_true", help="add the cluster-structure block")
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--ner", action="store_true", help="add the entity-coherence block from index metadata")
    p.add_argument("--qa", metavar="QUESTIONS", help="JSONL questions for the answer-quality block")
    p.add_argument("--qa-qrels", help="qrels for --qa questions (adds cites_relevant)")
    p.add_argument("--judge", choices=("offline", "llm"))
    _retrieval_args(p)
    _llm_args(p)
    _embed_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="HTTP service over an index")
    p.add_argument("index")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    _retrieval_args(p)
    _llm_args(p)
    _embed_args(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("bench", help="per-phase wall-clock timings")
    p.add_argument("index")
    p.add_argument("queries", help="JSONL with query_id, text, lang")
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--ask", action="store_true", help="include answer generation")
    p.add_argument("--json", action="store_true")
    _retrieval_args(p)
    _llm_args(p)
    _embed_args(p)
    p.set_defaults(func=cmd_bench)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    g = lambda name: getattr(args, name, None)  # noqa: E731
    llm_kind, script = g("llm_kind"), g("llm_script")
    if script and llm_kind is None:
        llm_kind = "scripted"
    if llm_kind == "scripted" and not script:
        script = str(bundled_data("mock_llm.json"))
    ner_kind, gaz = g("ner_kind"), g("gazetteer")
    if gaz and ner_kind is None:
        ner_kind = "gazetteer"
    if ner_kind == "gazetteer" and not gaz:
        gaz = str(bundled_data("gazetteer.json"))
    return {
        "embedding": {"kind": g("embed_kind"), "dim": g("embed_dim"), "model_name": g("embed_model"), "seed": g("embed_seed")},
        "llm": {"kind": llm_kind, "script": script, "model_name": g("llm_model")},
        "ner": {"kind": ner_kind, "gazetteer": gaz},
        "judge": {"kind": g("judge")},
        "retrieval": {"num_variations": g("expand"), "rrf_k": g("rrf_k"), "enable_lexical": g("lexical")},
        "service": {"host": g("host"), "port": g("port")},
        "log_level": g("log_level"),
    }


def _pipeline(cfg: AppConfig, index_path: str) -> Pipeline:
    index = load_index(index_path)
    return Pipeline(index, provider_for_index(cfg, index.provider_id), cfg.retrieval, cfg.generation, cfg.llm_backend())


def _require_llm_for_expansion(pipe: Pipeline) -> None:
    if pipe.llm is None and pipe.retrieval.num_variations > 0:
        log.warning("no LLM configured (LLM_API_BASE unset): query expansion disabled")
        pipe.retrieval = replace(pipe.retrieval, num_variations=0)


# -- commands -----------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace, cfg: AppConfig) -> int:
    corpus = load_corpus(args.corpus, IngestOptions(args.max_tokens, args.overlap))
    stats: Counter = Counter()
    corpus = annotate_corpus(corpus, cfg.ner_backend(), on_error=args.on_error, stats=stats)
    save_corpus(corpus, args.out)
    m = corpus.manifest
    print(f"{m['documents']} documents, {m['chunks']} chunks, {stats['entities']} entities, "
          f"{stats['dropped_entities']} dropped entities -> {args.out}")
    return 0


def cmd_index(args: argparse.Namespace, cfg: AppConfig) -> int:
    corpus = load_chunks(args.corpus) if is_chunk_file(args.corpus) else load_corpus(args.corpus)
    provider = cfg.embedding_provider()
    index = build_index(corpus, provider)
    Path(args.out).write_bytes(index_to_bytes(index))
    print(f"dim={index.dim} count={len(index)} provider_id={index.provider_id} -> {args.out}")
    return 0


def _contrib(c: dict[str, Any]) -> str:
    return f"{c['query_id']}:{c['source']}@{c['rank']}"


def cmd_search(args: argparse.Namespace, cfg: AppConfig) -> int:
    pipe = _pipeline(cfg, args.index)
    _require_llm_for_expansion(pipe)
    qs, fused = pipe.retrieve(args.query, args.lang, k=args.k)
    payload = search_payload(qs, fused, pipe.index, pipe.retrieval.rrf_k)
    if args.json:
        print(json.dumps(payload, ensure_ascii=False, indent=2))
        return 0
    r = pipe.retrieval
    print(f"# rrf_k={r.rrf_k} variations={len(qs.variations)} lexical={'on' if r.enable_lexical else 'off'} "
          f"k={len(payload['results'])}{' degraded' if qs.degraded else ''}")
    for qid, text in payload["queries"].items():
        print(f"# {qid}: {text}")
    for item in payload["results"]:
        contribs = " ".join(_contrib(c) for c in item["contributing"])
        print(f"{item['rank']:>3}  {item['score']:.6f}  {item['chunk_id']}  [{contribs}]  {item['title']}")
    return 0


def _print_answer(resp: AskResponse) -> None:
    a = resp.answer
    if a.abstained:
        print("ABSTAINED: the retrieved evidence does not support an answer.")
        print(f"  {a.text}")
    else:
        print("Answer:")
        print(f"  {a.text}")
    print("Evidence:")
    for e in resp.evidence:
        print(f"  {e.fused_rank}. {e.chunk_id}  score={e.fused_score:.6f}  [{e.title} | {e.doc_id}]")
    if resp.degraded:
        print("(query expansion failed; answered from the original query only)")


def cmd_ask(args: argparse.Namespace, cfg: AppConfig) -> int:
    pipe = _pipeline(cfg, args.index)
    resp = pipe.ask(args.question, args.lang)
    if args.json:
        print(json.dumps(resp.to_dict(), ensure_ascii=False, indent=2))
    else:
        _print_answer(resp)
    return 0


def cmd_eval(args: argparse.Namespace, cfg: AppConfig) -> int:
    pipe = _pipeline(cfg, args.index)
    _require_llm_for_expansion(pipe)
    queries = read_queries(args.queries)
    qrels = read_qrels(args.qrels)
    report = EvalReport(retrieval=run_retrieval_benchmark(pipe.index, queries, qrels, pipe.retrieval, pipe.provider, pipe.llm))
    if args.latent:
        report.latent = latent_block(pipe.index, args.clusters)
    if args.ner:
        report.ner = ner_block(index_entity_sets(pipe.index))
    if args.qa:
        if pipe.llm is None:
            raise ConfigError("--qa needs an LLM backend: set LLM_API_BASE or use --llm-kind scripted")
        judge = LlmJudge(pipe.llm) if cfg.judge.kind == "llm" else OfflineJudge()
        report.qa = run_qa_evaluation(
            pipe,
            read_queries(args.qa),
            judge=judge,
            question_llm=pipe.llm if cfg.judge.kind == "llm" else None,
            n_questions=cfg.judge.questions,
            qrels=read_qrels(args.qa_qrels) if args.qa_qrels else None,
        )
    report.validate()
    out = Path(args.out or cfg.paths.reports)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    text = report.to_text()
    (out / "report.txt").write_text(text, encoding="utf-8")
    if args.csv:
        (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    print(text, end="")
    print(f"reports written to {out}")
    return 0


def cmd_serve(args: argparse.Namespace, cfg: AppConfig) -> int:
    import uvicorn

    from .service import create_app

    if not Path(args.index).is_file():
        raise ConfigError(f"index file not found: {args.index}")

    def loader() -> Pipeline:
        pipe = _pipeline(cfg, args.index)
        _require_llm_for_expansion(pipe)
        return pipe

    app = create_app(loader)
    uvicorn.run(app, host=cfg.service.host, port=cfg.service.port, log_level=cfg.log_level.lower())
    return 0


def cmd_bench(args: argparse.Namespace, cfg: AppConfig) -> int:
    t0 = time.perf_counter()
    pipe = _pipeline(cfg, args.index)
    load_s = time.perf_counter() - t0
    _require_llm_for_expansion(pipe)
    queries = read_queries(args.queries)
    phases = ("expand", "search", "fuse", "generate")
    totals = dict.fromkeys(phases, 0.0)
    runs = 0
    for _ in range(max(args.repeat, 1)):
        for q in queries:
            timings: dict[str, float] = {}
            if args.ask:
                timings = dict(pipe.ask(q.text, q.lang).timings)
            else:
                pipe.retrieve(q.text, q.lang, timings=timings)
            for ph in phases:
                totals[ph] += timings.get(ph, 0.0)
            runs += 1
    result = {
        "provider_id": pipe.index.provider_id,
        "index_count": len(pipe.index),
        "index_load_s": load_s,
        "runs": runs,
        "total_s": totals,
        "mean_s": {ph: (v / runs if runs else 0.0) for ph, v in totals.items()},
    }
    if args.json:
        print(json.dumps(result, indent=2))
        return 0
    from .evaluation.report import table

    print(f"provider={result['provider_id']} chunks={result['index_count']} runs={runs} index_load={load_s:.4f}s")
    print(table(["Phase", "Total (s)", "Mean (s)"], [[ph, totals[ph], result["mean_s"][ph]] for ph in phases]))
    return 0


# -- entry point --------------------------------------------------------------

def _describe(exc: BaseException) -> str:
    msg = str(exc)
    if isinstance(exc, BackendError) and exc.component in ENDPOINT_VARS:
        var = ENDPOINT_VARS[exc.component]
        if var not in msg:
            msg += f" (check {var})"
    return msg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, overrides=_overrides(args))
        logging.basicConfig(level=cfg.log_level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return args.func(args, cfg)
    except (HistragError, OSError, ValueError) as exc:
        print(f"error: {_describe(exc)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
