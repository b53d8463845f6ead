"""Umbrella command line: generate, extract, build, train, index, serve.

Settings resolve in order: command-line flag, environment variable
(ICA_VECTORS), --config JSON file, built-in default. Artifacts are plain
files so every stage can run independently.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys

from . import ckg as ckgmod
from .corpus import corpus_hash, load_corpus, save_corpus
from .evalkit import BenchmarkConfig, benchmark
from .extract import extract_corpus, load_extracted, save_extracted
from .generator import GeneratorConfig, generate_corpus
from .linkpred import (ModelConfig, make_plan, save_checkpoint, task_from_graph,
                       train)
from .rca import CkgInference, rca_search_only, rca_with_ckg
from .search import SearchIndex, build_index, query as search_query
from .textprep import WordVectorStore, load_vectors, non_stop_counts


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _resolve_store(args, cfg: dict) -> WordVectorStore:
    path = getattr(args, "vectors", None) or os.environ.get("ICA_VECTORS") or cfg.get("vectors")
    if path:
        return load_vectors(path)
    return WordVectorStore(int(cfg.get("dimension", 50)))


def _cmd_gen_corpus(args, cfg) -> int:
    config = GeneratorConfig(
        n=args.n, k_symptom=args.ks, k_rootcause=args.kr, k_resolution=args.kres,
        typo_prob=args.typo, agglutination_prob=args.agglutination,
        decoy_cue_prob=args.decoy,
    )
    records, truth = generate_corpus(config, args.seed)
    save_corpus(records, args.out)
    if args.truth:
        truth.save(args.truth)
    print(f"wrote {len(records)} records to {args.out} (hash {corpus_hash(records)})")
    return 0


def _cmd_stats(args, cfg) -> int:
    records = load_corpus(args.corpus)

    def mean_len(texts) -> float:
        return statistics.mean(sum(non_stop_counts(t).values()) for t in texts)

    print(f"incidents: {len(records)}")
    for sev in (0, 1, 2):
        share = sum(1 for r in records if r.severity == sev) / len(records)
        print(f"sev{sev}: {100 * share:.2f}%")
    print(f"subject mean non-stop tokens: {mean_len(r.subject for r in records):.2f}")
    print(f"investigation mean non-stop tokens: "
          f"{mean_len(r.investigation_text() for r in records):.2f}")
    print(f"resolution doc mean non-stop tokens: "
          f"{mean_len(r.resolution_doc for r in records):.2f}")
    print(f"rca doc mean non-stop tokens: {mean_len(r.rca_doc for r in records):.2f}")
    return 0


def _cmd_extract(args, cfg) -> int:
    records = load_corpus(args.infile)
    store = _resolve_store(args, cfg)
    extracted = extract_corpus(records, store, topics_k=args.topics_k,
                               summary_m=args.summary_m)
    save_extracted(extracted, args.out)
    print(f"extracted {len(extracted)} incidents to {args.out}")
    return 0


def _cmd_build_ckg(args, cfg) -> int:
    extracted = load_extracted(args.extracted)
    store = _resolve_store(args, cfg)
    graph = ckgmod.build_ckg(extracted, store, k_override=args.k_override)
    if args.corpus:
        graph.reports["corpus_hash"] = corpus_hash(load_corpus(args.corpus))
    graph.save(args.out, include_embeddings=not args.no_embeddings)
    n_heads = sum(len(graph.nodes_of_type(t)) for t in ckgmod.HEAD_TYPES)
    print(f"built graph: {len(graph.nodes)} nodes ({n_heads} cluster heads), "
          f"{len(graph.edges)} edges -> {args.out}")
    return 0


def _cmd_train_linkpred(args, cfg) -> int:
    graph = ckgmod.CausalKnowledgeGraph.load(args.ckg)
    task = task_from_graph(graph, args.target)
    d = task.x_s.shape[1]
    config = ModelConfig(d=d, n_negatives=args.negatives, epochs=args.epochs,
                         learning_rate=args.lr, seed=args.seed)
    plan = make_plan(task, args.mode, args.x, args.seed,
                     n_negatives=config.n_negatives)
    model, report = train(task, plan, config)
    gh = graph.reports.get("corpus_hash")
    if gh:
        report["corpus_hash"] = gh
    save_checkpoint(model, task, plan, report, args.out)
    print(f"trained {args.target} model ({plan.summary()}) -> {args.out}")
    return 0


def _cmd_index(args, cfg) -> int:
    records = load_corpus(args.corpus)
    extracted = load_extracted(args.extracted)
    store = _resolve_store(args, cfg)
    index = build_index(records, extracted, store)
    index.save(args.out)
    print(f"indexed {index.meta['n_entries']} entries -> {args.out}")
    return 0


def _cmd_search(args, cfg) -> int:
    index = SearchIndex.load(args.index)
    store = _resolve_store(args, cfg)
    results = search_query(index, args.q, args.k, store)
    for r in results:
        top = r.matched[0][0].text if r.matched else ""
        print(f"{r.doc_score:.4f}  {r.incident_id}  {top}")
    return 0


def _cmd_rca(args, cfg) -> int:
    index = SearchIndex.load(args.index)
    store = _resolve_store(args, cfg)
    extracted = load_extracted(args.extracted)
    results = search_query(index, args.q, args.k, store)
    if args.method == "search":
        pred = rca_search_only(results, extracted, args.k, args.kind)
    else:
        from .linkpred import load_checkpoint
        graph = ckgmod.CausalKnowledgeGraph.load(args.ckg)
        model, _ = load_checkpoint(args.model)
        task = task_from_graph(graph, args.kind)
        pred = rca_with_ckg(results, extracted, CkgInference(graph, model, task),
                            args.k, args.kind)
    json.dump(pred.to_dict(), sys.stdout, indent=1)
    print()
    return 0


def _cmd_eval(args, cfg) -> int:
    records = load_corpus(args.corpus)
    extracted = load_extracted(args.extracted)
    store = _resolve_store(args, cfg)
    index = SearchIndex.load(args.index)
    graph = ckgmod.CausalKnowledgeGraph.load(args.ckg)

    from .linkpred import load_checkpoint
    inference = {}
    for kind, path in (("rootcause", args.model_rootcause),
                       ("resolution", args.model_resolution)):
        if path:
            model, _ = load_checkpoint(path)
            inference[kind] = CkgInference(graph, model, task_from_graph(graph, kind))
    report = benchmark(records, extracted, index, store,
                       inference.get("rootcause"), inference.get("resolution"),
                       BenchmarkConfig(k=args.k, seed=args.seed))
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
    print(f"benchmark over {report['n_incidents']} incidents -> {args.out}")
    return 0


def _cmd_serve(args, cfg) -> int:
    import uvicorn

    from .service import create_app, load_state

    model_paths = {}
    if args.model_rootcause:
        model_paths["rootcause"] = args.model_rootcause
    if args.model_resolution:
        model_paths["resolution"] = args.model_resolution
    state = load_state(args.corpus, args.extracted, args.index, args.ckg,
                       model_paths,
                       vectors_path=getattr(args, "vectors", None)
                       or os.environ.get("ICA_VECTORS") or cfg.get("vectors"),
                       stale_age_days=args.stale_days)
    app = create_app(state)
    if args.ui:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=args.ui, html=True), name="ui")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ica")
    parser.add_argument("--config", help="JSON config file with defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a synthetic corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ks", type=int, default=12)
    p.add_argument("--kr", type=int, default=12)
    p.add_argument("--kres", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--typo", type=float, default=0.012)
    p.add_argument("--agglutination", type=float, default=0.05)
    p.add_argument("--decoy", type=float, default=0.6)
    p.add_argument("--out", required=True)
    p.add_argument("--truth")
    p.set_defaults(func=_cmd_gen_corpus)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("corpus")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("extract", help="run extraction over a corpus")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--topics-k", type=int, default=5)
    p.add_argument("--summary-m", type=int, default=5)
    p.add_argument("--vectors")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("build-ckg", help="build the causal knowledge graph")
    p.add_argument("--extracted", required=True)
    p.add_argument("--corpus")
    p.add_argument("--vectors")
    p.add_argument("--out", required=True)
    p.add_argument("--k-override", type=int)
    p.add_argument("--no-embeddings", action="store_true")
    p.set_defaults(func=_cmd_build_ckg)

    p = sub.add_parser("train-linkpred", help="train a link-prediction model")
    p.add_argument("--ckg", required=True)
    p.add_argument("--target", choices=("rootcause", "resolution"), required=True)
    p.add_argument("--mode", choices=("all", "noisy"), default="noisy")
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--negatives", type=int, default=10)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_linkpred)

    p = sub.add_parser("index", help="build the search index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--extracted", required=True)
    p.add_argument("--vectors")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("search", help="query the search index")
    p.add_argument("--index", required=True)
    p.add_argument("--q", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--vectors")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("rca", help="predict root causes or resolutions")
    p.add_argument("--index", required=True)
    p.add_argument("--extracted", required=True)
    p.add_argument("--ckg")
    p.add_argument("--model")
    p.add_argument("--q", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--method", choices=("search", "ckg"), default="search")
    p.add_argument("--kind", choices=("rootcause", "resolution"), default="rootcause")
    p.add_argument("--vectors")
    p.set_defaults(func=_cmd_rca)

    p = sub.add_parser("eval", help="run the leave-one-out benchmark")
    p.add_argument("--corpus", required=True)
    p.add_argument("--extracted", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--ckg", required=True)
    p.add_argument("--model-rootcause")
    p.add_argument("--model-resolution")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vectors")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="serve the HTTP API")
    p.add_argument("--corpus", required=True)
    p.add_argument("--extracted", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--ckg", required=True)
    p.add_argument("--model-rootcause")
    p.add_argument("--model-resolution")
    p.add_argument("--vectors")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--stale-days", type=int, default=365)
    p.add_argument("--ui", help="directory of static UI assets to mount")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _load_config_file(args.config)
    return args.func(args, cfg)


if __name__ == "__main__":
    sys.exit(main())
