"""Read-only HTTP API binding all artifacts for programmatic use and the UI.

Artifacts are built offline by the CLI and loaded once at startup; every
response is a pure function of (state, request) and embeds the artifact
hashes. Results older than the staleness window carry a `stale` flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse

from . import ckg as ckgmod
from .corpus import PrbRecord, corpus_hash, load_corpus, record_to_dict
from .extract import load_extracted
from .linkpred import load_checkpoint, task_from_graph
from .rca import CkgInference, rca_search_only, rca_with_ckg
from .search import EmptyQueryError, SearchIndex, query as search_query
from .textprep import WordVectorStore, load_vectors


class ArtifactMismatch(RuntimeError):
    pass


@dataclass
class ServiceState:
    corpus: list[PrbRecord]
    extracted: dict
    index: SearchIndex
    graph: ckgmod.CausalKnowledgeGraph
    store: WordVectorStore
    inference: dict[str, CkgInference] = field(default_factory=dict)
    stale_age_days: int = 365
    hashes: dict[str, str] = field(default_factory=dict)
    now: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def __post_init__(self) -> None:
        self.by_id = {rec.id: rec for rec in self.corpus}
        self._stale_cutoff = self.now - timedelta(days=self.stale_age_days)

    def is_stale(self, rec: PrbRecord) -> bool:
        return rec.created_at < self._stale_cutoff


def load_state(corpus_path: str, extracted_path: str, index_path: str,
               ckg_path: str, model_paths: dict[str, str] | None = None,
               vectors_path: str | None = None, dimension: int = 50,
               stale_age_days: int = 365) -> ServiceState:
    """Load artifacts, refusing to start on corpus-hash disagreement."""
    corpus = load_corpus(corpus_path)
    chash = corpus_hash(corpus)
    extracted = load_extracted(extracted_path)
    index = SearchIndex.load(index_path)
    graph = ckgmod.CausalKnowledgeGraph.load(ckg_path)

    mismatches = []
    if index.meta.get("corpus_hash") not in (None, chash):
        mismatches.append(f"index built for corpus {index.meta['corpus_hash']}, loaded {chash}")
    gh = graph.reports.get("corpus_hash")
    if gh not in (None, chash):
        mismatches.append(f"ckg built for corpus {gh}, loaded {chash}")

    if vectors_path:
        store = load_vectors(vectors_path)
    else:
        store = WordVectorStore(index.meta.get("d", dimension))
    if index.meta.get("store_id") not in (None, store.store_id):
        mismatches.append(
            f"index built with vector store {index.meta['store_id']}, loaded {store.store_id}")

    inference: dict[str, CkgInference] = {}
    hashes = {"corpus": chash, "index_store": index.meta.get("store_id", store.store_id)}
    for kind, path in (model_paths or {}).items():
        model, meta = load_checkpoint(path)
        mh = meta.get("report", {}).get("corpus_hash")
        if mh not in (None, chash):
            mismatches.append(f"{kind} model built for corpus {mh}, loaded {chash}")
        task = task_from_graph(graph, kind)
        if meta["symptom_ids"] != task.symptom_ids or meta["target_ids"] != task.target_ids:
            mismatches.append(f"{kind} model node ids disagree with the graph")
        inference[kind] = CkgInference(graph, model, task)
    if mismatches:
        raise ArtifactMismatch("; ".join(mismatches))
    return ServiceState(corpus, extracted, index, graph, store,
                        inference, stale_age_days, hashes)


def _result_payload(state: ServiceState, result) -> dict:
    rec = state.by_id[result.incident_id]
    ext = state.extracted[result.incident_id]
    return {
        "incident_id": result.incident_id,
        "doc_score": result.doc_score,
        "stale": state.is_stale(rec),
        "subject": rec.subject,
        "severity": rec.severity,
        "created_at": record_to_dict(rec)["created_at"],
        "symptom": ext.symptom,
        "topics": [{"text": p, "score": s} for p, s in ext.topics],
        "summary": ext.summary,
        "root_causes": [{"text": p, "score": s} for p, s in ext.root_causes],
        "resolutions": [{"text": p, "score": s} for p, s in ext.resolutions],
        "matched": [{"field_type": e.field_type, "text": e.text, "score": s}
                    for e, s in result.matched[:5]],
    }


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="incident causation analysis", docs_url=None, redoc_url=None)

    def run_search(q: str, k: int):
        try:
            return search_query(state.index, q, k, state.store)
        except EmptyQueryError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None

    @app.get("/api/search")
    def api_search(q: str, k: int = Query(default=10, ge=1, le=100)):
        results = run_search(q, k)
        return {
            "query": q, "k": k,
            "results": [_result_payload(state, r) for r in results],
            "artifacts": state.hashes,
        }

    @app.get("/api/rca")
    def api_rca(q: str, k: int = Query(default=10, ge=1, le=100),
                method: str = "search", kind: str = "rootcause"):
        if kind not in ("rootcause", "resolution"):
            raise HTTPException(status_code=400, detail=f"unknown kind {kind!r}")
        if method not in ("search", "ckg"):
            raise HTTPException(status_code=400, detail=f"unknown method {method!r}")
        results = run_search(q, k)
        if not results:
            return {"items": [], "method": method, "kind": kind,
                    "status": "no evidence", "artifacts": state.hashes}
        if method == "search":
            pred = rca_search_only(results, state.extracted, k, kind)
        else:
            inference = state.inference.get(kind)
            if inference is None:
                raise HTTPException(status_code=400,
                                    detail=f"no {kind} model loaded for method=ckg")
            pred = rca_with_ckg(results, state.extracted, inference, k, kind)
        payload = pred.to_dict()
        payload["artifacts"] = state.hashes
        return payload

    @app.get("/api/graph/subgraph")
    def api_subgraph(q: str, hops: int = Query(default=2, ge=0, le=6),
                     k: int = Query(default=5, ge=1, le=25)):
        results = run_search(q, k)
        seeds = set()
        sym_lookup = {n.label.lower(): n.node_id
                      for n in state.graph.nodes_of_type(ckgmod.SYMPTOM)}
        for r in results:
            node_id = sym_lookup.get(state.extracted[r.incident_id].symptom.lower())
            if node_id:
                seeds.add(node_id)
        if not seeds:
            return {"query": q, "hops": hops, "nodes": [], "edges": [],
                    "artifacts": state.hashes}
        sub = ckgmod.subgraph_query(state.graph, seeds, hops)
        payload = sub.to_dict(include_embeddings=False)
        return {"query": q, "hops": hops, "seeds": sorted(seeds),
                "nodes": payload["nodes"], "edges": payload["edges"],
                "artifacts": state.hashes}

    @app.get("/api/graph/node/{node_id}")
    def api_node(node_id: str):
        node = state.graph.nodes.get(node_id)
        if node is None:
            raise HTTPException(status_code=404, detail=f"unknown node {node_id!r}")
        neighbors = []
        for e in state.graph.edges:
            if e.src == node_id or e.dst == node_id:
                other = state.graph.nodes[e.dst if e.src == node_id else e.src]
                neighbors.append({"id": other.node_id, "type": other.node_type,
                                  "label": other.label, "edge_type": e.edge_type})
        return {
            "id": node.node_id, "type": node.node_type, "label": node.label,
            "incidents": sorted(node.incident_ids), "neighbors": neighbors,
            "artifacts": state.hashes,
        }

    @app.get("/api/incident/{incident_id}")
    def api_incident(incident_id: str):
        rec = state.by_id.get(incident_id)
        if rec is None:
            raise HTTPException(status_code=404, detail=f"unknown incident {incident_id!r}")
        return {
            "record": record_to_dict(rec),
            "extracted": state.extracted[incident_id].to_dict(),
            "stale": state.is_stale(rec),
            "artifacts": state.hashes,
        }

    @app.get("/api/stats")
    def api_stats():
        n = len(state.corpus)
        severities = {str(s): sum(1 for r in state.corpus if r.severity == s)
                      for s in (0, 1, 2)}

        def coverage(head_type: str) -> list[dict]:
            heads = state.graph.nodes_of_type(head_type)
            rows = [{"id": h.node_id, "label": h.label,
                     "coverage_pct": round(100.0 * len(h.incident_ids) / n, 2)}
                    for h in heads]
            return sorted(rows, key=lambda r: -r["coverage_pct"])[:10]

        return {
            "n_incidents": n,
            "severity_counts": severities,
            "clusters": {
                "symptom": coverage(ckgmod.SYMPTOM_TYPE),
                "rootcause": coverage(ckgmod.GLOBAL_ROOT_CAUSE_TYPE),
                "resolution": coverage(ckgmod.GLOBAL_RESOLUTION_TYPE),
            },
            "artifacts": state.hashes,
        }

    @app.exception_handler(ValueError)
    def value_error_handler(_, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    return app
