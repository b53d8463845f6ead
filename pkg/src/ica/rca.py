"""Retrieval-based root-cause and resolution prediction.

Two fusion strategies over the top-K search results: span fusion alone
(merge each result's extracted spans, weight by relevance) or search plus
knowledge-graph link prediction. Relevance cosines are shifted to
(1+cos)/2 so fused scores stay positive, predictions are softmax-scaled
per symptom, and the final distribution is L1-normalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ckg as ckgmod
from .linkpred import BipartiteTask, LinkPredictionModel, forward
from .search import RankedResult
from .textprep import tokenize

_SPANS_OF_KIND = {"rootcause": "root_causes", "resolution": "resolutions"}


@dataclass
class RcaPrediction:
    items: list[tuple[str, float]]
    method: str
    kind: str
    provenance: dict[str, dict] = field(default_factory=dict)
    status: str = "ok"

    def to_dict(self) -> dict:
        return {
            "items": [{"text": t, "score": s, "provenance": self.provenance.get(t, {})}
                      for t, s in self.items],
            "method": self.method,
            "kind": self.kind,
            "status": self.status,
        }


def _dedup_key(text: str) -> str:
    return " ".join(tokenize(text).non_stop())


def _shift(cosine: float) -> float:
    return (1.0 + cosine) / 2.0


def _finalize(cands: dict[str, dict], method: str, kind: str, k: int) -> RcaPrediction:
    if not cands:
        return RcaPrediction([], method, kind, status="no evidence")
    ordered = sorted(cands.values(), key=lambda c: (-c["score"], c["text"]))[:k]
    total = sum(c["score"] for c in ordered)
    items = [(c["text"], c["score"] / total) for c in ordered]
    provenance = {c["text"]: {"incidents": sorted(c["incidents"]),
                              "nodes": sorted(c["nodes"])} for c in ordered}
    return RcaPrediction(items, method, kind, provenance)


def rca_search_only(results: list[RankedResult], extracted, k: int,
                    kind: str) -> RcaPrediction:
    """Merge each result's spans into one candidate, fuse with relevance.

    Candidate score before normalization is (max span score) x shifted
    relevance; duplicate candidate texts are summed.
    """
    if not results:
        raise ValueError("results must be non-empty")
    attr = _SPANS_OF_KIND[kind]
    cands: dict[str, dict] = {}
    for res in results:
        spans = getattr(extracted[res.incident_id], attr)
        if not spans:
            continue
        text = "; ".join(span for span, _ in spans)
        score = max(s for _, s in spans) * _shift(res.doc_score)
        key = _dedup_key(text)
        cand = cands.setdefault(key, {"text": text, "score": 0.0,
                                      "incidents": set(), "nodes": set()})
        cand["score"] += score
        cand["incidents"].add(res.incident_id)
    return _finalize(cands, "SearchOnly", kind, k)


class CkgInference:
    """Precomputed node representations for fast per-symptom prediction."""

    def __init__(self, graph: "ckgmod.CausalKnowledgeGraph",
                 model: LinkPredictionModel, task: BipartiteTask):
        self.graph = graph
        self.model = model
        self.task = task
        self.x_s, self.x_r = forward(model, task)
        self._symptom_index = {
            graph.nodes[nid].label.lower(): i
            for i, nid in enumerate(task.symptom_ids)
        }

    def symptom_index(self, symptom_text: str) -> int | None:
        return self._symptom_index.get(symptom_text.lower())

    def predict_top(self, symptom_row: int, k: int) -> list[tuple[str, float]]:
        scores = self.x_r @ self.x_s[symptom_row]
        order = np.argsort(-scores, kind="stable")[:k]
        return [(self.task.target_ids[t], float(scores[t])) for t in order]


def rca_with_ckg(results: list[RankedResult], extracted,
                 inference: CkgInference, k: int, kind: str) -> RcaPrediction:
    """Fuse link-prediction scores with search relevance per result.

    Each result's symptom maps to its graph node; its top-k predicted
    targets contribute softmax(prediction score) x shifted relevance,
    summed over results. Results whose symptom has no node are skipped
    and recorded.
    """
    if not results:
        raise ValueError("results must be non-empty")
    cands: dict[str, dict] = {}
    skipped: list[str] = []
    for res in results:
        symptom = extracted[res.incident_id].symptom
        row = inference.symptom_index(symptom)
        if row is None:
            skipped.append(res.incident_id)
            continue
        predictions = inference.predict_top(row, k)
        if not predictions:
            continue
        raw = np.array([s for _, s in predictions])
        exp = np.exp(raw - raw.max())
        soft = exp / exp.sum()
        relevance = _shift(res.doc_score)
        for (node_id, _), p in zip(predictions, soft):
            label = inference.graph.nodes[node_id].label
            key = _dedup_key(label)
            cand = cands.setdefault(key, {"text": label, "score": 0.0,
                                          "incidents": set(), "nodes": set()})
            cand["score"] += float(p) * relevance
            cand["incidents"].add(res.incident_id)
            cand["nodes"].add(node_id)
    pred = _finalize(cands, "SearchPlusCKG", kind, k)
    if skipped:
        pred.provenance["_skipped_results"] = {"incidents": sorted(skipped), "nodes": []}
    return pred
