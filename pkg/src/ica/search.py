"""Dense vector incident search with max-pooled document ranking.

Every subject, investigation sentence, topic phrase, summary sentence and
extracted span becomes one L2-normalized entry; a query scores entries by
dot product (cosine) and an incident by the maximum over its entries.
The exact full scan is the reference backend; an approximate backend may
replace it only if it keeps recall@10 >= 0.95 against the exact scan.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import corpus_hash
from .extract import split_sentences
from .textprep import WordVectorStore, embed_text, tokenize

FIELD_ORDER = ("subject", "investigation_sentence", "topic", "summary_sentence",
               "rootcause_span", "resolution_span")


class EmptyQueryError(ValueError):
    pass


@dataclass
class IndexEntry:
    incident_id: str
    field_type: str
    text: str
    vector: np.ndarray


@dataclass
class RankedResult:
    incident_id: str
    doc_score: float
    matched: list[tuple[IndexEntry, float]] = field(default_factory=list)


class SearchIndex:
    """Immutable entry list with a dense matrix for scoring."""

    def __init__(self, entries: list[IndexEntry], meta: dict):
        self.entries = entries
        self.meta = meta
        self.matrix = (np.stack([e.vector for e in entries])
                       if entries else np.zeros((0, meta.get("d", 1))))
        # Entries are grouped by incident in build order.
        self.block_starts: list[int] = []
        self.block_ids: list[str] = []
        prev = None
        for pos, e in enumerate(entries):
            if e.incident_id != prev:
                self.block_starts.append(pos)
                self.block_ids.append(e.incident_id)
                prev = e.incident_id
        self._starts = np.array(self.block_starts, dtype=int)

    def save(self, path: str) -> None:
        payload = {
            "meta": self.meta,
            "entries": [
                {"incident_id": e.incident_id, "field_type": e.field_type,
                 "text": e.text, "vector": [float(x) for x in e.vector]}
                for e in self.entries
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "SearchIndex":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        entries = [
            IndexEntry(e["incident_id"], e["field_type"], e["text"], np.array(e["vector"]))
            for e in payload["entries"]
        ]
        return cls(entries, payload["meta"])


def build_index(corpus, extracted, store: WordVectorStore,
                enabled_fields: tuple[str, ...] = FIELD_ORDER) -> SearchIndex:
    """Index all raw and extracted units, in deterministic order."""
    entries: list[IndexEntry] = []

    def add(incident_id: str, field_type: str, text: str) -> None:
        if field_type not in enabled_fields or not text.strip():
            return
        vec = embed_text(text, store, normalize=True)
        entries.append(IndexEntry(incident_id, field_type, text, vec))

    for rec in corpus:
        ext = extracted[rec.id]
        add(rec.id, "subject", rec.subject)
        for update in rec.investigation:
            for a, b in split_sentences(update.text):
                add(rec.id, "investigation_sentence", update.text[a:b])
        for phrase, _ in ext.topics:
            add(rec.id, "topic", phrase)
        for sentence in ext.summary:
            add(rec.id, "summary_sentence", sentence)
        for span, _ in ext.root_causes:
            add(rec.id, "rootcause_span", span)
        for span, _ in ext.resolutions:
            add(rec.id, "resolution_span", span)

    meta = {
        "version": 1,
        "d": store.dimension,
        "store_id": store.store_id,
        "corpus_hash": corpus_hash(list(corpus)),
        "n_entries": len(entries),
        "fields": list(enabled_fields),
    }
    return SearchIndex(entries, meta)


def embed_query(q: str, store: WordVectorStore) -> np.ndarray:
    if not tokenize(q).non_stop():
        raise EmptyQueryError("empty query")
    return embed_text(q, store, normalize=True)


def query(index: SearchIndex, q: str, k: int, store: WordVectorStore,
          exclude: set[str] | frozenset[str] = frozenset()) -> list[RankedResult]:
    """Top-k incidents by max-pooled cosine; ties break by incident id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    qv = embed_query(q, store)
    if not index.entries:
        return []
    scores = index.matrix @ qv
    doc_scores = np.maximum.reduceat(scores, index._starts)
    order = sorted(range(len(index.block_ids)),
                   key=lambda b: (-doc_scores[b], index.block_ids[b]))
    results: list[RankedResult] = []
    n_blocks = len(index.block_ids)
    for b in order:
        iid = index.block_ids[b]
        if iid in exclude:
            continue
        start = index.block_starts[b]
        end = index.block_starts[b + 1] if b + 1 < n_blocks else len(index.entries)
        matched = sorted(
            ((index.entries[p], float(scores[p])) for p in range(start, end)),
            key=lambda es: -es[1],
        )
        results.append(RankedResult(iid, float(doc_scores[b]), matched))
        if len(results) == k:
            break
    return results
