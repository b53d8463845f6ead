"""Causal knowledge graph: typed nodes, cluster heads and persistence.

Leaves are unique symptom / root-cause / resolution texts with the
incidents that produced them; causal and remedial edges link leaves that
co-occur in an incident. Symptom leaves are grouped by Ward clustering
into symptomType heads; root causes and resolutions get global affinity
propagation heads (which define cluster-sibling edges) plus local heads
per symptom cluster. Head labels come from greedy PMI n-gram selection
over the member texts.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .clustering import affinity_propagation, ward_cluster
from .extract import UNKNOWN_SYMPTOM, raw_tokens
from .textprep import WordVectorStore, embed_text, is_stop_word

SYMPTOM = "symptom"
ROOT_CAUSE = "rootCause"
RESOLUTION = "resolution"
SYMPTOM_TYPE = "symptomType"
ROOT_CAUSE_TYPE = "rootCauseType"
RESOLUTION_TYPE = "resolutionType"
GLOBAL_ROOT_CAUSE_TYPE = "globalRootCauseType"
GLOBAL_RESOLUTION_TYPE = "globalResolutionType"

LEAF_TYPES = (SYMPTOM, ROOT_CAUSE, RESOLUTION)
HEAD_TYPES = (SYMPTOM_TYPE, ROOT_CAUSE_TYPE, RESOLUTION_TYPE,
              GLOBAL_ROOT_CAUSE_TYPE, GLOBAL_RESOLUTION_TYPE)

CAUSAL = "causal"
REMEDIAL = "remedial"
MEMBERSHIP = "cluster-membership"
SIBLING = "cluster-sibling"

_LEAF_OF_KIND = {"rootcause": ROOT_CAUSE, "resolution": RESOLUTION}
_GLOBAL_OF_KIND = {"rootcause": GLOBAL_ROOT_CAUSE_TYPE, "resolution": GLOBAL_RESOLUTION_TYPE}
_LOCAL_OF_KIND = {"rootcause": ROOT_CAUSE_TYPE, "resolution": RESOLUTION_TYPE}
_OBSERVED_OF_KIND = {"rootcause": CAUSAL, "resolution": REMEDIAL}


@dataclass
class CkgNode:
    node_id: str
    node_type: str
    label: str
    embedding: np.ndarray | None = None
    incident_ids: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class CkgEdge:
    src: str
    dst: str
    edge_type: str


class CausalKnowledgeGraph:
    def __init__(self) -> None:
        self.nodes: dict[str, CkgNode] = {}
        self.edges: list[CkgEdge] = []
        self._edge_set: set[CkgEdge] = set()
        self.cluster_assignments: dict[str, dict[str, str]] = {}
        self.warnings: list[str] = []
        self.reports: dict[str, dict] = {}

    def add_node(self, node: CkgNode) -> CkgNode:
        if node.node_id in self.nodes:
            raise ValueError(f"duplicate node id {node.node_id!r}")
        self.nodes[node.node_id] = node
        return node

    def add_edge(self, src: str, dst: str, edge_type: str) -> None:
        if src not in self.nodes or dst not in self.nodes:
            raise ValueError(f"edge endpoint missing: {src!r} -> {dst!r}")
        edge = CkgEdge(src, dst, edge_type)
        if edge not in self._edge_set:
            self._edge_set.add(edge)
            self.edges.append(edge)

    def nodes_of_type(self, node_type: str) -> list[CkgNode]:
        return [n for n in self.nodes.values() if n.node_type == node_type]

    def edges_of_type(self, edge_type: str) -> list[CkgEdge]:
        return [e for e in self.edges if e.edge_type == edge_type]

    def adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = defaultdict(set)
        for e in self.edges:
            adj[e.src].add(e.dst)
            adj[e.dst].add(e.src)
        return adj

    def to_dict(self, include_embeddings: bool = True) -> dict:
        nodes = []
        for n in self.nodes.values():
            obj = {"id": n.node_id, "type": n.node_type, "label": n.label,
                   "incidents": sorted(n.incident_ids)}
            if include_embeddings and n.embedding is not None:
                obj["embedding"] = [float(x) for x in n.embedding]
            nodes.append(obj)
        return {
            "nodes": nodes,
            "edges": [{"src": e.src, "dst": e.dst, "type": e.edge_type} for e in self.edges],
            "cluster_assignments": self.cluster_assignments,
            "warnings": self.warnings,
            "reports": self.reports,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CausalKnowledgeGraph":
        g = cls()
        for n in obj["nodes"]:
            emb = n.get("embedding")
            g.add_node(CkgNode(n["id"], n["type"], n["label"],
                               np.array(emb) if emb is not None else None,
                               set(n.get("incidents", []))))
        for e in obj["edges"]:
            g.add_edge(e["src"], e["dst"], e["type"])
        g.cluster_assignments = {lvl: dict(m) for lvl, m in obj.get("cluster_assignments", {}).items()}
        g.warnings = list(obj.get("warnings", []))
        g.reports = dict(obj.get("reports", {}))
        return g

    def save(self, path: str, include_embeddings: bool = True) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(include_embeddings), fh, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "CausalKnowledgeGraph":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# --- document-level construction -------------------------------------------

def build_document_graphs(extracted, store: WordVectorStore) -> CausalKnowledgeGraph:
    """Leaves plus causal/remedial edges from per-incident extractions.

    Nodes are deduplicated by exact lowercase text; incidents with an
    empty (or unknown-marker) symptom contribute nothing and are logged.
    """
    if isinstance(extracted, dict):
        extracted = list(extracted.values())
    g = CausalKnowledgeGraph()
    index: dict[tuple[str, str], CkgNode] = {}
    counters = {SYMPTOM: 0, ROOT_CAUSE: 0, RESOLUTION: 0}

    def intern(node_type: str, text: str, incident_id: str) -> CkgNode:
        key = (node_type, text.lower())
        node = index.get(key)
        if node is None:
            node = CkgNode(f"{node_type}:{counters[node_type]:05d}", node_type,
                           text, embed_text(text, store))
            counters[node_type] += 1
            g.add_node(node)
            index[key] = node
        node.incident_ids.add(incident_id)
        return node

    for ext in extracted:
        if not ext.symptom or ext.symptom == UNKNOWN_SYMPTOM:
            g.warnings.append(f"incident {ext.incident_id}: empty symptom, skipped")
            continue
        sym = intern(SYMPTOM, ext.symptom, ext.incident_id)
        for span, _ in ext.root_causes:
            rc = intern(ROOT_CAUSE, span, ext.incident_id)
            g.add_edge(sym.node_id, rc.node_id, CAUSAL)
        for span, _ in ext.resolutions:
            res = intern(RESOLUTION, span, ext.incident_id)
            g.add_edge(sym.node_id, res.node_id, REMEDIAL)
    return g


# --- clustering passes ------------------------------------------------------

def _make_head(g: CausalKnowledgeGraph, head_id: str, head_type: str,
               members: list[CkgNode], embedding: np.ndarray,
               seed_label: str) -> CkgNode:
    head = g.add_node(CkgNode(head_id, head_type, seed_label, embedding))
    for leaf in members:
        head.incident_ids |= leaf.incident_ids
        g.add_edge(leaf.node_id, head.node_id, MEMBERSHIP)
    return head


def _add_sibling_edges(g: CausalKnowledgeGraph, members: list[CkgNode]) -> None:
    ids = sorted(n.node_id for n in members)
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            g.add_edge(ids[i], ids[j], SIBLING)


def cluster_symptoms(g: CausalKnowledgeGraph, k_range: list[int] | None = None,
                     k_override: int | None = None) -> dict:
    """Ward clustering of symptom leaves into symptomType heads."""
    leaves = sorted(g.nodes_of_type(SYMPTOM), key=lambda n: n.node_id)
    if not leaves:
        raise ValueError("no symptom nodes to cluster")
    X = np.stack([n.embedding for n in leaves])
    report = ward_cluster(X, k_range=k_range, k_override=k_override)
    g.warnings.extend(report.warnings)

    clusters: dict[int, list[CkgNode]] = defaultdict(list)
    for leaf, lab in zip(leaves, report.labels):
        clusters[int(lab)].append(leaf)
    ordered = sorted(clusters.values(), key=lambda ms: min(n.node_id for n in ms))
    assignment: dict[str, str] = {}
    for ci, members in enumerate(ordered):
        head_id = f"{SYMPTOM_TYPE}:{ci:03d}"
        centroid = np.mean([n.embedding for n in members], axis=0)
        _make_head(g, head_id, SYMPTOM_TYPE, members, centroid,
                   seed_label=members[0].label)
        _add_sibling_edges(g, members)
        for n in members:
            assignment[n.node_id] = head_id
    g.cluster_assignments[SYMPTOM_TYPE] = assignment
    g.reports["symptom_clustering"] = {
        "k": report.k,
        "per_k": {str(k): v for k, v in report.per_k.items()},
    }
    return g.reports["symptom_clustering"]


def _ap_scope(g: CausalKnowledgeGraph, members: list[CkgNode], head_type: str,
              id_prefix: str, assignment: dict[str, str],
              sibling: bool) -> list[str]:
    members = sorted(members, key=lambda n: n.node_id)
    X = np.stack([n.embedding for n in members])
    result = affinity_propagation(X)
    if not result.converged:
        g.warnings.append(f"{id_prefix}: affinity propagation did not converge "
                          f"({result.n_iter} iterations), using current exemplars")
    heads = []
    for ci, ex in enumerate(result.exemplars):
        cluster_members = [members[i] for i in np.flatnonzero(result.labels == ci)]
        head_id = f"{id_prefix}{ci:03d}"
        head = _make_head(g, head_id, head_type, cluster_members,
                          np.array(members[ex].embedding), seed_label=members[ex].label)
        if sibling:
            _add_sibling_edges(g, cluster_members)
        for n in cluster_members:
            assignment[n.node_id] = head.node_id
        heads.append(head_id)
    return heads


def cluster_causes_resolutions(g: CausalKnowledgeGraph, kind: str,
                               scope: str = "global") -> dict:
    """Affinity propagation over root-cause or resolution leaves.

    Global scope clusters every leaf of the kind and defines the
    cluster-sibling edges used by link prediction; local scope clusters
    within each symptom cluster (each leaf attached to the symptom
    cluster it shares the most incidents with).
    """
    leaf_type = _LEAF_OF_KIND[kind]
    leaves = g.nodes_of_type(leaf_type)
    if not leaves:
        raise ValueError(f"no {leaf_type} nodes to cluster")

    if scope == "global":
        head_type = _GLOBAL_OF_KIND[kind]
        assignment: dict[str, str] = {}
        heads = _ap_scope(g, leaves, head_type, f"{head_type}:", assignment, sibling=True)
        g.cluster_assignments[head_type] = assignment
        return {"heads": heads}

    if scope != "local":
        raise ValueError(f"unknown scope {scope!r}")
    sym_assignment = g.cluster_assignments.get(SYMPTOM_TYPE)
    if not sym_assignment:
        raise ValueError("local clustering requires symptom clustering first")
    head_type = _LOCAL_OF_KIND[kind]
    by_scope: dict[str, list[CkgNode]] = defaultdict(list)
    for leaf in leaves:
        shared: Counter = Counter()
        for head_id in set(sym_assignment.values()):
            overlap = len(leaf.incident_ids & g.nodes[head_id].incident_ids)
            if overlap:
                shared[head_id] = overlap
        if shared:
            best = sorted(shared.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        else:
            best = "orphan"
        by_scope[best].append(leaf)

    assignment = {}
    heads = []
    for scope_head in sorted(by_scope):
        suffix = scope_head.split(":")[-1] if scope_head != "orphan" else "orp"
        prefix = f"{head_type}:{suffix}:"
        new_heads = _ap_scope(g, by_scope[scope_head], head_type, prefix,
                              assignment, sibling=False)
        if scope_head != "orphan":
            for h in new_heads:
                g.add_edge(h, scope_head, MEMBERSHIP)
        heads.extend(new_heads)
    g.cluster_assignments[head_type] = assignment
    return {"heads": heads}


# --- cluster labeling -------------------------------------------------------

def pmi_ngrams(member_labels: list[str]) -> list[tuple[str, float, int, list[set[tuple[int, int]]]]]:
    """Scored bigram/trigram candidates over the member-label pseudo-document.

    Each member label is one segment; n-grams never cross segments and
    need count >= 2. Returns (ngram, pmi, first position, occurrence
    position sets) with PMI = ln(p(ngram) / prod p(token)), token
    probabilities over the concatenated stream.
    """
    segments = [raw_tokens(lbl) for lbl in member_labels]
    stream = [t for seg in segments for t in seg]
    total = len(stream)
    if total == 0:
        return []
    tok_counts = Counter(stream)
    occurrences: dict[tuple[str, ...], list[set[tuple[int, int]]]] = defaultdict(list)
    firsts: dict[tuple[str, ...], int] = {}
    pos = 0
    for si, seg in enumerate(segments):
        for i in range(len(seg)):
            for n in (2, 3):
                if i + n <= len(seg):
                    gram = tuple(seg[i:i + n])
                    occurrences[gram].append({(si, i + k) for k in range(n)})
                    firsts.setdefault(gram, pos + i)
        pos += len(seg)
    out = []
    for gram, occ in occurrences.items():
        count = len(occ)
        if count < 2:
            continue
        n = len(gram)
        positions = max(total - n + 1, 1)
        p_gram = count / positions
        denom = 1.0
        for t in gram:
            denom *= tok_counts[t] / total
        out.append((" ".join(gram), math.log(p_gram / denom), firsts[gram], occ))
    return out


def label_cluster(member_labels: list[str], corpus_stats: Counter | None = None) -> str:
    """Greedy PMI n-gram label, reranked by mean normalized term frequency."""
    segments = [raw_tokens(lbl) for lbl in member_labels]
    stream = [t for seg in segments for t in seg]
    if not stream:
        return "unlabeled"
    tok_counts = Counter(stream)
    stats = corpus_stats if corpus_stats else tok_counts
    max_tf = max(stats.values()) if stats else 1

    candidates = sorted(pmi_ngrams(member_labels),
                        key=lambda c: (-c[1], -len(c[0].split()), c[2], c[0]))
    occupied: set[tuple[int, int]] = set()
    selected: list[str] = []
    for text, _pmi, _first, occ in candidates:
        if any(o & occupied for o in occ):
            continue
        selected.append(text)
        for o in occ:
            occupied |= o
        if len(selected) >= 5:
            break

    covered = {t for s in selected for t in s.split()}
    if len(selected) < 3:
        fill = [(t, c) for t, c in tok_counts.items()
                if t not in covered and not is_stop_word(t) and len(t) > 1 and not t.isdigit()]
        fill.sort(key=lambda tc: (-tc[1], stream.index(tc[0])))
        for t, _ in fill[: 3 - len(selected)]:
            selected.append(t)

    if not selected:
        return "unlabeled"

    def rerank_score(text: str) -> float:
        toks = [t for t in text.split() if not is_stop_word(t)]
        if not toks:
            return 0.0
        return sum(stats.get(t, 0) / max_tf for t in toks) / len(toks)

    order = {s: i for i, s in enumerate(selected)}
    selected.sort(key=lambda s: (-rerank_score(s), order[s]))
    return ", ".join(selected[:3])


def label_clusters(g: CausalKnowledgeGraph, corpus_stats: Counter | None = None) -> None:
    """Replace every cluster head's seed label with its PMI label."""
    if corpus_stats is None:
        corpus_stats = Counter()
        for n in g.nodes.values():
            if n.node_type in LEAF_TYPES:
                corpus_stats.update(raw_tokens(n.label))
    for level, assignment in g.cluster_assignments.items():
        members_of: dict[str, list[str]] = defaultdict(list)
        for leaf_id, head_id in assignment.items():
            members_of[head_id].append(leaf_id)
        for head_id, leaf_ids in members_of.items():
            labels = [g.nodes[i].label for i in sorted(leaf_ids)]
            g.nodes[head_id].label = label_cluster(labels, corpus_stats)


# --- queries ----------------------------------------------------------------

def subgraph_query(g: CausalKnowledgeGraph, query_node_ids: set[str], hops: int) -> CausalKnowledgeGraph:
    """Induced subgraph within `hops` of the seeds, plus member cluster heads."""
    for nid in query_node_ids:
        if nid not in g.nodes:
            raise KeyError(f"unknown node id {nid!r}")
    adj = g.adjacency()
    included = set(query_node_ids)
    frontier = set(query_node_ids)
    for _ in range(hops):
        nxt = set()
        for nid in frontier:
            nxt |= adj[nid]
        nxt -= included
        if not nxt:
            break
        included |= nxt
        frontier = nxt
    for assignment in g.cluster_assignments.values():
        for leaf_id in list(included):
            head = assignment.get(leaf_id)
            if head:
                included.add(head)

    sub = CausalKnowledgeGraph()
    for nid in g.nodes:
        if nid in included:
            n = g.nodes[nid]
            sub.add_node(CkgNode(n.node_id, n.node_type, n.label, n.embedding,
                                 set(n.incident_ids)))
    for e in g.edges:
        if e.src in included and e.dst in included:
            sub.add_edge(e.src, e.dst, e.edge_type)
    for level, assignment in g.cluster_assignments.items():
        kept = {k: v for k, v in assignment.items() if k in included and v in included}
        if kept:
            sub.cluster_assignments[level] = kept
    return sub


def build_ckg(extracted, store: WordVectorStore, k_range: list[int] | None = None,
              k_override: int | None = None) -> CausalKnowledgeGraph:
    """Full construction: leaves, clustering passes and labels."""
    g = build_document_graphs(extracted, store)
    cluster_symptoms(g, k_range=k_range, k_override=k_override)
    for kind in ("rootcause", "resolution"):
        if g.nodes_of_type(_LEAF_OF_KIND[kind]):
            cluster_causes_resolutions(g, kind, scope="global")
            cluster_causes_resolutions(g, kind, scope="local")
    label_clusters(g)
    return g
