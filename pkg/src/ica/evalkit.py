"""Evaluation metrics and the leave-one-out retrieval benchmark.

BLEU-4 here is the short-text variant used throughout: effective max
order min(4, candidate length, reference length), unigram precision
unsmoothed, higher orders add-one smoothed only when they have zero
matches, with the standard brevity penalty. Scores are reported x100.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field

from .extract import UNKNOWN_SYMPTOM, raw_tokens, split_sentences
from .rca import CkgInference, rca_search_only, rca_with_ckg
from .search import SearchIndex, query as search_query
from .textprep import WordVectorStore, non_stop_counts


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate: str, reference: str) -> float:
    """Sentence BLEU with n <= 4, brevity penalty and add-one smoothing."""
    cand = raw_tokens(candidate)
    ref = raw_tokens(reference)
    if not cand or not ref:
        return 0.0
    max_n = min(4, len(cand), len(ref))
    log_sum = 0.0
    for n in range(1, max_n + 1):
        c_counts = _ngram_counts(cand, n)
        m = sum((c_counts & _ngram_counts(ref, n)).values())
        g = len(cand) - n + 1
        if n == 1:
            if m == 0:
                return 0.0
            p = m / g
        else:
            p = m / g if m > 0 else 1.0 / (g + 1)
        log_sum += math.log(p)
    gm = math.exp(log_sum / max_n)
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return bp * gm


class BleuCache:
    """Pairwise BLEU with per-text token/ngram caching for corpus loops."""

    def __init__(self) -> None:
        self._prep: dict[str, tuple[list[str], list[Counter]]] = {}
        self._pair: dict[tuple[str, str], float] = {}

    def _get(self, text: str) -> tuple[list[str], list[Counter]]:
        got = self._prep.get(text)
        if got is None:
            toks = raw_tokens(text)
            got = (toks, [_ngram_counts(toks, n) for n in range(1, 5)])
            self._prep[text] = got
        return got

    def bleu(self, candidate: str, reference: str) -> float:
        key = (candidate, reference)
        hit = self._pair.get(key)
        if hit is not None:
            return hit
        cand, c_counts = self._get(candidate)
        ref, r_counts = self._get(reference)
        if not cand or not ref:
            self._pair[key] = 0.0
            return 0.0
        max_n = min(4, len(cand), len(ref))
        log_sum = 0.0
        value = None
        for n in range(1, max_n + 1):
            m = sum((c_counts[n - 1] & r_counts[n - 1]).values())
            g = len(cand) - n + 1
            if n == 1:
                if m == 0:
                    value = 0.0
                    break
                p = m / g
            else:
                p = m / g if m > 0 else 1.0 / (g + 1)
            log_sum += math.log(p)
        if value is None:
            bp = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
            value = bp * math.exp(log_sum / max_n)
        self._pair[key] = value
        return value


def list_bleu(d_t: list[str], d_r: list[str], cache: BleuCache | None = None) -> float:
    """Mean over target texts of the best BLEU against any retrieved text."""
    if not d_t:
        raise ValueError("target list must be non-empty")
    if not d_r:
        return 0.0
    scorer = cache.bleu if cache is not None else bleu4
    return sum(max(scorer(s_j, s_i) for s_j in d_r) for s_i in d_t) / len(d_t)


def bow_recall(target: str, retrieved: str) -> float:
    """Recall of the target's non-stop word multiset over the retrieved."""
    t = non_stop_counts(target)
    if not t:
        return 0.0
    r = non_stop_counts(retrieved)
    return sum((t & r).values()) / sum(t.values())


def _norm_text(text: str) -> str:
    return " ".join(text.lower().split())


def exact_match_f1(targets: list[str], retrieved: list[str]) -> float:
    if not targets or not retrieved:
        return 0.0
    t = Counter(_norm_text(x) for x in targets)
    r = Counter(_norm_text(x) for x in retrieved)
    matches = sum((t & r).values())
    if matches == 0:
        return 0.0
    precision = matches / len(retrieved)
    recall = matches / len(targets)
    return 2 * precision * recall / (precision + recall)


# --- benchmark harness -------------------------------------------------------

@dataclass
class BenchmarkConfig:
    k: int = 10
    rca_k: int = 10
    seed: int = 0
    variants: tuple[str, ...] = ("Random", "SearchOnly", "SearchPlusCKG")


@dataclass
class _Agg:
    total_avg: float = 0.0
    total_max: float = 0.0
    count: int = 0

    def add(self, values: list[float]) -> None:
        if not values:
            return
        self.total_avg += sum(values) / len(values)
        self.total_max += max(values)
        self.count += 1

    def cell(self) -> dict[str, float]:
        if self.count == 0:
            return {"avg": 0.0, "max": 0.0}
        return {"avg": 100.0 * self.total_avg / self.count,
                "max": 100.0 * self.total_max / self.count}


@dataclass
class _DocView:
    subject: str
    sentences: list[str]
    topics: list[str]
    summary: list[str]
    rc_spans: list[str]
    res_spans: list[str]


def _doc_view(rec, ext) -> _DocView:
    inv = rec.investigation_text()
    return _DocView(
        subject=rec.subject,
        sentences=[inv[a:b] for a, b in split_sentences(inv)] if inv else [],
        topics=[p for p, _ in ext.topics],
        summary=list(ext.summary),
        rc_spans=[s for s, _ in ext.root_causes],
        res_spans=[s for s, _ in ext.resolutions],
    )


def benchmark(corpus, extracted, index: SearchIndex, store: WordVectorStore,
              inference_rc: CkgInference | None = None,
              inference_res: CkgInference | None = None,
              config: BenchmarkConfig | None = None) -> dict:
    """Leave-one-out: each incident's symptom queries the rest of the corpus.

    Search cells (document/subject/topics/summary) are shared by the
    search-based variants; the random baseline draws a seeded uniform
    top-K as the sanity floor. RCA cells compare the predicted candidate
    lists against the target's extracted spans.
    """
    config = config or BenchmarkConfig()
    cache = BleuCache()
    rng = random.Random(config.seed)
    views = {rec.id: _doc_view(rec, extracted[rec.id]) for rec in corpus}
    ids = [rec.id for rec in corpus]

    search_cells = {
        "document_bleu": _Agg(), "subject_bleu": _Agg(), "topics_f1": _Agg(),
        "topics_bow": _Agg(), "topics_bleu": _Agg(), "summary_bleu": _Agg(),
    }
    random_cells = {k: _Agg() for k in search_cells}
    rca_cells = {
        variant: {f"{kind}_{metric}": _Agg()
                  for kind in ("rootcause", "resolution") for metric in ("bleu", "bow")}
        for variant in ("SearchOnly", "SearchPlusCKG")
    }

    def add_search_metrics(cells, target: _DocView, retrieved: list[_DocView]) -> None:
        def per_doc(fn) -> list[float]:
            return [fn(doc) for doc in retrieved]

        if target.sentences:
            cells["document_bleu"].add(per_doc(
                lambda d: list_bleu(target.sentences, d.sentences, cache) if d.sentences else 0.0))
        cells["subject_bleu"].add(per_doc(lambda d: cache.bleu(d.subject, target.subject)))
        if target.topics:
            cells["topics_f1"].add(per_doc(lambda d: exact_match_f1(target.topics, d.topics)))
            cells["topics_bow"].add(per_doc(
                lambda d: bow_recall(" ".join(target.topics), " ".join(d.topics))))
            cells["topics_bleu"].add(per_doc(
                lambda d: list_bleu(target.topics, d.topics, cache) if d.topics else 0.0))
        if target.summary:
            cells["summary_bleu"].add(per_doc(
                lambda d: list_bleu(target.summary, d.summary, cache) if d.summary else 0.0))

    def add_rca_metrics(cells, kind: str, targets: list[str], prediction) -> None:
        # The true root cause / resolution is the target's best extracted span.
        if not targets:
            return
        truth = targets[0]
        texts = [t for t, _ in prediction.items]
        cells[f"{kind}_bleu"].add([cache.bleu(t, truth) for t in texts])
        cells[f"{kind}_bow"].add([bow_recall(truth, t) for t in texts])

    for rec in corpus:
        target_view = views[rec.id]
        q = extracted[rec.id].symptom
        if not q or q == UNKNOWN_SYMPTOM:
            q = rec.subject

        results = search_query(index, q, config.k, store, exclude={rec.id})
        assert all(r.incident_id != rec.id for r in results), "query incident leaked into results"
        retrieved_views = [views[r.incident_id] for r in results]
        add_search_metrics(search_cells, target_view, retrieved_views)

        if "Random" in config.variants and len(ids) > 1:
            pool = [i for i in ids if i != rec.id]
            sample = rng.sample(pool, min(config.k, len(pool)))
            add_search_metrics(random_cells, target_view, [views[i] for i in sample])

        if results and "SearchOnly" in config.variants:
            for kind, targets in (("rootcause", target_view.rc_spans),
                                  ("resolution", target_view.res_spans)):
                pred = rca_search_only(results, extracted, config.rca_k, kind)
                add_rca_metrics(rca_cells["SearchOnly"], kind, targets, pred)
        if results and "SearchPlusCKG" in config.variants:
            for kind, inference, targets in (
                    ("rootcause", inference_rc, target_view.rc_spans),
                    ("resolution", inference_res, target_view.res_spans)):
                if inference is None:
                    continue
                pred = rca_with_ckg(results, extracted, inference, config.rca_k, kind)
                add_rca_metrics(rca_cells["SearchPlusCKG"], kind, targets, pred)

    report = {
        "config": {"k": config.k, "rca_k": config.rca_k, "seed": config.seed,
                   "variants": list(config.variants)},
        "n_incidents": len(ids),
        "search": {name: agg.cell() for name, agg in search_cells.items()},
        "random": {name: agg.cell() for name, agg in random_cells.items()},
        "rca": {variant: {name: agg.cell() for name, agg in cells.items()}
                for variant, cells in rca_cells.items()},
    }
    return report
