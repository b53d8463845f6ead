"""Per-document targeted extraction.

Four extractors produce the structured view of an incident record: a
rule-based symptom from the subject, an ensemble of graph/frequency
keyphrase scorers for topics, a cue-phrase span extractor for root
causes and resolutions (behind a pluggable contract), and a sentence
graph ranker for the summary.
"""

from __future__ import annotations

import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .textprep import STOP_WORDS, WordVectorStore, embed_text, is_stop_word

_WORD_RE = re.compile(r"[a-z0-9]+")
_ABBREVIATIONS = frozenset({"e.g", "i.e", "etc", "vs", "approx", "no", "dr", "mr", "ms"})


def raw_tokens(text: str) -> list[str]:
    """Lowercase tokens without agglutination expansion."""
    return _WORD_RE.findall(text.lower())


def split_sentences(doc: str) -> list[tuple[int, int]]:
    """Sentence (start, end) offsets into `doc`.

    A boundary is [.!?] followed by whitespace and an uppercase letter or
    digit, unless the preceding word is a guarded abbreviation.
    """
    bounds: list[int] = []
    for m in re.finditer(r"[.!?]+(?=\s+[A-Z0-9])", doc):
        prev = re.search(r"([A-Za-z][\w.]*)$", doc[: m.start()])
        if prev and prev.group(1).lower().rstrip(".") in _ABBREVIATIONS:
            continue
        bounds.append(m.end())
    spans: list[tuple[int, int]] = []
    start = 0
    for b in bounds + [len(doc)]:
        seg = doc[start:b]
        ls = len(seg) - len(seg.lstrip())
        rs = len(seg) - len(seg.rstrip())
        if seg.strip():
            spans.append((start + ls, b - rs))
        start = b
    return spans


# --- symptom ---------------------------------------------------------------

_TIME_RE = re.compile(r"^\d{1,2}:\d{2}(:\d{2})?$")
_DATE_RES = (
    re.compile(r"^\d{4}-\d{2}-\d{2}"),
    re.compile(r"^\d{1,2}/\d{1,2}(/\d{2,4})?$"),
)

UNKNOWN_SYMPTOM = "unknown symptom"


def _is_host_like(chunk: str) -> bool:
    has_alpha = any(c.isalpha() for c in chunk)
    has_digit = any(c.isdigit() for c in chunk)
    return has_alpha and has_digit


def extract_symptom(subject: str) -> str:
    """Generic symptom from a subject line.

    Removes host/instance codes (tokens mixing letters and digits),
    timestamps and ticket ids, lowercases, collapses whitespace and trims
    dangling trailing stop words. A subject that reduces to nothing yields
    the literal "unknown symptom" marker.
    """
    kept: list[str] = []
    for chunk in subject.lower().split():
        core = chunk.strip("-_:;,.!?()[]{}|/\\'\"")
        if not core:
            continue
        if _is_host_like(core) or _TIME_RE.match(core) or any(r.match(core) for r in _DATE_RES):
            continue
        kept.append(core)
    while kept and kept[-1] in STOP_WORDS:
        kept.pop()
    return " ".join(kept) if kept else UNKNOWN_SYMPTOM


# --- shared power iteration ------------------------------------------------

def pagerank_scores(weights: np.ndarray, damping: float = 0.85,
                    teleport: np.ndarray | None = None, tol: float = 1e-6,
                    max_iter: int = 200) -> np.ndarray:
    """Power iteration over a symmetric non-negative weight matrix.

    Columns are normalized to be stochastic (dangling columns teleport);
    the result is a probability distribution. Terminates when successive
    iterates differ by less than `tol` in L1.
    """
    n = weights.shape[0]
    if n == 0:
        return np.zeros(0)
    if teleport is None:
        teleport = np.full(n, 1.0 / n)
    else:
        t = teleport.sum()
        teleport = np.full(n, 1.0 / n) if t <= 0 else teleport / t
    col_sums = weights.sum(axis=0)
    dangling = col_sums == 0
    M = np.divide(weights, np.where(dangling, 1.0, col_sums),
                  out=np.zeros_like(weights), where=~dangling)
    s = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        dangling_mass = s[dangling].sum()
        nxt = (1 - damping) * teleport + damping * (M @ s + dangling_mass * teleport)
        if np.abs(nxt - s).sum() < tol:
            return nxt
        s = nxt
    return s


# --- topics ----------------------------------------------------------------

def _candidate_word(tok: str) -> bool:
    return len(tok) > 1 and not tok.isdigit() and tok not in STOP_WORDS


def _phrase_stream(doc: str) -> tuple[list[str], list[int]]:
    """Token stream plus sentence ids, no agglutination expansion."""
    tokens: list[str] = []
    sent_ids: list[int] = []
    for sid, (a, b) in enumerate(split_sentences(doc)):
        for tok in raw_tokens(doc[a:b]):
            tokens.append(tok)
            sent_ids.append(sid)
    return tokens, sent_ids


def _candidate_phrases(tokens: list[str], sent_ids: list[int]) -> dict[str, tuple[int, list[str]]]:
    """phrase text -> (first position, member tokens). Boundaries non-stop."""
    out: dict[str, tuple[int, list[str]]] = {}
    n = len(tokens)
    for i in range(n):
        if not _candidate_word(tokens[i]):
            continue
        for length in (1, 2, 3):
            j = i + length - 1
            if j >= n or sent_ids[j] != sent_ids[i]:
                break
            if not _candidate_word(tokens[j]):
                continue
            phrase = " ".join(tokens[i:j + 1])
            if phrase not in out:
                out[phrase] = (i, tokens[i:j + 1])
    return out


def _cooccurrence(tokens: list[str], sent_ids: list[int], window: int = 4) -> tuple[list[str], np.ndarray]:
    words = sorted({t for t in tokens if _candidate_word(t)})
    index = {w: i for i, w in enumerate(words)}
    W = np.zeros((len(words), len(words)))
    for i, tok in enumerate(tokens):
        wi = index.get(tok)
        if wi is None:
            continue
        for j in range(i + 1, min(i + window, len(tokens))):
            if sent_ids[j] != sent_ids[i]:
                break
            wj = index.get(tokens[j])
            if wj is None or wj == wi:
                continue
            W[wi, wj] += 1.0
            W[wj, wi] += 1.0
    return words, W


def _normalize_dist(scores: dict[str, float]) -> dict[str, float]:
    total = sum(scores.values())
    if total <= 0:
        n = len(scores)
        return {k: 1.0 / n for k in scores} if n else {}
    return {k: v / total for k, v in scores.items()}


def ensemble_topics(member_outputs: list[dict[str, float]]) -> dict[str, float]:
    """Mean of member distributions over the union of phrases, renormalized."""
    members = [m for m in member_outputs if m]
    if not members:
        return {}
    union: dict[str, float] = defaultdict(float)
    for m in members:
        for phrase, p in m.items():
            union[phrase] += p
    merged = {k: v / len(members) for k, v in union.items()}
    return _normalize_dist(merged)


def extract_topics(doc: str, k: int) -> list[tuple[str, float]]:
    """Top-k topical phrases from a TextRank/PositionRank/TF ensemble."""
    if k < 1:
        raise ValueError("k must be >= 1")
    tokens, sent_ids = _phrase_stream(doc)
    candidates = _candidate_phrases(tokens, sent_ids)
    if not candidates:
        return []
    words, W = _cooccurrence(tokens, sent_ids)
    index = {w: i for i, w in enumerate(words)}

    tr = pagerank_scores(W)
    pos_teleport = np.zeros(len(words))
    for i, tok in enumerate(tokens):
        wi = index.get(tok)
        if wi is not None:
            pos_teleport[wi] += 1.0 / (i + 1)
    pr = pagerank_scores(W, teleport=pos_teleport)
    tf = Counter(t for t in tokens if _candidate_word(t))

    def phrase_scores(word_score) -> dict[str, float]:
        out = {}
        for phrase, (_, members) in candidates.items():
            out[phrase] = sum(word_score(w) for w in members if _candidate_word(w))
        return _normalize_dist(out)

    models = [
        phrase_scores(lambda w: tr[index[w]]),
        phrase_scores(lambda w: pr[index[w]]),
        phrase_scores(lambda w: float(tf[w])),
    ]
    merged = ensemble_topics(models)
    ranked = sorted(merged.items(), key=lambda kv: (-kv[1], candidates[kv[0]][0], kv[0]))
    top = ranked[:k]
    total = sum(s for _, s in top)
    return [(p, s / total) for p, s in top]


# --- spans -----------------------------------------------------------------

@dataclass
class CueSpanExtractor:
    """Baseline span extractor: kind-specific cue phrases.

    Any object with a `name` and `extract(document, query) -> [(span,
    score)]` returning document substrings scored in (0, 1] satisfies the
    same contract and can replace it.
    """

    kind: str
    max_non_stop = 12

    # (cue regex, weight, mode); mode "after" takes the clause following
    # the cue, "at" the clause from the cue onwards. Longest cues first.
    CUES = {
        "rootcause": [
            (re.compile(r"\bwas caused by\b", re.I), 1.0, "after"),
            (re.compile(r"\bcaused by\b", re.I), 1.0, "after"),
            (re.compile(r"\broot cause was\b", re.I), 1.0, "after"),
            (re.compile(r"\broot cause\b", re.I), 0.95, "after"),
            (re.compile(r"\boccurred due to\b", re.I), 0.9, "after"),
            (re.compile(r"\bdue to\b", re.I), 0.9, "after"),
            (re.compile(r"\bbecause of\b", re.I), 0.9, "after"),
        ],
        "resolution": [
            (re.compile(r"\bwas resolved by\b", re.I), 1.0, "after"),
            (re.compile(r"\bresolved by\b", re.I), 1.0, "after"),
            (re.compile(r"\bwas fixed by\b", re.I), 1.0, "after"),
            (re.compile(r"\bfixed by\b", re.I), 1.0, "after"),
            (re.compile(r"\bmitigated by\b", re.I), 0.95, "after"),
            (re.compile(r"\bmitigated\b", re.I), 0.85, "after"),
            (re.compile(r"\brestart(?:ed|ing)\b", re.I), 0.9, "at"),
            (re.compile(r"\broll(?:ed|ing) back\b", re.I), 0.9, "at"),
            (re.compile(r"\bthrottl(?:ed|ing|e)\b", re.I), 0.9, "at"),
        ],
    }

    def __post_init__(self) -> None:
        if self.kind not in self.CUES:
            raise ValueError(f"unknown span kind {self.kind!r}")
        self.name = f"cue-{self.kind}"

    # Leading connectives dropped from a clause ("root cause was X" -> X);
    # articles stay, they belong to the span.
    _LEAD_SKIP = frozenset({"was", "were", "is", "are", "be", "been", "being", "that", "it"})

    def _clip(self, doc: str, start: int, end: int) -> str:
        """Trim separators and leading copulas, cap at 12 non-stop tokens."""
        seg = doc[start:end]
        lead = len(seg) - len(seg.lstrip(" \t,:;-"))
        start += lead
        matches = list(_WORD_RE.finditer(doc[start:end].lower()))
        while matches and matches[0].group(0) in self._LEAD_SKIP:
            start += matches[0].end()
            matches = list(_WORD_RE.finditer(doc[start:end].lower()))
        non_stop = 0
        cut = end
        for m in matches:
            if m.group(0) not in STOP_WORDS:
                non_stop += 1
                if non_stop == self.max_non_stop:
                    cut = start + m.end()
                    break
        return doc[start:cut].strip(" \t,:;-.!?")

    def extract(self, document: str, query: str = "") -> list[tuple[str, float]]:
        results: list[tuple[str, float, int]] = []
        for idx, (a, b) in enumerate(split_sentences(document)):
            sentence = document[a:b]
            best = None
            for pattern, weight, mode in self.CUES[self.kind]:
                m = pattern.search(sentence)
                if m and (best is None or (weight, -m.start()) > (best[1], -best[2].start())):
                    best = (mode, weight, m)
            if best is None:
                continue
            mode, weight, m = best
            span_start = a + (m.end() if mode == "after" else m.start())
            span = self._clip(document, span_start, b)
            if not span:
                continue
            prior = 1.0 / (1.0 + 0.02 * idx)
            results.append((span, weight * prior, idx))

        dedup: dict[str, tuple[str, float, int]] = {}
        for span, score, idx in results:
            key = " ".join(span.lower().split())
            cur = dedup.get(key)
            if cur is None or score > cur[1]:
                dedup[key] = (span, score, idx)
        if not dedup:
            return []
        items = sorted(dedup.values(), key=lambda t: (-t[1], t[2]))
        top = items[0][1]
        return [(span, score / top) for span, score, _ in items]


QUERY_TEMPLATES = {
    "rootcause": "What was the root cause of {symptom}?",
    "resolution": "What was done to remedy {symptom}?",
}


def extract_spans(doc: str, kind: str, extractor=None,
                  symptom: str = "the incident") -> list[tuple[str, float]]:
    """Scored spans of the given kind; empty list when no cue is found."""
    if not doc:
        return []
    if extractor is None:
        extractor = CueSpanExtractor(kind)
    query = QUERY_TEMPLATES[kind].format(symptom=symptom)
    return extractor.extract(doc, query)


# --- summary ---------------------------------------------------------------

def extract_summary(doc: str, m: int, store: WordVectorStore) -> list[str]:
    """Top-m sentences by similarity-graph rank, in document order."""
    if m < 1:
        raise ValueError("m must be >= 1")
    spans = split_sentences(doc)
    texts = [doc[a:b] for a, b in spans]
    if len(texts) <= m:
        return texts
    X = np.stack([embed_text(t, store) for t in texts])
    norms = np.linalg.norm(X, axis=1)
    norms[norms == 0] = 1.0
    Xn = X / norms[:, None]
    sim = Xn @ Xn.T
    np.fill_diagonal(sim, 0.0)
    sim[sim < 0.1] = 0.0
    scores = pagerank_scores(sim)
    order = sorted(range(len(texts)), key=lambda i: (-scores[i], i))[:m]
    return [texts[i] for i in sorted(order)]


# --- per-incident wrapper --------------------------------------------------

@dataclass
class ExtractedIncident:
    """Structured knowledge extracted from one incident record."""

    incident_id: str
    symptom: str
    topics: list[tuple[str, float]] = field(default_factory=list)
    summary: list[str] = field(default_factory=list)
    root_causes: list[tuple[str, float]] = field(default_factory=list)
    resolutions: list[tuple[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "incident_id": self.incident_id,
            "symptom": self.symptom,
            "topics": [[p, s] for p, s in self.topics],
            "summary": list(self.summary),
            "root_causes": [[p, s] for p, s in self.root_causes],
            "resolutions": [[p, s] for p, s in self.resolutions],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ExtractedIncident":
        return cls(
            incident_id=obj["incident_id"],
            symptom=obj["symptom"],
            topics=[(p, float(s)) for p, s in obj.get("topics", [])],
            summary=list(obj.get("summary", [])),
            root_causes=[(p, float(s)) for p, s in obj.get("root_causes", [])],
            resolutions=[(p, float(s)) for p, s in obj.get("resolutions", [])],
        )


def extract_incident(record, store: WordVectorStore, topics_k: int = 5,
                     summary_m: int = 5, rc_extractor=None,
                     res_extractor=None) -> ExtractedIncident:
    symptom = extract_symptom(record.subject)
    inv = record.investigation_text()
    return ExtractedIncident(
        incident_id=record.id,
        symptom=symptom,
        topics=extract_topics(inv, topics_k) if inv else [],
        summary=extract_summary(inv, summary_m, store) if inv else [],
        root_causes=extract_spans(record.rca_doc, "rootcause", rc_extractor, symptom),
        resolutions=extract_spans(record.resolution_doc, "resolution", res_extractor, symptom),
    )


def extract_corpus(records, store: WordVectorStore, **kw) -> dict[str, ExtractedIncident]:
    return {rec.id: extract_incident(rec, store, **kw) for rec in records}


def save_extracted(extracted: dict[str, ExtractedIncident], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for iid in extracted:
            fh.write(json.dumps(extracted[iid].to_dict(), sort_keys=True) + "\n")


def load_extracted(path: str) -> dict[str, ExtractedIncident]:
    out: dict[str, ExtractedIncident] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                ext = ExtractedIncident.from_dict(json.loads(line))
                out[ext.incident_id] = ext
    return out
