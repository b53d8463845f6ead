"""Tokenization, stop words, word vectors and text embeddings.

Everything downstream (extraction, clustering, search) goes through this
module, so the rules here are deliberately small and fixed: a regex
tokenizer, an embedded stop-word list, a lexicon of known agglutinations
("connpool" and friends), and a word-vector store whose unknown-token
fallback is a deterministic hash-derived unit vector.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

# Embedded stop list: common English function words plus conversational
# filler that shows up in ops chatter. Single-letter tokens are never
# stop-flagged (they are usually identifiers in this domain).
STOP_WORDS = frozenset(
    """
    about above after again against all also am an and any are as at
    back be because been before being below between both but by can
    cannot could did do does doing down during each else etc few for
    from further had has have having he her here hers him his how if in
    into is it its itself just may me might more most must my no nor
    not now of off on once only onto or other our ours out over own per
    same shall she should since so some such than that the their theirs
    them then there these they this those through to too under until up
    upon us very via was we were what when where which while who whom
    why will with within without would you your yours
    please thanks thank hi hello hey fyi pls regards kindly note okay
    """.split()
)

# Known run-together spellings seen in incident write-ups, expanded back
# into their parts alongside the original token.
AGGLUTINATIONS: dict[str, tuple[str, ...]] = {
    "connpool": ("conn", "pool"),
    "conpool": ("conn", "pool"),
    "connpools": ("conn", "pools"),
    "connectionpool": ("connection", "pool"),
    "messagequeue": ("message", "queue"),
    "msgqueue": ("msg", "queue"),
    "threadpool": ("thread", "pool"),
    "batchjob": ("batch", "job"),
    "loadbalancer": ("load", "balancer"),
    "appserver": ("app", "server"),
    "dbserver": ("db", "server"),
    "diskio": ("disk", "io"),
    "searchindex": ("search", "index"),
    "memleak": ("mem", "leak"),
    "dbcpu": ("db", "cpu"),
    "appcpu": ("app", "cpu"),
    "ratelimit": ("rate", "limit"),
}

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def is_stop_word(token: str) -> bool:
    return token in STOP_WORDS


@dataclass
class TokenSequence:
    """Lowercased tokens with a parallel stop-word mask."""

    tokens: list[str] = field(default_factory=list)
    is_stop: list[bool] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.is_stop):
            raise ValueError("tokens and is_stop must have equal length")

    def __len__(self) -> int:
        return len(self.tokens)

    def non_stop(self) -> list[str]:
        return [t for t, s in zip(self.tokens, self.is_stop) if not s]


def tokenize(text: str) -> TokenSequence:
    """Lowercase, split on whitespace/punctuation, expand agglutinations.

    A token found in the agglutination lexicon is kept and its parts are
    inserted right after it, so "connpool errors" yields
    [connpool, conn, pool, errors].
    """
    tokens: list[str] = []
    for tok in _TOKEN_RE.findall(text.lower()):
        tokens.append(tok)
        parts = AGGLUTINATIONS.get(tok)
        if parts:
            tokens.extend(parts)
    return TokenSequence(tokens, [is_stop_word(t) for t in tokens])


def non_stop_counts(text: str) -> Counter:
    """Multiset of non-stop tokens, the unit of word-overlap metrics."""
    return Counter(tokenize(text).non_stop())


def _hash_vector(token: str, dim: int) -> np.ndarray:
    """Deterministic unit vector for a token, independent of any store."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "big"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


class WordVectorStore:
    """Immutable token -> vector table with a hash-vector fallback.

    Unknown tokens never error: they map to a stable hash-derived unit
    vector, so unseen jargon still lands in a reproducible location.
    """

    def __init__(self, dimension: int, table: dict[str, np.ndarray] | None = None,
                 normalize: bool = False, store_id: str | None = None):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self._table = dict(table or {})
        self.normalize = normalize
        self.store_id = store_id or f"hash:d={dimension}"
        self._fallback_cache: dict[str, np.ndarray] = {}

    def __contains__(self, token: str) -> bool:
        return token in self._table

    def __len__(self) -> int:
        return len(self._table)

    def vector(self, token: str) -> np.ndarray:
        v = self._table.get(token)
        if v is None:
            v = self._fallback_cache.get(token)
            if v is None:
                v = _hash_vector(token, self.dimension)
                self._fallback_cache[token] = v
        return v

    def fallback_vector(self) -> np.ndarray:
        """Vector used when a text has no usable tokens at all."""
        return self.vector("")


def load_vectors(path: str, normalize: bool = False) -> WordVectorStore:
    """Read a "token v1 ... vd" text file into a store.

    The dimension is inferred from the first line; inconsistent lines and
    empty files are errors that name the offending line.
    """
    table: dict[str, np.ndarray] = {}
    dim: int | None = None
    hasher = hashlib.sha256()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            hasher.update(line.encode("utf-8"))
            parts = line.split()
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise ValueError(f"line {lineno}: no vector values for {token!r}")
            elif len(values) != dim:
                raise ValueError(
                    f"line {lineno}: expected {dim} values, got {len(values)}"
                )
            try:
                table[token] = np.array([float(v) for v in values], dtype=float)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad float ({exc})") from None
    if dim is None:
        raise ValueError(f"empty vector file: {path}")
    store_id = f"file:{hasher.hexdigest()[:12]}:d={dim}"
    return WordVectorStore(dim, table, normalize=normalize, store_id=store_id)


def embed_text(text: str, store: WordVectorStore,
               normalize: bool | None = None) -> np.ndarray:
    """Term-frequency weighted average of non-stop token vectors.

    v = sum_t (tf(t) / sum tf) * vec(t). Texts with no non-stop token map
    to the store fallback vector. When `normalize` (default: the store
    flag) is set the result is L2-normalized.
    """
    if normalize is None:
        normalize = store.normalize
    counts = Counter(tokenize(text).non_stop())
    if not counts:
        v = store.fallback_vector().copy()
    else:
        total = sum(counts.values())
        v = np.zeros(store.dimension)
        for token, tf in counts.items():
            v += (tf / total) * store.vector(token)
    if normalize:
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            v = store.fallback_vector().copy()
            norm = np.linalg.norm(v)
        v = v / norm
    return v


def l2_normalize(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0 or not math.isfinite(norm):
        raise ValueError("cannot normalize zero or non-finite vector")
    return v / norm
