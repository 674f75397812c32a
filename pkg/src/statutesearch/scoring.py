"""Lexical relevance scorers, BM25 candidate generation, and the
embedding-cosine feature.

Three bag-of-words scorers over the inverted index, all iterating over
distinct query terms (query-side multiplicity is ignored; term
frequency is document-side):

* TF-IDF: relative term frequency times smoothed inverse document
  frequency, `TF = tf / unit_length`, `IDF = max(floor, ln(N / (df+1)))`.
  The +1 keeps ubiquitous terms from going negative together with the
  floor (default 0).
* BM25: saturating TF with length normalization (k1, b) and the
  Robertson/Sparck-Jones IDF `ln(1 + (N - df + 0.5) / (df + 0.5))`,
  which is always positive.
* Query likelihood with Dirichlet smoothing: sum of
  `ln((tf + mu * p(t|C)) / (unit_length + mu))` over query terms,
  computed in the equivalent decomposed form
  `sum_{tf>0} ln(p_s / (alpha_d * p(t|C))) + n ln(alpha_d) + sum ln p(t|C)`
  with `alpha_d = mu / (unit_length + mu)`. Terms unseen in the whole
  collection are dropped before scoring.

Natural log everywhere. Terms with df = 0 contribute 0 to TF-IDF and
BM25 (rankings only care about terms the collection knows).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, MissingEmbeddingError, ParseError, UnknownUnitError
from .index import InvertedIndex

__all__ = [
    "ScoringParams",
    "ScoredCandidate",
    "EmbeddingStore",
    "tfidf_score",
    "bm25_score",
    "qld_score",
    "top_n",
    "load_embeddings",
    "cosine",
    "cosine_vectors",
]


@dataclass(frozen=True)
class ScoringParams:
    k1: float = 1.2
    b: float = 0.75
    mu: float = 2000.0
    idf_floor: float = 0.0

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError("k1 must be > 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")
        if self.mu <= 0:
            raise ValueError("mu must be > 0")


@dataclass(frozen=True)
class ScoredCandidate:
    """A ranked hit: `key` is a unit id, or a (law_id, article_id) pair
    after aggregation to articles."""

    key: Union[str, tuple[str, str]]
    score: float


def _distinct_terms(query: Sequence[str]) -> list[str]:
    return list(dict.fromkeys(query))


def _require_unit(index: InvertedIndex, unit_id: str) -> None:
    if not index.has_unit(unit_id):
        raise UnknownUnitError(f"unknown unit {unit_id!r}")


def tfidf_score(
    query: Sequence[str], unit_id: str, index: InvertedIndex, params: ScoringParams
) -> float:
    _require_unit(index, unit_id)
    length = index.unit_length(unit_id)
    if length == 0:
        return 0.0
    score = 0.0
    for term in _distinct_terms(query):
        df = index.df(term)
        if df == 0:
            continue
        tf = index.tf(term, unit_id)
        if tf == 0:
            continue
        idf = max(params.idf_floor, math.log(index.n_units / (df + 1)))
        score += (tf / length) * idf
    return score


def bm25_score(
    query: Sequence[str], unit_id: str, index: InvertedIndex, params: ScoringParams
) -> float:
    _require_unit(index, unit_id)
    length = index.unit_length(unit_id)
    norm = params.k1 * (1.0 - params.b + params.b * length / index.avgdl)
    score = 0.0
    for term in _distinct_terms(query):
        df = index.df(term)
        if df == 0:
            continue
        tf = index.tf(term, unit_id)
        if tf == 0:
            continue
        idf = math.log(1.0 + (index.n_units - df + 0.5) / (df + 0.5))
        score += idf * tf * (params.k1 + 1.0) / (tf + norm)
    return score


def qld_score(
    query: Sequence[str], unit_id: str, index: InvertedIndex, params: ScoringParams
) -> float:
    _require_unit(index, unit_id)
    terms = [t for t in _distinct_terms(query) if index.cf(t) > 0]
    if not terms:
        return 0.0
    length = index.unit_length(unit_id)
    mu = params.mu
    alpha = mu / (length + mu)
    score = len(terms) * math.log(alpha)
    for term in terms:
        p_coll = index.cf(term) / index.total_tokens
        score += math.log(p_coll)
        tf = index.tf(term, unit_id)
        if tf > 0:
            p_seen = (tf + mu * p_coll) / (length + mu)
            score += math.log(p_seen / (alpha * p_coll))
    return score


def top_n(
    query: Sequence[str],
    index: InvertedIndex,
    params: ScoringParams,
    n: int,
    by_article: bool = False,
) -> list[ScoredCandidate]:
    """Top-n candidates by BM25, descending, ties by ascending key.

    With `by_article` the per-unit scores are aggregated to parent
    articles by max before truncation (the right mode for clause-level
    indexes; for article-level indexes it is a relabeling). Zero-score
    units participate, so `n` larger than the corpus returns everything.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    scores: dict[str, float] = {uid: 0.0 for uid in index.unit_ids()}
    for term in _distinct_terms(query):
        df = index.df(term)
        if df == 0:
            continue
        idf = math.log(1.0 + (index.n_units - df + 0.5) / (df + 0.5))
        for uid, tf in index.postings(term).items():
            length = index.unit_length(uid)
            norm = params.k1 * (1.0 - params.b + params.b * length / index.avgdl)
            scores[uid] += idf * tf * (params.k1 + 1.0) / (tf + norm)

    if by_article:
        best: dict[tuple[str, str], float] = {}
        for uid, score in scores.items():
            key = index.parent_of(uid)
            if key not in best or score > best[key]:
                best[key] = score
        ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    else:
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [ScoredCandidate(key, score) for key, score in ranked[:n]]


class EmbeddingStore:
    """Fixed-dimension id -> vector map."""

    def __init__(self, dim: int, vectors: dict[str, np.ndarray]):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._vectors = vectors

    def get(self, key: str) -> np.ndarray:
        try:
            return self._vectors[key]
        except KeyError:
            raise MissingEmbeddingError(f"no embedding for {key!r}") from None

    def __contains__(self, key: str) -> bool:
        return key in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Load JSONL `{"id": str, "vector": [...]}` with a uniform dimension."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            key = obj["id"]
            vec = np.asarray(obj["vector"], dtype=float)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}:{line_no}: {exc}") from exc
        if vec.ndim != 1 or vec.size == 0:
            raise ParseError(f"{path}:{line_no}: vector must be a non-empty flat list")
        if not np.all(np.isfinite(vec)):
            raise ParseError(f"{path}:{line_no}: vector has NaN/Inf components")
        if dim is None:
            dim = int(vec.size)
        elif vec.size != dim:
            raise DimensionMismatchError(
                f"{path}:{line_no}: vector of length {vec.size}, expected {dim}"
            )
        vectors[str(key)] = vec
    if dim is None:
        raise ParseError(f"{path}: no embeddings found")
    return EmbeddingStore(dim, vectors)


def cosine_vectors(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; zero vectors score 0.0."""
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.dot(a, b) / (norm_a * norm_b))


def cosine(store: EmbeddingStore, id_a: str, id_b: str) -> float:
    """Cosine similarity between two stored vectors."""
    return cosine_vectors(store.get(id_a), store.get(id_b))
