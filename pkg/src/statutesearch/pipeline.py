"""Retrieval pipeline: feature extraction, training-set construction
with BM25 negative sampling, and the retrieval run strategies.

Each question-candidate pair gets a six-column feature row: the three
lexical scores (BM25, TF-IDF, query likelihood), the embedding cosine,
and the probabilities of two boosted-tree classifiers over embedding
pair features. Lexical columns are min-max normalized per question
across its candidate pool (their magnitudes vary wildly between
queries); a constant pool maps to 0.

Training pools are the BM25 top `pool_size` articles per question,
labeled 1 on gold and 0 otherwise; gold articles the pool missed are
appended as positives so every question contributes positive rows.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .corpus import QuestionRecord
from .errors import EmptyCorpusError, MissingEmbeddingError, NoGoldError
from .index import InvertedIndex, article_unit_id
from .ltr import GbdtModel, GbdtParams, MatrixRow, TrainingMatrix, pair_features
from .scoring import (
    EmbeddingStore,
    ScoringParams,
    bm25_score,
    cosine,
    qld_score,
    tfidf_score,
    top_n,
)
from .text import CompoundDictionary, NormalizationConfig, TokenStream, tokenize

log = logging.getLogger(__name__)

ArticleKey = tuple[str, str]

FEATURE_NAMES = ("bm25", "tfidf", "qld", "cosine", "gbdt_a", "gbdt_b")

# The two embedding classifiers are tree ensembles with deliberately
# different shapes (deep/slow vs shallow/fast learner), so their errors
# decorrelate and both columns stay informative for the final ensemble.
CLASSIFIER_A_PARAMS = GbdtParams(n_trees=40, max_depth=6, learning_rate=0.1,
                                 min_samples_leaf=5, l2_lambda=1.0, subsample=1.0, seed=101)
CLASSIFIER_B_PARAMS = GbdtParams(n_trees=60, max_depth=3, learning_rate=0.3,
                                 min_samples_leaf=5, l2_lambda=1.0, subsample=1.0, seed=202)
ENSEMBLE_PARAMS = GbdtParams(n_trees=80, max_depth=3, learning_rate=0.1,
                             min_samples_leaf=2, l2_lambda=1.0, subsample=1.0, seed=303)

__all__ = [
    "FeatureRow",
    "RetrievalConfig",
    "TrainingSetSpec",
    "RankingContext",
    "FEATURE_NAMES",
    "CLASSIFIER_A_PARAMS",
    "CLASSIFIER_B_PARAMS",
    "ENSEMBLE_PARAMS",
    "extract_features",
    "normalize_pool",
    "pool_feature_rows",
    "candidate_pool",
    "build_pair_matrix",
    "build_training_set",
    "retrieve",
    "run_batch",
]


@dataclass(frozen=True)
class FeatureRow:
    question_id: str
    law_id: str
    article_id: str
    f1_bm25: float
    f2_tfidf: float
    f3_qld: float
    f4_cosine: float
    f5_gbdt_a: float
    f6_gbdt_b: float
    label: Optional[int] = None

    def features(self) -> tuple[float, ...]:
        return (self.f1_bm25, self.f2_tfidf, self.f3_qld,
                self.f4_cosine, self.f5_gbdt_a, self.f6_gbdt_b)

    @property
    def key(self) -> ArticleKey:
        return (self.law_id, self.article_id)


@dataclass(frozen=True)
class RetrievalConfig:
    strategy: str = "top1"  # top1 | topk | relative_threshold
    k: int = 2
    tau: float = 0.9
    candidate_pool: int = 50

    def __post_init__(self):
        if self.strategy not in ("top1", "topk", "relative_threshold"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.candidate_pool < 1:
            raise ValueError("candidate_pool must be >= 1")


@dataclass(frozen=True)
class TrainingSetSpec:
    pool_size: int = 50
    include_missing_gold: bool = True

    def __post_init__(self):
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")


@dataclass
class RankingContext:
    """Everything feature extraction needs, bundled once per run.

    Question embeddings are keyed by question_id; article embeddings by
    `law_id::article_id`.
    """

    index: InvertedIndex
    params: ScoringParams
    norm_config: NormalizationConfig
    dictionary: CompoundDictionary
    question_vectors: EmbeddingStore
    article_vectors: EmbeddingStore
    model_a: Optional[GbdtModel] = None
    model_b: Optional[GbdtModel] = None
    impute_missing: bool = False
    _pair_cache: dict = field(default_factory=dict, repr=False)

    def query_tokens(self, question: QuestionRecord) -> TokenStream:
        return tokenize(question.text, self.norm_config, self.dictionary)

    def lexical_scores(self, tokens: TokenStream, key: ArticleKey) -> tuple[float, float, float]:
        """(bm25, tfidf, qld) for an article: max over its index units,
        so clause-level indexes score an article by its best unit."""
        units = self.index.units_of_article(key)
        if not units:
            raise EmptyCorpusError(f"article {key} has no index units")
        best: Optional[tuple[float, float, float]] = None
        for uid in units:
            triple = (
                bm25_score(tokens, uid, self.index, self.params),
                tfidf_score(tokens, uid, self.index, self.params),
                qld_score(tokens, uid, self.index, self.params),
            )
            best = triple if best is None else tuple(map(max, best, triple))  # type: ignore[assignment]
        return best  # type: ignore[return-value]

    def embedding_features(self, question_id: str, key: ArticleKey) -> tuple[float, float, float]:
        """(cosine, classifier A probability, classifier B probability)."""
        article_id = article_unit_id(*key)
        try:
            q_vec = self.question_vectors.get(question_id)
            d_vec = self.article_vectors.get(article_id)
        except MissingEmbeddingError:
            if self.impute_missing:
                return 0.0, 0.5, 0.5
            raise
        if self.model_a is None or self.model_b is None:
            raise ValueError("embedding classifiers not loaded in this context")
        feats = pair_features(q_vec, d_vec)
        return (
            cosine(self.question_vectors, question_id, question_id) * 0.0
            + _safe_cosine(q_vec, d_vec),
            self.model_a.predict(feats),
            self.model_b.predict(feats),
        )


def _safe_cosine(a, b) -> float:
    import numpy as np

    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def extract_features(
    question: QuestionRecord,
    candidate: ArticleKey,
    ctx: RankingContext,
    label: Optional[int] = None,
    tokens: Optional[TokenStream] = None,
) -> FeatureRow:
    """Raw (un-normalized) feature row for one question-candidate pair."""
    if tokens is None:
        tokens = ctx.query_tokens(question)
    f1, f2, f3 = ctx.lexical_scores(tokens, candidate)
    f4, f5, f6 = ctx.embedding_features(question.question_id, candidate)
    return FeatureRow(question.question_id, candidate[0], candidate[1],
                      f1, f2, f3, f4, f5, f6, label)


def _minmax(values: Sequence[float]) -> list[float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def normalize_pool(rows: Sequence[FeatureRow]) -> list[FeatureRow]:
    """Min-max the lexical columns (f1-f3) within one question's pool."""
    if not rows:
        return []
    f1 = _minmax([r.f1_bm25 for r in rows])
    f2 = _minmax([r.f2_tfidf for r in rows])
    f3 = _minmax([r.f3_qld for r in rows])
    return [
        replace(r, f1_bm25=f1[i], f2_tfidf=f2[i], f3_qld=f3[i]) for i, r in enumerate(rows)
    ]


def candidate_pool(
    question: QuestionRecord, ctx: RankingContext, pool_size: int
) -> list[ArticleKey]:
    """BM25 top `pool_size` articles for the question."""
    tokens = ctx.query_tokens(question)
    hits = top_n(tokens, ctx.index, ctx.params, pool_size, by_article=True)
    return [hit.key for hit in hits]  # type: ignore[misc]


def pool_feature_rows(
    question: QuestionRecord,
    candidates: Sequence[ArticleKey],
    ctx: RankingContext,
    gold: Optional[set[ArticleKey]] = None,
) -> list[FeatureRow]:
    """Normalized feature rows for a candidate pool."""
    tokens = ctx.query_tokens(question)
    rows = [
        extract_features(
            question, key, ctx,
            label=None if gold is None else int(key in gold),
            tokens=tokens,
        )
        for key in candidates
    ]
    return normalize_pool(rows)


def _pool_with_gold(
    question: QuestionRecord, ctx: RankingContext, spec: TrainingSetSpec
) -> tuple[list[ArticleKey], set[ArticleKey]]:
    if not question.gold_articles:
        raise NoGoldError(f"question {question.question_id!r} has no gold articles")
    gold = set(question.gold_articles)
    pool = candidate_pool(question, ctx, spec.pool_size)
    if spec.include_missing_gold:
        pool = pool + sorted(gold - set(pool))
    return pool, gold


def build_pair_matrix(
    questions: Sequence[QuestionRecord], ctx: RankingContext, spec: TrainingSetSpec
) -> TrainingMatrix:
    """Embedding pair-feature matrix for training the two classifiers.

    Same pools and labels as the ensemble matrix, but rows are the raw
    `pair_features` of (question vector, article vector).
    """
    rows: list[MatrixRow] = []
    for question in sorted(questions, key=lambda q: q.question_id):
        pool, gold = _pool_with_gold(question, ctx, spec)
        q_vec = ctx.question_vectors.get(question.question_id)
        for key in sorted(pool):
            d_vec = ctx.article_vectors.get(article_unit_id(*key))
            rows.append(
                MatrixRow(
                    features=tuple(pair_features(q_vec, d_vec)),
                    label=int(key in gold),
                    group_id=question.question_id,
                    candidate=key,
                )
            )
    dim = len(rows[0].features) if rows else 0
    names = tuple(f"pair_{i}" for i in range(dim))
    return TrainingMatrix(tuple(rows), names)


def build_training_set(
    questions: Sequence[QuestionRecord], ctx: RankingContext, spec: TrainingSetSpec
) -> TrainingMatrix:
    """Six-column ensemble training matrix with BM25 negative sampling.

    Rows are sorted by (question_id, candidate key) so assembly order
    never shows in the output.
    """
    rows: list[MatrixRow] = []
    for question in sorted(questions, key=lambda q: q.question_id):
        pool, gold = _pool_with_gold(question, ctx, spec)
        feature_rows = pool_feature_rows(question, pool, ctx, gold)
        for row in sorted(feature_rows, key=lambda r: r.key):
            rows.append(
                MatrixRow(
                    features=row.features(),
                    label=row.label if row.label is not None else 0,
                    group_id=row.question_id,
                    candidate=row.key,
                )
            )
    return TrainingMatrix(tuple(rows), FEATURE_NAMES)


def retrieve(
    question: QuestionRecord,
    ctx: RankingContext,
    ensemble: GbdtModel,
    config: RetrievalConfig,
) -> list[ArticleKey]:
    """Rescore the BM25 candidate pool with the ensemble and apply the
    configured run strategy. Ties break by ascending article key."""
    if ctx.index.n_units == 0:
        raise EmptyCorpusError("empty index")
    pool = candidate_pool(question, ctx, config.candidate_pool)
    if not pool:
        raise EmptyCorpusError("no candidates in index")
    rows = pool_feature_rows(question, pool, ctx)
    scored = sorted(
        ((ensemble.predict(row.features()), row.key) for row in rows),
        key=lambda item: (-item[0], item[1]),
    )
    if config.strategy == "top1":
        return [scored[0][1]]
    if config.strategy == "topk":
        return [key for _, key in scored[: config.k]]
    cutoff = config.tau * scored[0][0]
    picked = [key for score, key in scored if score >= cutoff]
    return picked if picked else [scored[0][1]]


def run_batch(
    questions: Sequence[QuestionRecord],
    ctx: RankingContext,
    ensemble: GbdtModel,
    config: RetrievalConfig,
    output_path: str | Path,
) -> list[dict]:
    """Retrieve for every question and write the submission JSON.

    Questions are processed in input order; a question with no text
    yields an empty retrieval and a warning flag instead of an error.
    """
    records: list[dict] = []
    for question in questions:
        if not question.text.strip():
            records.append(
                {"question_id": question.question_id, "relevant_articles": [],
                 "warning": "empty question text"}
            )
            continue
        keys = retrieve(question, ctx, ensemble, config)
        records.append(
            {
                "question_id": question.question_id,
                "relevant_articles": [
                    {"law_id": law, "article_id": art} for law, art in keys
                ],
            }
        )
    Path(output_path).write_text(
        json.dumps(records, ensure_ascii=False, indent=2), encoding="utf-8"
    )
    log.info("wrote %d retrieval records to %s", len(records), output_path)
    return records
