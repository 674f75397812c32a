"""Immutable inverted index with corpus statistics.

Indexing granularity is chosen when units are built: one unit per
article, or one unit per segmentation unit (title/clause/sub-clause).
Articles in the statute corpus average several hundred words, so the
clause granularity exists to keep unit lengths near query scale; every
unit remembers its parent article so clause hits can be mapped back to
articles for ranking output.

The built index is immutable and safe to share across concurrent
readers; rebuild from scratch on corpus change.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Corpus, segment_article
from .errors import DuplicateUnitError, EmptyInputError, ParseError, VersionMismatchError
from .text import CompoundDictionary, NormalizationConfig, TokenStream, tokenize

log = logging.getLogger(__name__)

INDEX_FORMAT_VERSION = 1
ARTICLE_KEY_SEP = "::"

__all__ = [
    "IndexUnit",
    "InvertedIndex",
    "build_index",
    "unit_tf",
    "units_from_corpus",
    "article_unit_id",
    "save_index",
    "load_index",
]


def article_unit_id(law_id: str, article_id: str) -> str:
    return f"{law_id}{ARTICLE_KEY_SEP}{article_id}"


@dataclass(frozen=True)
class IndexUnit:
    unit_id: str
    parent_article: tuple[str, str]
    tokens: TokenStream


class InvertedIndex:
    """Postings plus the statistics every lexical scorer needs.

    Cross-field invariants (maintained by `build_index`, checked in
    tests): sum of unit lengths equals `total_tokens`; `df(t)` equals
    the posting-list size of t; `avgdl` is `total_tokens / n_units`;
    sum of a term's postings counts equals `cf(t)`.
    """

    def __init__(self, units: Sequence[IndexUnit]):
        postings: dict[str, dict[str, int]] = {}
        unit_lengths: dict[str, int] = {}
        unit_parents: dict[str, tuple[str, str]] = {}
        for unit in units:
            if unit.unit_id in unit_lengths:
                raise DuplicateUnitError(f"duplicate unit id {unit.unit_id!r}")
            unit_lengths[unit.unit_id] = len(unit.tokens)
            unit_parents[unit.unit_id] = unit.parent_article
            for token in unit.tokens:
                bucket = postings.setdefault(token, {})
                bucket[unit.unit_id] = bucket.get(unit.unit_id, 0) + 1

        self._postings = postings
        self._unit_lengths = unit_lengths
        self._unit_parents = unit_parents
        self._df = {term: len(units_map) for term, units_map in postings.items()}
        self._cf = {term: sum(units_map.values()) for term, units_map in postings.items()}
        self.total_tokens = sum(unit_lengths.values())
        self.n_units = len(unit_lengths)
        self.avgdl = self.total_tokens / self.n_units
        units_by_article: dict[tuple[str, str], list[str]] = {}
        for uid in sorted(unit_parents):
            units_by_article.setdefault(unit_parents[uid], []).append(uid)
        self._units_by_article = units_by_article

    # -- lookups; unknown terms report zero, unknown units are the caller's
    #    problem (scorers raise UnknownUnitError before getting here).

    def df(self, term: str) -> int:
        return self._df.get(term, 0)

    def cf(self, term: str) -> int:
        return self._cf.get(term, 0)

    def tf(self, term: str, unit_id: str) -> int:
        return self._postings.get(term, {}).get(unit_id, 0)

    def postings(self, term: str) -> dict[str, int]:
        return dict(self._postings.get(term, {}))

    def unit_length(self, unit_id: str) -> int:
        return self._unit_lengths[unit_id]

    def has_unit(self, unit_id: str) -> bool:
        return unit_id in self._unit_lengths

    def unit_ids(self) -> list[str]:
        return sorted(self._unit_lengths)

    def parent_of(self, unit_id: str) -> tuple[str, str]:
        return self._unit_parents[unit_id]

    def units_of_article(self, key: tuple[str, str]) -> list[str]:
        return list(self._units_by_article.get(key, []))

    def article_keys(self) -> list[tuple[str, str]]:
        return sorted(self._units_by_article)

    @property
    def vocabulary_size(self) -> int:
        return len(self._postings)


def build_index(units: Sequence[IndexUnit]) -> InvertedIndex:
    """Build the index; rejects an empty unit list and all-empty units."""
    if not units:
        raise EmptyInputError("no units to index")
    if all(len(u.tokens) == 0 for u in units):
        raise EmptyInputError("all units are empty")
    index = InvertedIndex(units)
    log.info(
        "built index: %d units, %d terms, avgdl %.2f",
        index.n_units,
        index.vocabulary_size,
        index.avgdl,
    )
    return index


def unit_tf(index: InvertedIndex, term: str, unit_id: str) -> int:
    """Raw occurrence count of `term` in `unit_id`; 0 when absent."""
    return index.tf(term, unit_id)


def units_from_corpus(
    corpus: Corpus,
    granularity: str,
    config: NormalizationConfig,
    dictionary: CompoundDictionary,
) -> list[IndexUnit]:
    """Tokenize the corpus into index units.

    granularity "article": one unit per article, id `law::article`.
    granularity "clause": one unit per title/clause/sub-clause, id
    `law::<clause_id>` (clause ids already embed the article id).
    """
    if granularity not in ("article", "clause"):
        raise ValueError(f"unknown granularity {granularity!r}")
    units: list[IndexUnit] = []
    for law_id, article in corpus.iter_articles():
        parent = (law_id, article.article_id)
        if granularity == "article":
            units.append(
                IndexUnit(article_unit_id(law_id, article.article_id), parent,
                          tokenize(article.raw_text, config, dictionary))
            )
        else:
            for clause in segment_article(article):
                units.append(
                    IndexUnit(f"{law_id}{ARTICLE_KEY_SEP}{clause.clause_id}", parent,
                              tokenize(clause.text, config, dictionary))
                )
    return units


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Write a versioned JSON snapshot (token bags per unit)."""
    # token order inside a unit affects no statistic, so a sorted bag is
    # a faithful and deterministic serialization
    bags: dict[str, list[str]] = {uid: [] for uid in index.unit_ids()}
    for term in sorted(index._postings):
        for uid, count in index._postings[term].items():
            bags[uid].extend([term] * count)
    units = []
    for uid in index.unit_ids():
        law_id, article_id = index.parent_of(uid)
        units.append({"id": uid, "law_id": law_id, "article_id": article_id, "tokens": bags[uid]})
    payload = {"version": INDEX_FORMAT_VERSION, "units": units}
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8")


def load_index(path: str | Path) -> InvertedIndex:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        version = payload["version"]
        raw_units = payload["units"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"index snapshot {path}: {exc}") from exc
    if version != INDEX_FORMAT_VERSION:
        raise VersionMismatchError(f"index snapshot version {version!r} not supported")
    units = [
        IndexUnit(u["id"], (u["law_id"], u["article_id"]), TokenStream(tuple(u["tokens"])))
        for u in raw_units
    ]
    return build_index(units)
