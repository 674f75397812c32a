"""Legal corpus loading and clause-level article segmentation.

The corpus is a two-level hierarchy (laws holding articles); articles
are further segmented into title / clause / sub-clause units by
line-anchored markers: a line starting with ``<digits>. `` opens a
clause, a line starting with ``<letter>)`` opens a sub-clause, and
everything before the first clause is the title. Articles with no
numbered lines stay a single title-level unit.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping, Optional

from .errors import (
    DuplicateIdError,
    EmptyCorpusError,
    ParseError,
    UnknownQuestionTypeError,
)

log = logging.getLogger(__name__)

__all__ = [
    "ClauseLevel",
    "Clause",
    "Article",
    "Law",
    "Corpus",
    "QuestionType",
    "QuestionRecord",
    "SegmentationRules",
    "segment_article",
    "load_corpus",
    "corpus_to_dicts",
    "save_corpus",
    "load_questions",
    "DEFAULT_TYPE_ALIASES",
]


class ClauseLevel(str, Enum):
    TITLE = "title"
    CLAUSE = "clause"
    SUB_CLAUSE = "sub_clause"


@dataclass(frozen=True)
class Clause:
    clause_id: str
    text: str
    level: ClauseLevel


@dataclass(frozen=True)
class SegmentationRules:
    """Line-anchored open markers for clauses and sub-clauses."""

    clause_pattern: str = r"^[ \t]*\d+\.[ \t]"
    sub_clause_pattern: str = r"^[ \t]*[^\W\d_]\)"


DEFAULT_RULES = SegmentationRules()


def _unique_id(base: str, seen: set[str]) -> str:
    candidate = base
    n = 2
    while candidate in seen:
        candidate = f"{base}_{n}"
        n += 1
    seen.add(candidate)
    return candidate


def _segment_text(article_id: str, raw_text: str, rules: SegmentationRules) -> list[Clause]:
    clause_re = re.compile(rules.clause_pattern, re.MULTILINE)
    sub_re = re.compile(rules.sub_clause_pattern, re.MULTILINE)

    marks = [(m.start(), ClauseLevel.CLAUSE) for m in clause_re.finditer(raw_text)]
    marks += [(m.start(), ClauseLevel.SUB_CLAUSE) for m in sub_re.finditer(raw_text)]
    marks.sort()

    clause_offsets = [off for off, lvl in marks if lvl is ClauseLevel.CLAUSE]
    seen: set[str] = set()
    if not clause_offsets:
        cid = _unique_id(f"{article_id}.title", seen)
        return [Clause(cid, raw_text.strip(), ClauseLevel.TITLE)]

    # Sub-clause markers before the first clause belong to the title.
    first = clause_offsets[0]
    marks = [(off, lvl) for off, lvl in marks if lvl is ClauseLevel.CLAUSE or off > first]

    units: list[Clause] = []
    title_text = raw_text[:first].strip()
    if title_text:
        units.append(Clause(_unique_id(f"{article_id}.title", seen), title_text, ClauseLevel.TITLE))

    current_clause_id = ""
    for i, (off, level) in enumerate(marks):
        end = marks[i + 1][0] if i + 1 < len(marks) else len(raw_text)
        text = raw_text[off:end].strip()
        if level is ClauseLevel.CLAUSE:
            num = re.match(r"[ \t]*(\d+)\.", text).group(1)
            current_clause_id = _unique_id(f"{article_id}.c{num}", seen)
            units.append(Clause(current_clause_id, text, ClauseLevel.CLAUSE))
        else:
            letter = re.match(r"[ \t]*([^\W\d_])\)", text).group(1)
            cid = _unique_id(f"{current_clause_id}.{letter}", seen)
            units.append(Clause(cid, text, ClauseLevel.SUB_CLAUSE))
    return units


@dataclass(frozen=True)
class Article:
    """One statute article. `title` is the text before the first clause
    marker (the heading line for ordinary articles); `clauses` holds the
    clause and sub-clause units, so `title` + clause texts reconstruct
    `raw_text` up to whitespace."""

    article_id: str
    raw_text: str
    title: str
    clauses: tuple[Clause, ...]

    @classmethod
    def from_text(
        cls, article_id: str, raw_text: str, rules: SegmentationRules = DEFAULT_RULES
    ) -> "Article":
        if not raw_text.strip():
            raise ParseError(f"article {article_id!r} has empty text")
        units = _segment_text(article_id, raw_text, rules)
        title = units[0].text if units[0].level is ClauseLevel.TITLE else ""
        clauses = tuple(u for u in units if u.level is not ClauseLevel.TITLE)
        return cls(article_id, raw_text, title, clauses)


def segment_article(article: Article, rules: SegmentationRules = DEFAULT_RULES) -> list[Clause]:
    """All units of an article in order: title, clauses, sub-clauses."""
    return _segment_text(article.article_id, article.raw_text, rules)


@dataclass(frozen=True)
class Law:
    law_id: str
    articles: tuple[Article, ...]


@dataclass(frozen=True)
class Corpus:
    laws: tuple[Law, ...]

    def iter_articles(self) -> Iterator[tuple[str, Article]]:
        for law in self.laws:
            for article in law.articles:
                yield law.law_id, article

    def get(self, law_id: str, article_id: str) -> Article:
        for law in self.laws:
            if law.law_id == law_id:
                for article in law.articles:
                    if article.article_id == article_id:
                        return article
        raise KeyError((law_id, article_id))

    @property
    def article_count(self) -> int:
        return sum(len(law.articles) for law in self.laws)


def load_corpus(path: str | Path, rules: SegmentationRules = DEFAULT_RULES) -> Corpus:
    """Load a corpus JSON file: `[{"id": str, "articles": [{"id", "text"}]}]`.

    Rejects duplicate law ids and duplicate (law_id, article_id) pairs.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"corpus file {path}: {exc}") from exc
    if not isinstance(data, list):
        raise ParseError("corpus file must be a JSON array of laws")

    laws: list[Law] = []
    seen_laws: set[str] = set()
    seen_articles: set[tuple[str, str]] = set()
    for entry in data:
        if not isinstance(entry, dict) or not isinstance(entry.get("id"), str) or not entry["id"]:
            raise ParseError(f"law entry missing a non-empty string id: {entry!r}")
        law_id = entry["id"]
        if law_id in seen_laws:
            raise DuplicateIdError(f"duplicate law id {law_id!r}")
        seen_laws.add(law_id)
        raw_articles = entry.get("articles")
        if not isinstance(raw_articles, list):
            raise ParseError(f"law {law_id!r} has no articles array")
        articles: list[Article] = []
        for raw in raw_articles:
            if (
                not isinstance(raw, dict)
                or not isinstance(raw.get("id"), str)
                or not isinstance(raw.get("text"), str)
            ):
                raise ParseError(f"bad article entry in law {law_id!r}: {raw!r}")
            key = (law_id, raw["id"])
            if key in seen_articles:
                raise DuplicateIdError(f"duplicate article {key}")
            seen_articles.add(key)
            articles.append(Article.from_text(raw["id"], raw["text"], rules))
        laws.append(Law(law_id, tuple(articles)))

    corpus = Corpus(tuple(laws))
    if not corpus.laws or corpus.article_count == 0:
        raise EmptyCorpusError("corpus contains no articles")
    log.info("loaded corpus: %d laws, %d articles", len(corpus.laws), corpus.article_count)
    return corpus


def corpus_to_dicts(corpus: Corpus) -> list[dict]:
    return [
        {
            "id": law.law_id,
            "articles": [{"id": a.article_id, "text": a.raw_text} for a in law.articles],
        }
        for law in corpus.laws
    ]


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(corpus_to_dicts(corpus), ensure_ascii=False, indent=2), encoding="utf-8"
    )


class QuestionType(str, Enum):
    TRUE_FALSE = "true_false"
    MULTIPLE_CHOICE = "multiple_choice"
    SPAN = "span"


# Dataset-native type labels mapped onto the internal enum. Lookup is
# exact first, then casefolded.
DEFAULT_TYPE_ALIASES: dict[str, QuestionType] = {
    "true_false": QuestionType.TRUE_FALSE,
    "true/false": QuestionType.TRUE_FALSE,
    "đúng/sai": QuestionType.TRUE_FALSE,
    "multiple_choice": QuestionType.MULTIPLE_CHOICE,
    "multiple choice": QuestionType.MULTIPLE_CHOICE,
    "trắc nghiệm": QuestionType.MULTIPLE_CHOICE,
    "span": QuestionType.SPAN,
    "span-based": QuestionType.SPAN,
    "tự luận": QuestionType.SPAN,
}


@dataclass(frozen=True)
class QuestionRecord:
    question_id: str
    qtype: QuestionType
    text: str
    options: Optional[dict[str, str]] = None
    gold_articles: Optional[tuple[tuple[str, str], ...]] = None
    gold_answer: Optional[str] = None

    def __post_init__(self):
        has_options = bool(self.options)
        if has_options != (self.qtype is QuestionType.MULTIPLE_CHOICE):
            raise ParseError(
                f"question {self.question_id!r}: options present iff type is multiple_choice"
            )


def _parse_question(
    obj: dict, aliases: Mapping[str, QuestionType]
) -> QuestionRecord:
    if not isinstance(obj, dict):
        raise ParseError(f"question entry is not an object: {obj!r}")
    qid = obj.get("question_id")
    qtype_raw = obj.get("question_type")
    text = obj.get("text")
    if not isinstance(qid, str) or not qid or not isinstance(text, str):
        raise ParseError(f"question entry missing question_id or text: {obj!r}")
    if not isinstance(qtype_raw, str):
        raise UnknownQuestionTypeError(f"question {qid!r} has no question_type")
    qtype = aliases.get(qtype_raw, aliases.get(qtype_raw.casefold()))
    if qtype is None:
        raise UnknownQuestionTypeError(f"question {qid!r}: unknown type {qtype_raw!r}")

    options = obj.get("choices")
    if options is not None:
        if not isinstance(options, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in options.items()
        ):
            raise ParseError(f"question {qid!r}: choices must map label -> text")
    gold = obj.get("relevant_articles")
    gold_articles = None
    if gold is not None:
        if not isinstance(gold, list):
            raise ParseError(f"question {qid!r}: relevant_articles must be a list")
        pairs = []
        for item in gold:
            if not isinstance(item, dict) or "law_id" not in item or "article_id" not in item:
                raise ParseError(f"question {qid!r}: bad relevant_articles entry {item!r}")
            pairs.append((str(item["law_id"]), str(item["article_id"])))
        gold_articles = tuple(pairs)
    answer = obj.get("answer")
    if answer is not None and not isinstance(answer, str):
        answer = str(answer)
    return QuestionRecord(qid, qtype, text, options, gold_articles, answer)


def load_questions(
    path: str | Path, aliases: Mapping[str, QuestionType] = DEFAULT_TYPE_ALIASES
) -> list[QuestionRecord]:
    """Load questions from a JSON array or JSONL file.

    Gold fields (`relevant_articles`, `answer`) are optional so blind
    test sets load unchanged.
    """
    content = Path(path).read_text(encoding="utf-8")
    stripped = content.lstrip()
    try:
        if stripped.startswith("["):
            raw_items = json.loads(content)
        else:
            raw_items = [json.loads(line) for line in content.splitlines() if line.strip()]
    except json.JSONDecodeError as exc:
        raise ParseError(f"question file {path}: {exc}") from exc

    records = [_parse_question(obj, aliases) for obj in raw_items]
    seen: set[str] = set()
    for rec in records:
        if rec.question_id in seen:
            raise ParseError(f"duplicate question_id {rec.question_id!r}")
        seen.add(rec.question_id)
    log.info("loaded %d questions from %s", len(records), path)
    return records
