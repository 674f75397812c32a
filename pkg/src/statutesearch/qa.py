"""True/false and multiple-choice answering over classifier probabilities.

The flow per question: find the article clause most related to the
question by TF-IDF, build a `question [SEP] option [SEP] clause`
statement per option, look up each statement's probability of being
true (from a probability file, or any model able to score statements),
then apply the decision rules:

* true/false: answer true iff probability >= threshold.
* multiple choice without combined options: argmax probability.
* multiple choice with combined options ("Both A and B", "All of the
  above", "None of the above", and their Vietnamese equivalents):
  count base options whose probability passes the threshold and pick
  the combined option describing exactly that set; otherwise fall back
  to argmax over base options.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .corpus import Article, Clause, ClauseLevel, segment_article
from .errors import MalformedOptionsError, ParseError, RangeError
from .index import IndexUnit, build_index
from .scoring import ScoringParams, tfidf_score
from .text import CompoundDictionary, NormalizationConfig, TokenStream, tokenize

log = logging.getLogger(__name__)

SEPARATOR = "[SEP]"

# Label used in probability files for a true/false question's single
# statement (multiple-choice entries use the option label).
TF_STATEMENT_LABEL = "statement"

__all__ = [
    "QaConfig",
    "OptionScore",
    "CombinedPattern",
    "DEFAULT_COMBINED_PATTERNS",
    "match_clause",
    "build_statement",
    "decide_true_false",
    "decide_multiple_choice",
    "classify_options",
    "load_option_probabilities",
    "SEPARATOR",
    "TF_STATEMENT_LABEL",
]


@dataclass(frozen=True)
class CombinedPattern:
    """Regex classifying an option as combined.

    kind "pair" must capture the two referenced labels; "all" and
    "none" carry no captures.
    """

    kind: str  # "pair" | "all" | "none"
    regex: str

    def __post_init__(self):
        if self.kind not in ("pair", "all", "none"):
            raise ValueError(f"unknown combined pattern kind {self.kind!r}")


DEFAULT_COMBINED_PATTERNS: tuple[CombinedPattern, ...] = (
    CombinedPattern("pair", r"\bboth\s+(\w)\s+and\s+(\w)\b"),
    CombinedPattern("pair", r"\bcả\s+(\w)\s+và\s+(\w)\b"),
    CombinedPattern("all", r"\ball\s+(?:of\s+the\s+)?above\b"),
    CombinedPattern("all", r"\btất\s+cả\s+(?:các\s+)?(?:đáp\s+án|phương\s+án)"),
    CombinedPattern("none", r"\bnone\s+(?:of\s+the\s+)?above\b"),
    CombinedPattern("none", r"\bkhông\s+(?:có\s+)?(?:đáp\s+án|phương\s+án)\s+nào\b"),
)


@dataclass(frozen=True)
class QaConfig:
    decision_threshold: float = 0.5
    combined_option_patterns: tuple[CombinedPattern, ...] = DEFAULT_COMBINED_PATTERNS
    true_label: str = "true"
    false_label: str = "false"

    def __post_init__(self):
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValueError("decision_threshold must be in (0, 1)")
        if not self.combined_option_patterns:
            raise ValueError("combined_option_patterns must not be empty")


@dataclass(frozen=True)
class OptionScore:
    label: str
    probability: float
    combined_kind: Optional[str] = None  # "pair" | "all" | "none"
    combined_labels: tuple[str, ...] = ()

    @property
    def is_combined(self) -> bool:
        return self.combined_kind is not None


def classify_option_text(text: str, config: QaConfig) -> tuple[Optional[str], tuple[str, ...]]:
    """(kind, referenced labels) when the text matches a combined
    pattern, else (None, ())."""
    for pattern in config.combined_option_patterns:
        m = re.search(pattern.regex, text, re.IGNORECASE)
        if m:
            if pattern.kind == "pair":
                return "pair", tuple(g.upper() for g in m.groups())
            return pattern.kind, ()
    return None, ()


def classify_options(
    options: Mapping[str, str],
    probabilities: Mapping[str, float],
    config: QaConfig,
) -> list[OptionScore]:
    """Flag combined options and attach probabilities.

    Combined options never need their own probability (the decision
    rule derives their verdict from the base options), so a missing
    entry defaults to 0. A pair option referencing a label that is not
    among the options raises MalformedOptionsError.
    """
    scores = []
    for label in sorted(options):
        kind, refs = classify_option_text(options[label], config)
        if kind == "pair":
            unknown = [r for r in refs if r not in options]
            if unknown:
                raise MalformedOptionsError(
                    f"option {label!r} references unknown labels {unknown}"
                )
        default = 0.0 if kind else None
        prob = probabilities.get(label, default)
        if prob is None:
            raise KeyError(f"no probability for option {label!r}")
        scores.append(OptionScore(label, prob, kind, refs))
    return scores


def decide_true_false(probability: float, config: QaConfig) -> bool:
    if not 0.0 <= probability <= 1.0:
        raise RangeError(f"probability {probability} outside [0, 1]")
    return probability >= config.decision_threshold


def decide_multiple_choice(scores: Sequence[OptionScore], config: QaConfig) -> str:
    """Pick an answer label. See the module docstring for the rules;
    every return value is one of the supplied labels."""
    if len(scores) < 2:
        raise ValueError("need at least two options")
    base = [s for s in scores if not s.is_combined]
    combined = [s for s in scores if s.is_combined]

    # ties -> lexicographically smallest label
    def argmax_lex(candidates: Sequence[OptionScore]) -> str:
        best = max(s.probability for s in candidates)
        return min(s.label for s in candidates if s.probability == best)

    if not combined:
        return argmax_lex(scores)
    if not base:
        return argmax_lex(scores)

    passing = {s.label for s in base if s.probability >= config.decision_threshold}
    for s in combined:
        if s.combined_kind == "pair" and set(s.combined_labels) == passing:
            return s.label
    if len(passing) == len(base):
        all_opts = sorted(s.label for s in combined if s.combined_kind == "all")
        if all_opts:
            return all_opts[0]
    if not passing:
        none_opts = sorted(s.label for s in combined if s.combined_kind == "none")
        if none_opts:
            return none_opts[0]
    return argmax_lex(base)


def match_clause(
    question: TokenStream,
    article: Article,
    config: NormalizationConfig,
    dictionary: CompoundDictionary,
    params: ScoringParams = ScoringParams(),
) -> Clause:
    """Most question-related clause of the article by TF-IDF.

    Clause and sub-clause units compete; ties go to the earliest. When
    a sub-clause wins, its parent clause text is prepended so the
    returned unit reads as full context. If nothing scores above zero
    the title unit is returned.
    """
    units = segment_article(article)
    title = next((u for u in units if u.level is ClauseLevel.TITLE), None)
    candidates = [u for u in units if u.level is not ClauseLevel.TITLE]
    if not candidates:
        if title is None:
            raise ValueError(f"article {article.article_id!r} has no units")
        return title

    index_units = [
        IndexUnit(u.clause_id, ("", article.article_id), tokenize(u.text, config, dictionary))
        for u in units
    ]
    if all(len(u.tokens) == 0 for u in index_units):
        return title if title is not None else candidates[0]
    index = build_index(index_units)

    best = None
    best_score = 0.0
    for unit in candidates:
        score = tfidf_score(question, unit.clause_id, index, params)
        if best is None or score > best_score:
            best, best_score = unit, score
    if best_score <= 0.0 and title is not None:
        return title
    assert best is not None
    if best.level is ClauseLevel.SUB_CLAUSE:
        parent = _parent_clause(units, best)
        if parent is not None:
            return Clause(best.clause_id, f"{parent.text} {best.text}", ClauseLevel.SUB_CLAUSE)
    return best


def _parent_clause(units: Sequence[Clause], sub: Clause) -> Optional[Clause]:
    parent = None
    for unit in units:
        if unit.clause_id == sub.clause_id:
            break
        if unit.level is ClauseLevel.CLAUSE:
            parent = unit
    return parent


def build_statement(question_text: str, option: Optional[str], clause: Clause) -> str:
    """`question [SEP] clause` for true/false, with the option text in
    the middle for multiple choice."""
    parts = [question_text.strip()]
    if option is not None:
        parts.append(option.strip())
    parts.append(clause.text.strip())
    return f" {SEPARATOR} ".join(parts)


def load_option_probabilities(path: str | Path) -> dict[tuple[str, str], float]:
    """Read JSONL `{"question_id", "label", "prob"}` into a lookup map.

    Probabilities must lie in [0, 1]; duplicate (question, label) pairs
    keep the last value with a warning.
    """
    table: dict[tuple[str, str], float] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            key = (str(obj["question_id"]), str(obj["label"]))
            prob = float(obj["prob"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}:{line_no}: {exc}") from exc
        if not 0.0 <= prob <= 1.0:
            raise RangeError(f"{path}:{line_no}: probability {prob} outside [0, 1]")
        if key in table:
            log.warning("duplicate probability entry %s at %s:%d (last wins)", key, path, line_no)
        table[key] = prob
    return table
