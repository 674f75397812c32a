"""Text normalization and dictionary-based compound-word segmentation.

Produces the token streams consumed by the indexer and the lexical
scorers. Normalization collapses whitespace, expands abbreviations on
word boundaries, and optionally lowercases and strips punctuation.
Compound segmentation is greedy longest-match left-to-right against a
phrase dictionary; matched phrases become single underscore-joined
tokens, so multi-word terms survive bag-of-words scoring.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

__all__ = [
    "NormalizationConfig",
    "CompoundDictionary",
    "TokenStream",
    "normalize",
    "segment_words",
    "tokenize",
    "load_abbreviations",
]


@dataclass(frozen=True)
class NormalizationConfig:
    """Switches for `normalize`.

    Abbreviation keys are matched on word boundaries only, longest key
    first, in a single pass (expansions are not re-scanned).
    """

    abbreviation_map: Mapping[str, str] = field(default_factory=dict)
    lowercase: bool = True
    strip_punctuation: bool = True

    def __post_init__(self):
        for key in self.abbreviation_map:
            if not key.strip():
                raise ValueError("abbreviation keys must be non-empty")


def _abbreviation_regex(mapping: Mapping[str, str]) -> re.Pattern[str]:
    keys = sorted(mapping, key=len, reverse=True)
    alternation = "|".join(re.escape(k) for k in keys)
    return re.compile(rf"(?<!\w)(?:{alternation})(?!\w)")


def normalize(raw: str, config: NormalizationConfig) -> str:
    """Whitespace-collapse `raw`, expanding abbreviations and applying
    the configured casing/punctuation rules. Unicode is preserved."""
    text = raw
    if config.abbreviation_map:
        pattern = _abbreviation_regex(config.abbreviation_map)
        text = pattern.sub(lambda m: config.abbreviation_map[m.group(0)], text)
    if config.lowercase:
        text = text.lower()
    if config.strip_punctuation:
        text = re.sub(r"[^\w\s]+", " ", text)
    return " ".join(text.split())


class CompoundDictionary:
    """Set of multi-word phrases, looked up by exact word sequence."""

    def __init__(self, phrases: Iterable[str] = ()):
        entries: set[tuple[str, ...]] = set()
        for phrase in phrases:
            words = tuple(phrase.split())
            if len(words) < 2:
                raise ValueError(f"dictionary entries need at least two words: {phrase!r}")
            entries.add(words)
        by_first: dict[str, list[tuple[str, ...]]] = {}
        for words in entries:
            by_first.setdefault(words[0], []).append(words)
        for options in by_first.values():
            options.sort(key=len, reverse=True)
        self._entries = frozenset(entries)
        self._by_first = by_first

    @classmethod
    def from_file(cls, path: str | Path) -> "CompoundDictionary":
        """Read one phrase per line (UTF-8); blank lines are skipped."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(line.strip() for line in lines if line.strip())

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, phrase: str) -> bool:
        return tuple(phrase.split()) in self._entries

    def match_length(self, words: Sequence[str], start: int) -> int:
        """Word count of the longest entry matching at `start`, else 0."""
        for option in self._by_first.get(words[start], ()):
            if tuple(words[start : start + len(option)]) == option:
                return len(option)
        return 0


@dataclass(frozen=True)
class TokenStream:
    """Ordered tokens; compounds are underscore-joined single tokens."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        for tok in self.tokens:
            if tok.split() != [tok]:
                raise ValueError(f"invalid token: {tok!r}")

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, i: int) -> str:
        return self.tokens[i]


def segment_words(text: str, dictionary: CompoundDictionary) -> TokenStream:
    """Greedy longest-match segmentation of normalized `text`.

    Scans left to right; at each position the longest dictionary entry
    wins and is emitted as one underscore-joined token. Words matching
    no entry pass through unchanged, so an empty dictionary reduces to
    a whitespace split.
    """
    words = text.split()
    tokens: list[str] = []
    i = 0
    while i < len(words):
        span = dictionary.match_length(words, i)
        if span:
            tokens.append("_".join(words[i : i + span]))
            i += span
        else:
            tokens.append(words[i])
            i += 1
    return TokenStream(tuple(tokens))


def tokenize(raw: str, config: NormalizationConfig, dictionary: CompoundDictionary) -> TokenStream:
    """normalize + segment_words in one step."""
    return segment_words(normalize(raw, config), dictionary)


def load_abbreviations(path: str | Path) -> dict[str, str]:
    """Read an abbreviation map from a JSON object of key -> expansion."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in data.items()
    ):
        raise ValueError("abbreviation file must be a JSON object of string -> string")
    return data
