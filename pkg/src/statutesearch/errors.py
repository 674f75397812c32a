"""Exception types shared across the package."""


class StatuteSearchError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(StatuteSearchError):
    """An input file is malformed or violates its schema."""


class DuplicateIdError(StatuteSearchError):
    """A law, article, or question identifier appears more than once."""


class EmptyCorpusError(StatuteSearchError):
    """The corpus contains no laws or no articles."""


class UnknownQuestionTypeError(StatuteSearchError):
    """A question declares a type with no known alias."""


class EmptyInputError(StatuteSearchError):
    """An index build received no units, or only token-less units."""


class DuplicateUnitError(StatuteSearchError):
    """Two index units share the same unit id."""


class UnknownUnitError(StatuteSearchError):
    """A scorer was asked about a unit id the index does not contain."""


class MissingEmbeddingError(StatuteSearchError):
    """An id has no vector in the embedding store."""


class DimensionMismatchError(StatuteSearchError):
    """Vector or feature dimensions disagree."""


class DegenerateLabelsError(StatuteSearchError):
    """Training data contains only one class."""


class VersionMismatchError(StatuteSearchError):
    """A serialized artifact declares an unsupported format version."""


class NoGoldError(StatuteSearchError):
    """A training question has no gold articles."""


class EmptyGoldError(StatuteSearchError):
    """A question was scored against an empty gold set."""


class MissingPredictionError(StatuteSearchError):
    """A gold question has no matching prediction."""


class MalformedOptionsError(StatuteSearchError):
    """A combined multiple-choice option references unknown labels."""


class RangeError(StatuteSearchError):
    """A probability falls outside [0, 1]."""


class ConfigError(StatuteSearchError):
    """Run configuration is invalid; carries the offending field paths."""

    def __init__(self, message: str, fields: tuple[str, ...] = ()):
        super().__init__(message)
        self.fields = fields
