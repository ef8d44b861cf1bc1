"""Exception hierarchy shared across the toolkit.

Every domain failure raises a subclass of :class:`TvsgError` so callers (and
the CLI) can distinguish bad inputs (exit code 1) from usage mistakes (exit
code 2) and genuine bugs.
"""


class TvsgError(Exception):
    """Base class for all domain errors raised by this package."""


# --- parsing / anonymization ---------------------------------------------

class EmptyEpisode(TvsgError):
    """Episode text contained no dialogue lines at all."""


class DuplicateVariant(TvsgError):
    """A cast variant maps to more than one canonical character."""


class NoMainCharacters(TvsgError):
    """No speaker in the corpus resolved to a cast character."""


class TooManySpeakers(TvsgError):
    """More main characters speak in a scene than there are speaker IDs."""


# --- dataset store --------------------------------------------------------

class SchemaError(TvsgError):
    """A corpus record failed validation.

    Carries the 1-based line number of the offending record when read from a
    file.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateSplit(TvsgError):
    """A split ratio is positive but the corpus is too small to honor it."""


# --- encoder / models -----------------------------------------------------

class SequenceTooLong(TvsgError):
    """Token id sequence exceeds the encoder's maximum length."""


class ShapeMismatch(TvsgError):
    """Tensor arguments disagree on an expected dimension."""


class AllTruncated(TvsgError):
    """Truncation removed every dialogue token of a scene."""


class RowsUnrepresentable(TvsgError):
    """More speaker IDs are present than rows available for anchoring."""


class EmptyMask(TvsgError):
    """A pooling mask selects no positions."""


class EmptyInput(TvsgError):
    """Model input contains no usable tokens."""


class NonFiniteLoss(TvsgError):
    """Training loss became NaN or infinite."""


# --- evaluation / annotation ---------------------------------------------

class NoAnnotations(TvsgError):
    """A breakdown axis requires annotation records but none were given."""


class LengthMismatch(TvsgError):
    """Paired label sequences have different lengths."""


class NoOverlap(TvsgError):
    """Two annotators share no (scene, speaker ID) items."""


class ValidationFailed(TvsgError):
    """An annotation record violates the labeling schema.

    ``problems`` lists every violation found, not just the first.
    """

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(problems))


# --- retrieval ------------------------------------------------------------

class NoHistory(TvsgError):
    """The query scene has no preceding scenes in its show."""


class EmptyRelevance(TvsgError):
    """A relevance file contains no judged queries."""


# --- study service --------------------------------------------------------

class UnknownSession(TvsgError):
    """Session id is not registered with the service."""


class SessionExhausted(TvsgError):
    """Every item in the session queue has been answered."""


class OutOfOrder(TvsgError):
    """An answer was submitted for an item that is not the current one."""


class EmptyLog(TvsgError):
    """The annotation log holds no records to summarize."""


# --- configuration --------------------------------------------------------

class ConfigError(TvsgError):
    """A configuration value is out of range or inconsistent."""
