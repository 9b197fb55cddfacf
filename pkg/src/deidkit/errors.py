"""Exception taxonomy shared across the engine."""

from __future__ import annotations


class DeidError(Exception):
    """Base class for all engine errors."""


class OverlapError(DeidError):
    """Two spans claim the same token or character range."""


class AlignmentError(DeidError):
    """Span boundaries or token sequences do not line up."""


class InvalidTagError(DeidError):
    """Tag sequence violates strict IOB2 validity."""


class UnknownLabelError(DeidError):
    """Label name not present in the bound label set."""


class FormatError(DeidError):
    """Malformed input at the I/O layer; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class PatternCompileError(DeidError):
    """One or more rule patterns failed validation at load time."""

    def __init__(self, failures: list[tuple[str, str, str]]):
        # failures: (label, pattern, reason)
        self.failures = list(failures)
        super().__init__(
            "; ".join(f"{label}: {reason}" for label, _, reason in self.failures)
        )


class PluginError(DeidError):
    """A splitter or translator plugin misbehaved."""


class PlaceholderLostError(DeidError):
    """Translation dropped or duplicated placeholder ids."""

    def __init__(self, missing: list[str], duplicated: list[str]):
        self.missing = list(missing)
        self.duplicated = list(duplicated)
        parts = []
        if self.missing:
            parts.append(f"missing: {', '.join(self.missing)}")
        if self.duplicated:
            parts.append(f"duplicated: {', '.join(self.duplicated)}")
        super().__init__("; ".join(parts) or "placeholders lost")


class MissingLabelError(DeidError):
    """Fake chunk table has no templates for a required label."""


class EmptyInputError(DeidError):
    """Operation requires a nonempty input."""


class DocumentMismatchError(DeidError):
    """Predictions reference documents absent from the gold set."""


class BackendUnavailableError(DeidError):
    """Transport-level failure talking to the model backend."""


class ProtocolError(DeidError):
    """Backend answered with a malformed or inconsistent payload."""

    def __init__(self, message: str, sentence_index: int | None = None):
        self.sentence_index = sentence_index
        if sentence_index is not None:
            message = f"{message} (sentence {sentence_index})"
        super().__init__(message)


class LabelSetMismatchError(DeidError):
    """Backend label set hash does not match the engine's configuration."""


class ConfigError(DeidError):
    """Engine configuration is invalid or references missing files."""
