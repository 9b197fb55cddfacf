"""Offset-preserving word-punct tokenization and pluggable sentence splitting.

Tokens are maximal runs of word characters (Unicode letters, digits,
underscore) or of non-whitespace punctuation; whitespace never appears inside
a token and offsets always index the input text. Sentence splitting is
pluggable; the shipped default is rule-based and dependency-free.
"""

from __future__ import annotations

import re
import subprocess
import threading
from dataclasses import dataclass
from typing import Protocol

from .annotations import Sentence, Token
from .errors import PluginError

_TOKEN_RE = re.compile(r"\w+|[^\w\s]+")

_TERMINATORS = ".!?؟"  # includes the Arabic question mark
_CLOSERS = "\"'»”’)]}"
_OPENERS = "\"'«„“‘¿¡([{"

# Per-language abbreviation guards: a "." after one of these (or after any
# single letter, covering initials and dotted acronyms) never ends a sentence.
ABBREVIATIONS: dict[str, frozenset[str]] = {
    "en": frozenset(
        "dr mr mrs ms prof st jr sr vs etc approx dept fig no inc est".split()
    ),
    "de": frozenset("dr prof nr bzw ca usw str abs inkl zzgl".split()),
    "fr": frozenset("dr prof av bd mme mlle".split()),
    "it": frozenset("dott prof sig dr".split()),
    "es": frozenset("dr dra sr sra prof av".split()),
    "ro": frozenset("dr prof nr str dna dl".split()),
    "tr": frozenset("dr prof no sok cad vb vs bkz".split()),
    "ar": frozenset("د".split()),
}


def word_punct_tokenize(text: str, base: int = 0) -> list[Token]:
    """Tokenize into word runs and punctuation runs with input offsets.

    ``base`` shifts the emitted offsets, for tokenizing a slice of a larger
    document while keeping document coordinates.
    """
    return [
        Token(m.group(), base + m.start(), base + m.end())
        for m in _TOKEN_RE.finditer(text)
    ]


class SplitterPlugin(Protocol):
    name: str

    def split(self, text: str) -> list[tuple[int, int]]:
        """Return ordered, non-overlapping sentence ranges covering all
        non-whitespace text."""
        ...


@dataclass(frozen=True)
class DefaultSplitter:
    """Rule-based splitter: terminator + whitespace + sentence-opening char.

    A sentence opener is an uppercase letter, a caseless-script letter
    (Arabic has no case), a digit, or an opening quote/bracket. A period
    after a guarded abbreviation or a single letter does not split.
    """

    language_code: str = "en"
    name: str = "default"
    extra_abbreviations: frozenset[str] = frozenset()

    def _abbreviations(self) -> frozenset[str]:
        return ABBREVIATIONS.get(self.language_code, frozenset()) | self.extra_abbreviations

    @staticmethod
    def _opens_sentence(ch: str) -> bool:
        if ch.isdigit() or ch in _OPENERS:
            return True
        return ch.isalpha() and not ch.islower()

    def _guarded(self, text: str, dot: int) -> bool:
        j = dot
        while j > 0 and (text[j - 1].isalnum() or text[j - 1] == "."):
            j -= 1
        word = text[j:dot].rstrip(".")
        if not word:
            return False
        tail = word.rsplit(".", 1)[-1]  # "M.D" guards via its last component
        if len(tail) == 1 and tail.isalpha():
            return True
        abbreviations = self._abbreviations()
        return word.lower() in abbreviations or tail.lower() in abbreviations

    def split(self, text: str) -> list[tuple[int, int]]:
        boundaries: list[int] = []
        i = 0
        n = len(text)
        while i < n:
            ch = text[i]
            if ch in _TERMINATORS:
                j = i
                while j + 1 < n and text[j + 1] in _TERMINATORS:
                    j += 1
                while j + 1 < n and text[j + 1] in _CLOSERS:
                    j += 1
                if ch == "." and self._guarded(text, i):
                    i = j + 1
                    continue
                if j + 1 >= n:
                    i = j + 1
                    continue
                if text[j + 1].isspace():
                    k = j + 1
                    while k < n and text[k].isspace():
                        k += 1
                    if k >= n or self._opens_sentence(text[k]):
                        boundaries.append(j + 1)
                i = j + 1
            else:
                i += 1
        ranges: list[tuple[int, int]] = []
        prev = 0
        for b in boundaries + [n]:
            chunk = text[prev:b]
            lead = len(chunk) - len(chunk.lstrip())
            trail = len(chunk) - len(chunk.rstrip())
            if chunk.strip():
                ranges.append((prev + lead, b - trail))
            prev = b
        return ranges


@dataclass(frozen=True)
class ExternalSplitter:
    """Sentence splitter backed by an external executable.

    The engine writes the UTF-8 text to the child's stdin and reads
    newline-delimited "start<TAB>end" ranges from its stdout.
    """

    command: tuple[str, ...]
    name: str = "external"
    timeout: float = 60.0

    def split(self, text: str) -> list[tuple[int, int]]:
        try:
            proc = subprocess.run(
                list(self.command),
                input=text.encode("utf-8"),
                capture_output=True,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise PluginError(f"splitter {self.name!r} failed: {exc}") from exc
        if proc.returncode != 0:
            raise PluginError(
                f"splitter {self.name!r} exited {proc.returncode}: "
                f"{proc.stderr.decode('utf-8', 'replace').strip()}"
            )
        ranges: list[tuple[int, int]] = []
        for lineno, line in enumerate(proc.stdout.decode("utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise PluginError(f"splitter output line {lineno}: expected start<TAB>end")
            try:
                ranges.append((int(parts[0]), int(parts[1])))
            except ValueError as exc:
                raise PluginError(f"splitter output line {lineno}: {exc}") from exc
        return ranges


def _validate_ranges(text: str, ranges: list[tuple[int, int]], plugin_name: str) -> None:
    prev_end = 0
    for start, end in ranges:
        if not 0 <= start < end <= len(text):
            raise PluginError(f"splitter {plugin_name!r}: bad range [{start}, {end})")
        if start < prev_end:
            raise PluginError(f"splitter {plugin_name!r}: overlapping or unordered ranges")
        prev_end = end
    covered = [False] * len(text)
    for start, end in ranges:
        for i in range(start, end):
            covered[i] = True
    for i, ch in enumerate(text):
        if not ch.isspace() and not covered[i]:
            raise PluginError(
                f"splitter {plugin_name!r}: non-whitespace text at {i} not covered"
            )


# Plugins declaring concurrent_safe=False get their calls serialized.
_PLUGIN_LOCKS: dict[int, threading.Lock] = {}
_PLUGIN_LOCKS_GUARD = threading.Lock()


def _plugin_lock(plugin) -> threading.Lock:
    with _PLUGIN_LOCKS_GUARD:
        return _PLUGIN_LOCKS.setdefault(id(plugin), threading.Lock())


def split_sentences(
    text: str,
    plugin: SplitterPlugin | None = None,
    language_code: str = "en",
) -> list[Sentence]:
    """Split into sentences and tokenize each with the word-punct tokenizer."""
    splitter = plugin if plugin is not None else DefaultSplitter(language_code)
    if getattr(splitter, "concurrent_safe", True):
        ranges = splitter.split(text)
    else:
        with _plugin_lock(splitter):
            ranges = splitter.split(text)
    _validate_ranges(text, ranges, getattr(splitter, "name", "plugin"))
    sentences = []
    for start, end in ranges:
        tokens = word_punct_tokenize(text[start:end], base=start)
        sentences.append(Sentence(tuple(tokens), start, end))
    return sentences
