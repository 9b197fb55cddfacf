"""Synthetic augmentation: extract labeled sentences, swap chunks for
placeholders, translate, refill from a fake-chunk table, and emit BIO.

Placeholders look like ``__LABEL_1__``; the double underscores survive machine
translation far more reliably than bare abbreviations, and per-label ordinals
disambiguate repeats. All randomness is seeded; per-document seeds are derived
from the corpus seed and the document index.
"""

from __future__ import annotations

import json
import random
import re
import subprocess
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .annotations import (
    EntitySpan,
    Repair,
    Sentence,
    SpanSource,
    bio_to_spans,
    sentence_from_tokens,
    spans_to_bio,
)
from .conll import ConllRecord, ConllSentence
from .errors import ConfigError, MissingLabelError, OverlapError, PlaceholderLostError, PluginError
from .labels import LabelSet
from .tokenization import word_punct_tokenize

PLACEHOLDER_RE = re.compile(r"__[A-Z-]+_\d+__")

# Preset for the English low-resource labels that benefit most from
# augmentation; other languages typically augment every label.
ENGLISH_LOW_RESOURCE_TARGETS = frozenset(
    {"ORGANIZATION", "PROFESSION", "LOCATION-OTHER"}
)

_MONTHS = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)


def _sample_pattern(pattern: str, rng: random.Random) -> str:
    """Sample a string from a small generator-pattern language.

    Supported: literal characters, ``\\d``, ``\\w``, ``[...]`` character sets
    (with ranges), and ``{m}`` / ``{m,n}`` quantifiers on the previous atom.
    """
    atoms: list[str] = []  # each atom is an alphabet to draw one char from
    i = 0
    digits = "0123456789"
    word = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    while i < len(pattern):
        ch = pattern[i]
        if ch == "\\" and i + 1 < len(pattern):
            code = pattern[i + 1]
            if code == "d":
                atoms.append(digits)
            elif code == "w":
                atoms.append(word)
            else:
                atoms.append(code)
            i += 2
        elif ch == "[":
            end = pattern.find("]", i)
            if end == -1:
                raise ConfigError(f"unterminated character set in pattern {pattern!r}")
            body = pattern[i + 1 : end]
            alphabet = []
            j = 0
            while j < len(body):
                if j + 2 < len(body) and body[j + 1] == "-":
                    alphabet.extend(
                        chr(c) for c in range(ord(body[j]), ord(body[j + 2]) + 1)
                    )
                    j += 3
                else:
                    alphabet.append(body[j])
                    j += 1
            atoms.append("".join(alphabet))
            i = end + 1
        elif ch == "{":
            end = pattern.find("}", i)
            if end == -1 or not atoms:
                raise ConfigError(f"bad quantifier in pattern {pattern!r}")
            body = pattern[i + 1 : end]
            if "," in body:
                lo, hi = (int(x) for x in body.split(","))
            else:
                lo = hi = int(body)
            count = rng.randint(lo, hi)
            atoms.extend([atoms[-1]] * (count - 1) if count else [])
            if count == 0:
                atoms.pop()
            i = end + 1
        else:
            atoms.append(ch)
            i += 1
    return "".join(rng.choice(alphabet) for alphabet in atoms)


def _sample_date(fmt: str, rng: random.Random) -> str:
    """Render a random date through a strftime-like subset (%d %m %Y %y %b %B)."""
    year = rng.randint(1930, 2030)
    month = rng.randint(1, 12)
    day = rng.randint(1, (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)[month - 1])
    replacements = {
        "%d": f"{day:02d}",
        "%m": f"{month:02d}",
        "%Y": f"{year:04d}",
        "%y": f"{year % 100:02d}",
        "%b": _MONTHS[month - 1][:3],
        "%B": _MONTHS[month - 1],
    }
    out = fmt
    for token, value in replacements.items():
        out = out.replace(token, value)
    return out


@dataclass(frozen=True)
class FakeChunkTable:
    """Per-label surface-form templates for synthetic chunk generation.

    Each label maps to a list of template dicts, one of:
    ``{"literal": text}``, ``{"pattern": spec}``, ``{"pool": name}``, or
    ``{"date_format": fmt}``. Pools are named string lists shared by labels.
    """

    templates: dict[str, tuple[dict, ...]]
    pools: dict[str, tuple[str, ...]] = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self):
        for label, entries in self.templates.items():
            if not entries:
                raise ConfigError(f"label {label!r} has no templates")
            for entry in entries:
                if len(entry) != 1 or next(iter(entry)) not in (
                    "literal", "pattern", "pool", "date_format",
                ):
                    raise ConfigError(f"bad template entry for {label!r}: {entry!r}")
                if "pool" in entry and entry["pool"] not in self.pools:
                    raise ConfigError(f"unknown pool {entry['pool']!r} for {label!r}")
                if "literal" in entry and (
                    not entry["literal"] or "__" in entry["literal"]
                ):
                    raise ConfigError(f"bad literal for {label!r}: {entry['literal']!r}")

    def covers(self, label: str) -> bool:
        return label in self.templates

    def draw(self, label: str, rng: random.Random, original: str | None = None) -> str:
        if label not in self.templates:
            raise MissingLabelError(f"fake chunk table has no templates for {label!r}")
        entry = rng.choice(self.templates[label])
        kind, value = next(iter(entry.items()))
        if kind == "literal":
            chunk = value
        elif kind == "pool":
            chunk = rng.choice(self.pools[value])
        elif kind == "pattern":
            chunk = _sample_pattern(value, rng)
        else:
            chunk = _sample_date(value, rng)
        if not chunk or "__" in chunk:
            raise ConfigError(f"generated chunk for {label!r} is invalid: {chunk!r}")
        return chunk

    @classmethod
    def from_file(cls, path: str) -> "FakeChunkTable":
        try:
            with open(path, encoding="utf-8") as fh:
                payload = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read fake chunk table {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"fake chunk table {path!r} is not valid JSON: {exc}") from exc
        return cls(
            templates={
                label: tuple(entries) for label, entries in payload.get("labels", {}).items()
            },
            pools={name: tuple(values) for name, values in payload.get("pools", {}).items()},
            rng_seed=int(payload.get("seed", 0)),
        )


class OriginalChunkTable:
    """Table stand-in that refills every slot with its original chunk."""

    def covers(self, label: str) -> bool:
        return True

    def draw(self, label: str, rng: random.Random, original: str | None = None) -> str:
        if original is None:
            raise MissingLabelError("original-chunk table used outside slot refill")
        return original


@dataclass(frozen=True, slots=True)
class Slot:
    placeholder_id: str
    label: str
    original_chunk: str


@dataclass(frozen=True, slots=True)
class PlaceholderDoc:
    text: str
    slots: tuple[Slot, ...]

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))
        for slot in self.slots:
            if self.text.count(slot.placeholder_id) != 1:
                raise PlaceholderLostError([slot.placeholder_id], [])


class TranslatorPlugin(Protocol):
    name: str

    def translate(self, text: str) -> str: ...


@dataclass(frozen=True)
class IdentityTranslator:
    name: str = "identity"

    def translate(self, text: str) -> str:
        return text


@dataclass(frozen=True)
class MappingTranslator:
    """Word-for-word dictionary translator used as a deterministic mock."""

    mapping: dict[str, str]
    name: str = "mapping"

    def translate(self, text: str) -> str:
        parts = []
        last = 0
        for m in PLACEHOLDER_RE.finditer(text):
            parts.append(self._translate_plain(text[last : m.start()]))
            parts.append(m.group())
            last = m.end()
        parts.append(self._translate_plain(text[last:]))
        return "".join(parts)

    def _translate_plain(self, text: str) -> str:
        return re.sub(
            r"\w+", lambda m: self.mapping.get(m.group(), m.group()), text
        )


@dataclass(frozen=True)
class ExternalTranslator:
    """Translator backed by an external executable, one document per call."""

    command: tuple[str, ...]
    name: str = "external"
    timeout: float = 120.0

    def translate(self, text: str) -> str:
        try:
            proc = subprocess.run(
                list(self.command),
                input=text.encode("utf-8"),
                capture_output=True,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise PluginError(f"translator {self.name!r} failed: {exc}") from exc
        if proc.returncode != 0:
            raise PluginError(
                f"translator {self.name!r} exited {proc.returncode}: "
                f"{proc.stderr.decode('utf-8', 'replace').strip()}"
            )
        return proc.stdout.decode("utf-8")


class NdjsonTranslator:
    """Batch-mode external translator: one persistent child, NDJSON lines.

    Each request is ``{"id": n, "text": ...}`` on the child's stdin; the
    child answers one ``{"id": n, "text": ...}`` line per request on stdout.
    """

    def __init__(self, command: tuple[str, ...], name: str = "external-ndjson"):
        self.command = tuple(command)
        self.name = name
        self.concurrent_safe = False
        self._proc: subprocess.Popen | None = None
        self._counter = 0

    def _child(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    list(self.command), stdin=subprocess.PIPE, stdout=subprocess.PIPE
                )
            except OSError as exc:
                raise PluginError(f"cannot start translator {self.name!r}: {exc}") from exc
        return self._proc

    def translate(self, text: str) -> str:
        self._counter += 1
        request_id = self._counter
        proc = self._child()
        line = json.dumps({"id": request_id, "text": text}, ensure_ascii=False)
        try:
            proc.stdin.write(line.encode("utf-8") + b"\n")
            proc.stdin.flush()
            answer = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise PluginError(f"translator {self.name!r} died: {exc}") from exc
        if not answer:
            raise PluginError(f"translator {self.name!r} closed its stdout")
        try:
            payload = json.loads(answer.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise PluginError(f"translator {self.name!r} sent a non-JSON line") from exc
        if payload.get("id") != request_id or "text" not in payload:
            raise PluginError(f"translator {self.name!r} answered out of order")
        return payload["text"]

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            self._proc.wait(timeout=5)
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def extract_candidates(
    records: Sequence[ConllRecord],
    target_labels: set[str],
    labels: LabelSet | None = None,
) -> list[tuple[Sentence, list[EntitySpan]]]:
    """Sentences (reconstructed from tokens) containing at least one target span."""
    targets = {LabelSet.tag_name(label) for label in target_labels}
    out: list[tuple[Sentence, list[EntitySpan]]] = []
    for record in records:
        for conll_sentence in record.sentences:
            sentence = sentence_from_tokens(list(conll_sentence.tokens))
            spans = bio_to_spans(sentence, conll_sentence.tags, Repair.RELAXED, labels)
            if any(LabelSet.tag_name(s.label) in targets for s in spans):
                out.append((sentence, spans))
    return out


def to_placeholders(sentence: Sentence, spans: Sequence[EntitySpan]) -> PlaceholderDoc:
    """Replace each labeled chunk with ``__LABEL_k__`` and record the originals."""
    ordered = sorted(spans)
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise OverlapError(f"spans {a.key} and {b.key} overlap")
    base = sentence.start
    source = _sentence_text(sentence)
    parts: list[str] = []
    slots: list[Slot] = []
    counters: dict[str, int] = {}
    last = 0
    for span in ordered:
        counters[span.label] = counters.get(span.label, 0) + 1
        placeholder = f"__{LabelSet.tag_name(span.label)}_{counters[span.label]}__"
        parts.append(source[last : span.start - base])
        parts.append(placeholder)
        slots.append(Slot(placeholder, span.label, source[span.start - base : span.end - base]))
        last = span.end - base
    parts.append(source[last:])
    return PlaceholderDoc("".join(parts), tuple(slots))


def _sentence_text(sentence: Sentence) -> str:
    """Reconstruct sentence text from tokens and the gaps implied by offsets."""
    out: list[str] = []
    pos = sentence.start
    for token in sentence.tokens:
        out.append(" " * (token.start - pos))
        out.append(token.text)
        pos = token.end
    return "".join(out)


def translate(doc: PlaceholderDoc, translator: TranslatorPlugin) -> PlaceholderDoc:
    """Run the translator and verify every placeholder id survived exactly once."""
    translated = translator.translate(doc.text)
    missing = [s.placeholder_id for s in doc.slots if translated.count(s.placeholder_id) == 0]
    duplicated = [s.placeholder_id for s in doc.slots if translated.count(s.placeholder_id) > 1]
    if missing or duplicated:
        raise PlaceholderLostError(missing, duplicated)
    return PlaceholderDoc(translated, doc.slots)


def refill(
    doc: PlaceholderDoc,
    table: FakeChunkTable | OriginalChunkTable,
    seed: int,
) -> tuple[str, list[EntitySpan]]:
    """Replace placeholders with generated chunks; returns text and exact spans."""
    for slot in doc.slots:
        if not table.covers(slot.label):
            raise MissingLabelError(f"fake chunk table has no templates for {slot.label!r}")
    rng = random.Random(seed)
    ordered = sorted(doc.slots, key=lambda s: doc.text.index(s.placeholder_id))
    text = doc.text
    spans: list[EntitySpan] = []
    for slot in ordered:
        chunk = table.draw(slot.label, rng, original=slot.original_chunk)
        at = text.index(slot.placeholder_id)
        text = text[:at] + chunk + text[at + len(slot.placeholder_id) :]
        spans.append(
            EntitySpan(
                start=at,
                end=at + len(chunk),
                label=slot.label,
                source=SpanSource.SYNTH,
            )
        )
    return text, spans


def emit_bio(
    pairs: Sequence[tuple[str, Sequence[EntitySpan]]],
    doc_id: str | None = None,
) -> ConllRecord:
    """Tokenize refilled sentences and convert their spans to IOB2 tags."""
    sentences: list[ConllSentence] = []
    for text, spans in pairs:
        tokens = word_punct_tokenize(text)
        sentence = Sentence(tuple(tokens), 0, len(text))
        tags = spans_to_bio(sentence, list(spans))
        sentences.append(ConllSentence(tuple(t.text for t in tokens), tags))
    return ConllRecord(tuple(sentences), doc_id)


def derive_seed(seed: int, index: int) -> int:
    """Stable per-document seed derived from the corpus seed and position."""
    return random.Random(f"{seed}:{index}").getrandbits(63)


def augment_corpus(
    records: Sequence[ConllRecord],
    target_labels: set[str],
    table: FakeChunkTable | OriginalChunkTable,
    translator: TranslatorPlugin,
    seed: int,
    labels: LabelSet | None = None,
) -> list[ConllRecord]:
    """Run the full augmentation loop; returns the synthesized records only.

    The caller appends them to the training corpus. Deterministic: a fixed
    seed yields byte-identical output.
    """
    out: list[ConllRecord] = []
    for record_index, record in enumerate(records):
        candidates = extract_candidates([record], target_labels, labels)
        pairs: list[tuple[str, Sequence[EntitySpan]]] = []
        for sentence_index, (sentence, spans) in enumerate(candidates):
            placeholder_doc = to_placeholders(sentence, spans)
            translated = translate(placeholder_doc, translator)
            pairs.append(
                refill(translated, table, derive_seed(seed, record_index * 100003 + sentence_index))
            )
        out.append(emit_bio(pairs, record.doc_id))
    return out
