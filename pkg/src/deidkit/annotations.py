"""Document/annotation data model and span <-> IOB2 conversions.

All offsets are Unicode code-point indices into the original document text,
half-open. IOB2 is the canonical tagging scheme: every chunk starts with B-.
Inside tags, labels use their space-free tag form ("B-MEDICALRECORD"); binding
a :class:`~deidkit.labels.LabelSet` maps tags back to canonical label names.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import AlignmentError, InvalidTagError, OverlapError, UnknownLabelError
from .labels import LabelSet


class SpanSource(enum.Enum):
    RULE = "RULE"
    MODEL = "MODEL"
    LLM = "LLM"
    GOLD = "GOLD"
    SYNTH = "SYNTH"


class Repair(enum.Enum):
    """How to treat tag sequences that violate strict IOB2 validity."""

    STRICT = "STRICT"
    RELAXED = "RELAXED"


@dataclass(frozen=True, slots=True)
class Document:
    doc_id: str
    text: str
    language_code: str = "en"
    nfc_normalized: bool = False

    @classmethod
    def ingest(cls, doc_id: str, text: str, language_code: str = "en") -> "Document":
        """Build a document with NFC normalization applied once at ingestion."""
        import unicodedata

        return cls(doc_id, unicodedata.normalize("NFC", text), language_code, True)


@dataclass(frozen=True, slots=True)
class Token:
    text: str
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise AlignmentError(f"bad token offsets [{self.start}, {self.end})")
        if self.end - self.start != len(self.text):
            raise AlignmentError(
                f"token text {self.text!r} does not span [{self.start}, {self.end})"
            )


@dataclass(frozen=True, slots=True)
class Sentence:
    tokens: tuple[Token, ...]
    start: int
    end: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        prev_end = self.start
        for tok in self.tokens:
            if tok.start < prev_end or tok.end > self.end:
                raise AlignmentError(
                    f"token [{tok.start}, {tok.end}) outside sentence "
                    f"[{self.start}, {self.end}) or overlapping"
                )
            prev_end = tok.end

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True, slots=True, order=True)
class EntitySpan:
    """The universal annotation unit: a labeled half-open character range."""

    start: int
    end: int
    label: str
    source: SpanSource = field(default=SpanSource.GOLD, compare=False)
    confidence: float = field(default=1.0, compare=False)

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(f"empty span [{self.start}, {self.end})")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.start, self.end, self.label)


@dataclass(frozen=True, slots=True)
class TagSequence:
    """IOB2 tags aligned 1:1 with a sentence's tokens."""

    tags: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tags", tuple(self.tags))

    def __len__(self) -> int:
        return len(self.tags)

    def __iter__(self):
        return iter(self.tags)

    def __getitem__(self, i):
        return self.tags[i]


def parse_tag(tag: str) -> tuple[str, str | None]:
    """Split an IOB2 tag into (prefix, label-part). Raises InvalidTagError."""
    if tag == "O":
        return "O", None
    if len(tag) > 2 and tag[1] == "-" and tag[0] in "BI":
        return tag[0], tag[2:]
    raise InvalidTagError(f"malformed tag: {tag!r}")


def validate_iob2(tags: TagSequence | tuple[str, ...]) -> None:
    """Raise InvalidTagError unless every I-L continues a same-label chunk."""
    prev_label: str | None = None
    for i, tag in enumerate(tags):
        prefix, lab = parse_tag(tag)
        if prefix == "I" and lab != prev_label:
            raise InvalidTagError(f"I-{lab} at position {i} does not continue a chunk")
        prev_label = lab if prefix in ("B", "I") else None


def spans_to_bio(sentence: Sentence, spans: list[EntitySpan]) -> TagSequence:
    """Convert token-aligned spans over one sentence into IOB2 tags.

    Every span must cover a whole number of the sentence's tokens; spans may
    not share tokens. Raises OverlapError / AlignmentError otherwise.
    """
    tags = ["O"] * len(sentence.tokens)
    starts = {tok.start: i for i, tok in enumerate(sentence.tokens)}
    ends = {tok.end: i for i, tok in enumerate(sentence.tokens)}
    for span in sorted(spans):
        first = starts.get(span.start)
        last = ends.get(span.end)
        if first is None or last is None or first > last:
            raise AlignmentError(
                f"span [{span.start}, {span.end}) does not align with token boundaries"
            )
        tag_label = LabelSet.tag_name(span.label)
        for i in range(first, last + 1):
            if tags[i] != "O":
                raise OverlapError(f"token {i} claimed by two spans")
            tags[i] = ("B-" if i == first else "I-") + tag_label
    return TagSequence(tuple(tags))


def bio_to_spans(
    sentence: Sentence,
    tags: TagSequence | tuple[str, ...],
    repair: Repair = Repair.RELAXED,
    labels: LabelSet | None = None,
    source: SpanSource = SpanSource.GOLD,
    confidence: float = 1.0,
) -> list[EntitySpan]:
    """Convert IOB2 tags back into character spans on the original document.

    RELAXED treats an I-L that does not continue a same-label chunk as B-L
    (and any unparseable tag as O); STRICT raises InvalidTagError instead.
    When a label set is bound, tag labels are resolved to canonical names and
    unknown ones raise UnknownLabelError.
    """
    seq = tuple(tags)
    if len(seq) != len(sentence.tokens):
        raise AlignmentError(
            f"{len(seq)} tags for {len(sentence.tokens)} tokens"
        )
    spans: list[EntitySpan] = []
    open_label: str | None = None
    open_first: int | None = None

    def close(last_index: int):
        nonlocal open_label, open_first
        if open_label is not None:
            spans.append(
                EntitySpan(
                    start=sentence.tokens[open_first].start,
                    end=sentence.tokens[last_index].end,
                    label=open_label,
                    source=source,
                    confidence=confidence,
                )
            )
        open_label = None
        open_first = None

    for i, tag in enumerate(seq):
        try:
            prefix, lab = parse_tag(tag)
        except InvalidTagError:
            if repair is Repair.STRICT:
                raise
            prefix, lab = "O", None
        if lab is not None:
            if labels is not None:
                lab = labels.resolve(lab)
        if prefix == "O":
            close(i - 1)
        elif prefix == "B":
            close(i - 1)
            open_label, open_first = lab, i
        else:  # I
            if open_label == lab:
                continue
            if repair is Repair.STRICT:
                raise InvalidTagError(
                    f"I-{seq[i][2:]} at position {i} does not continue a chunk"
                )
            close(i - 1)
            open_label, open_first = lab, i
    close(len(seq) - 1)
    return spans


class ViolationKind(enum.Enum):
    OUT_OF_BOUNDS = "OUT_OF_BOUNDS"
    OVERLAP = "OVERLAP"
    UNKNOWN_LABEL = "UNKNOWN_LABEL"


@dataclass(frozen=True, slots=True)
class Violation:
    kind: ViolationKind
    message: str
    span_index: int
    other_index: int | None = None


def validate_spans(
    doc: Document, spans: list[EntitySpan], labels: LabelSet | None = None
) -> list[Violation]:
    """Report structural problems in an annotation; an empty list means valid."""
    violations: list[Violation] = []
    for i, span in enumerate(spans):
        if span.start < 0 or span.end > len(doc.text):
            violations.append(
                Violation(
                    ViolationKind.OUT_OF_BOUNDS,
                    f"span [{span.start}, {span.end}) outside document of length {len(doc.text)}",
                    i,
                )
            )
        if labels is not None and labels.try_resolve(span.label) is None:
            violations.append(
                Violation(ViolationKind.UNKNOWN_LABEL, f"unknown label {span.label!r}", i)
            )
    order = sorted(range(len(spans)), key=lambda i: (spans[i].start, spans[i].end))
    for a, b in zip(order, order[1:]):
        if spans[b].start < spans[a].end:
            violations.append(
                Violation(
                    ViolationKind.OVERLAP,
                    f"spans [{spans[a].start}, {spans[a].end}) and "
                    f"[{spans[b].start}, {spans[b].end}) overlap",
                    b,
                    a,
                )
            )
    return violations


def sentence_from_tokens(token_texts: list[str], start: int = 0) -> Sentence:
    """Rebuild a sentence from bare token strings using single-space joins.

    Used when projecting CoNLL records (which carry no offsets) back into the
    span model; the reconstruction is the canonical one, not the original.
    """
    tokens: list[Token] = []
    pos = start
    for text in token_texts:
        if not text or any(ch.isspace() for ch in text):
            raise AlignmentError(f"token may not be empty or contain whitespace: {text!r}")
        tokens.append(Token(text, pos, pos + len(text)))
        pos += len(text) + 1
    return Sentence(tuple(tokens), start, pos - 1 if tokens else start)
