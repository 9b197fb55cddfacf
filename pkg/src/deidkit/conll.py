"""Bit-exact reader/writer for CoNLL-style BIO files plus span-JSON interchange.

Reading is tolerant (any run of spaces/tabs separates columns, first column is
the token, last column the tag); writing is canonical (single space, single
blank line between sentences, trailing newline, UTF-8, LF). Tags with unknown
labels pass through verbatim at this layer and are rejected only when bound to
a label set.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

from .annotations import (
    Document,
    EntitySpan,
    Repair,
    SpanSource,
    TagSequence,
    validate_iob2,
)
from .errors import FormatError, InvalidTagError

DOCSTART = "-DOCSTART-"


@dataclass(frozen=True, slots=True)
class ConllSentence:
    tokens: tuple[str, ...]
    tags: TagSequence

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not isinstance(self.tags, TagSequence):
            object.__setattr__(self, "tags", TagSequence(tuple(self.tags)))
        if len(self.tokens) != len(self.tags):
            raise FormatError(
                f"{len(self.tokens)} tokens but {len(self.tags)} tags in sentence"
            )


@dataclass(frozen=True, slots=True)
class ConllRecord:
    sentences: tuple[ConllSentence, ...]
    doc_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))


def read_conll(data: bytes | str | io.IOBase, repair: Repair = Repair.RELAXED) -> list[ConllRecord]:
    """Parse blank-line-separated sentences into records.

    ``-DOCSTART-`` lines start a new record (an optional second column other
    than the conventional "-X-"/"O" fillers is taken as the doc id). STRICT
    mode validates IOB2 transitions; RELAXED accepts any tags.
    """
    if isinstance(data, io.IOBase):
        data = data.read()
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"input is not valid UTF-8: {exc}") from exc
    else:
        text = data

    records: list[ConllRecord] = []
    sentences: list[ConllSentence] = []
    tokens: list[str] = []
    tags: list[str] = []
    doc_id: str | None = None
    saw_docstart = False

    def close_sentence(lineno: int):
        if tokens:
            seq = TagSequence(tuple(tags))
            if repair is Repair.STRICT:
                try:
                    validate_iob2(seq)
                except InvalidTagError as exc:
                    raise InvalidTagError(f"line {lineno}: {exc}") from exc
            sentences.append(ConllSentence(tuple(tokens), seq))
            tokens.clear()
            tags.clear()

    def close_record():
        nonlocal doc_id
        if sentences or saw_docstart:
            records.append(ConllRecord(tuple(sentences), doc_id))
            sentences.clear()
        doc_id = None

    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped:
            close_sentence(lineno)
            continue
        columns = stripped.split()
        if columns[0] == DOCSTART:
            close_sentence(lineno)
            close_record()
            saw_docstart = True
            if len(columns) > 1 and columns[1] not in ("-X-", "O"):
                doc_id = columns[1]
            continue
        if len(columns) < 2:
            raise FormatError(f"expected at least 2 columns, got {stripped!r}", lineno)
        tokens.append(columns[0])
        tags.append(columns[-1])
    close_sentence(len(text.splitlines()))
    close_record()
    return records


def write_conll(records: list[ConllRecord]) -> bytes:
    """Serialize records canonically; read_conll(write_conll(x)) == x."""
    out: list[str] = []
    explicit_docstarts = len(records) > 1 or any(r.doc_id for r in records)
    for record in records:
        if explicit_docstarts:
            out.append(DOCSTART + (f" {record.doc_id}" if record.doc_id else ""))
            out.append("")
        for sentence in record.sentences:
            for token, tag in zip(sentence.tokens, sentence.tags):
                for value, what in ((token, "token"), (tag, "tag")):
                    if not value or any(ch.isspace() for ch in value):
                        raise FormatError(
                            f"{what} may not be empty or contain whitespace: {value!r}"
                        )
                out.append(f"{token} {tag}")
            out.append("")
    return ("\n".join(out) + "\n").encode("utf-8") if out else b""


@dataclass(frozen=True, slots=True)
class AnnotatedDoc:
    document: Document
    spans: tuple[EntitySpan, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "spans", tuple(self.spans))


def _span_to_dict(span: EntitySpan) -> dict:
    return {
        "label": span.label,
        "start": span.start,
        "end": span.end,
        "source": span.source.value,
        "confidence": span.confidence,
    }


def _span_from_dict(payload: dict) -> EntitySpan:
    try:
        return EntitySpan(
            start=int(payload["start"]),
            end=int(payload["end"]),
            label=str(payload["label"]),
            source=SpanSource(payload.get("source", "GOLD")),
            confidence=float(payload.get("confidence", 1.0)),
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad span entry {payload!r}: {exc}") from exc


def read_span_json(data: bytes | str) -> list[AnnotatedDoc]:
    """Read the span-JSON interchange format.

    Accepts a single object or a list of objects, each shaped
    ``{doc_id, text, spans: [{label, start, end, source, confidence}]}``.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not valid JSON: {exc}") from exc
    if isinstance(payload, dict):
        payload = [payload]
    docs = []
    for entry in payload:
        if not isinstance(entry, dict) or "text" not in entry:
            raise FormatError(f"span-JSON entry missing 'text': {entry!r}")
        doc = Document(
            doc_id=str(entry.get("doc_id", "")),
            text=entry["text"],
            language_code=entry.get("language_code", "en"),
        )
        spans = tuple(
            sorted(_span_from_dict(s) for s in entry.get("spans", []))
        )
        docs.append(AnnotatedDoc(doc, spans))
    return docs


def write_span_json(docs: list[AnnotatedDoc]) -> bytes:
    payload = [
        {
            "doc_id": ad.document.doc_id,
            "language_code": ad.document.language_code,
            "text": ad.document.text,
            "spans": [_span_to_dict(s) for s in sorted(ad.spans)],
        }
        for ad in docs
    ]
    return (json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n").encode(
        "utf-8"
    )
