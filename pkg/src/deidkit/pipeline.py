"""End-to-end de-identification: merge rule and model spans, rewrite text.

Masking replaces each span with a label placeholder (default ``[LABEL]``);
obfuscation substitutes label-consistent surrogates, with identical chunks
mapping to identical surrogates within a document and dates shifted by a
per-document day offset. ``leak_check`` is a safety net that scans the output
for any surviving original chunk.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from .annotations import Document, EntitySpan, Repair, SpanSource, bio_to_spans
from .backend import BackendClient, PredictRequest
from .errors import MissingLabelError, OverlapError
from .labels import LabelSet
from .rules import CompiledRule, detect_rules
from .surrogates import (
    age_surrogate,
    draw_date_shift,
    format_preserving_random,
    is_decade_text,
    normalize_chunk,
    replace_decade,
    shift_date_text,
)
from .tokenization import SplitterPlugin, split_sentences

DEFAULT_MASK_FORMAT = "[{label}]"


class MergeStrategy(enum.Enum):
    RULE_PRIORITY = "rule_priority"
    MODEL_PRIORITY = "model_priority"
    LONGEST = "longest"


@dataclass(frozen=True)
class MergePolicy:
    """Deterministic overlap resolution for the union of detector outputs.

    The default chain prefers rule spans (pattern hits are precision-1),
    then longer spans, then the label-set priority order, then earlier start.
    """

    strategy: MergeStrategy = MergeStrategy.RULE_PRIORITY

    def sort_key(self, span: EntitySpan, labels: LabelSet):
        source_rank = 0
        if self.strategy is MergeStrategy.RULE_PRIORITY:
            source_rank = 0 if span.source is SpanSource.RULE else 1
        elif self.strategy is MergeStrategy.MODEL_PRIORITY:
            source_rank = 0 if span.source is SpanSource.MODEL else 1
        priority = labels.priority_index(span.label) if span.label in labels else len(labels.priority)
        return (source_rank, -(span.end - span.start), priority, span.start, span.label)


def merge_spans(
    spans: list[EntitySpan], policy: MergePolicy, labels: LabelSet
) -> list[EntitySpan]:
    """Resolve an arbitrary overlap structure into a non-overlapping span set."""
    accepted: list[EntitySpan] = []
    taken: list[tuple[int, int]] = []
    for span in sorted(spans, key=lambda s: policy.sort_key(s, labels)):
        if any(span.start < end and start < span.end for start, end in taken):
            continue
        taken.append((span.start, span.end))
        accepted.append(span)
    return sorted(accepted)


def detect(
    doc: Document,
    labels: LabelSet,
    rules: tuple[CompiledRule, ...] = (),
    backend: BackendClient | None = None,
    policy: MergePolicy | None = None,
    splitter: SplitterPlugin | None = None,
) -> list[EntitySpan]:
    """Run the rule tier and (when a backend is configured) the model tier.

    Model tags come back per sentence, are repaired RELAXED, and carry the
    request's token offsets, so model spans land in document coordinates.
    """
    policy = policy or MergePolicy()
    spans = list(detect_rules(doc, rules)) if rules else []
    if backend is not None:
        sentences = split_sentences(doc.text, splitter, doc.language_code)
        if sentences:
            request = PredictRequest.build(doc, sentences)
            response = backend.predict(request)
            for sentence, tags in zip(sentences, response.sentences):
                spans.extend(
                    bio_to_spans(
                        sentence,
                        tags,
                        Repair.RELAXED,
                        labels,
                        source=SpanSource.MODEL,
                    )
                )
    return merge_spans(spans, policy, labels)


@dataclass(frozen=True, slots=True)
class Replacement:
    label: str
    source: str
    start: int
    end: int
    new_start: int
    new_end: int

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "source": self.source,
            "start": self.start,
            "end": self.end,
            "new_start": self.new_start,
            "new_end": self.new_end,
        }


def _check_rewritable(doc: Document, spans: list[EntitySpan]) -> list[EntitySpan]:
    ordered = sorted(spans)
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise OverlapError(f"spans {a.key} and {b.key} overlap")
    if ordered and (ordered[0].start < 0 or ordered[-1].end > len(doc.text)):
        raise OverlapError("span outside document bounds")
    return ordered


def _rewrite(
    doc: Document, spans: list[EntitySpan], replacement_for
) -> tuple[str, list[Replacement]]:
    ordered = _check_rewritable(doc, spans)
    parts: list[str] = []
    audit: list[Replacement] = []
    cursor = 0
    out_len = 0
    for span in ordered:
        gap = doc.text[cursor : span.start]
        parts.append(gap)
        out_len += len(gap)
        replacement = replacement_for(span)
        parts.append(replacement)
        audit.append(
            Replacement(
                span.label,
                span.source.value,
                span.start,
                span.end,
                out_len,
                out_len + len(replacement),
            )
        )
        out_len += len(replacement)
        cursor = span.end
    parts.append(doc.text[cursor:])
    return "".join(parts), audit


def mask(
    doc: Document, spans: list[EntitySpan], mask_format: str = DEFAULT_MASK_FORMAT
) -> tuple[str, list[Replacement]]:
    """Replace every span with its label placeholder; gaps stay byte-identical."""
    return _rewrite(doc, spans, lambda span: mask_format.format(label=span.label))


@dataclass
class SurrogateMap:
    """Document-scoped (label, normalized chunk) -> surrogate assignments.

    Re-identifying by design: it is written out only on explicit request.
    """

    doc_id: str
    date_shift_days: int
    entries: dict[tuple[str, str], str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "date_shift_days": self.date_shift_days,
            "entries": [
                {"label": label, "chunk": chunk, "surrogate": surrogate}
                for (label, chunk), surrogate in sorted(self.entries.items())
            ],
        }


def obfuscate(
    doc: Document,
    spans: list[EntitySpan],
    table,
    seed: int,
    date_order: str = "mdy",
    age_over_89_policy: str = "none",
    mask_format: str = DEFAULT_MASK_FORMAT,
) -> tuple[str, SurrogateMap, list[Replacement]]:
    """Replace spans with label-consistent surrogates, deterministically.

    DATE chunks in a shipped format shift by a per-document day offset
    (sign random, magnitude in [30, 365], derived from the seed); decade
    forms swap to another decade; unparseable dates get format-preserving
    randomization. AGE stays within its decade. Everything else draws from
    the fake chunk table, redrawing on collision with the original chunk;
    if a collision cannot be avoided the span is masked instead.
    """
    ordered = _check_rewritable(doc, spans)
    for span in ordered:
        if span.label not in ("DATE", "AGE") and not table.covers(span.label):
            raise MissingLabelError(f"fake chunk table has no templates for {span.label!r}")

    shift_rng = random.Random(f"{seed}:{doc.doc_id}:dateshift")
    shift_days = draw_date_shift(shift_rng)
    rng = random.Random(f"{seed}:{doc.doc_id}:surrogates")
    surrogate_map = SurrogateMap(doc.doc_id, shift_days)

    def surrogate_for(span: EntitySpan) -> str:
        chunk = doc.text[span.start : span.end]
        key = (span.label, normalize_chunk(chunk))
        if key in surrogate_map.entries:
            return surrogate_map.entries[key]
        if span.label == "DATE":
            if is_decade_text(chunk):
                value = replace_decade(chunk, rng)
            else:
                value = shift_date_text(chunk, shift_days, date_order)
                if value is None:
                    value = format_preserving_random(chunk, rng)
        elif span.label == "AGE":
            value = age_surrogate(chunk, rng, age_over_89_policy)
        else:
            value = table.draw(span.label, rng, original=chunk)
            attempts = 0
            while normalize_chunk(value) == key[1] and attempts < 100:
                value = table.draw(span.label, rng, original=chunk)
                attempts += 1
            if normalize_chunk(value) == key[1]:
                # Degenerate table: fall back to masking rather than leak.
                value = mask_format.format(label=span.label)
                return value
        surrogate_map.entries[key] = value
        return value

    text, audit = _rewrite(doc, ordered, surrogate_for)
    return text, surrogate_map, audit


@dataclass(frozen=True, slots=True)
class Leak:
    chunk: str
    start: int
    end: int


def leak_check(text: str, original_chunks: list[str]) -> list[Leak]:
    """Scan output text for surviving original chunks.

    Matching is case-insensitive and whitespace-normalized; chunks shorter
    than 4 characters are skipped (too many incidental collisions).
    """
    normalized_parts: list[str] = []
    index_map: list[int] = []
    last_was_space = False
    for i, ch in enumerate(text):
        if ch.isspace():
            if not last_was_space:
                normalized_parts.append(" ")
                index_map.append(i)
            last_was_space = True
        else:
            normalized_parts.append(ch.casefold())
            index_map.append(i)
            last_was_space = False
    normalized = "".join(normalized_parts)

    leaks: list[Leak] = []
    seen: set[tuple[str, int]] = set()
    for chunk in original_chunks:
        needle = normalize_chunk(chunk)
        if len(needle) < 4:
            continue
        at = normalized.find(needle)
        while at != -1:
            if (needle, at) not in seen:
                seen.add((needle, at))
                end_norm = at + len(needle) - 1
                leaks.append(Leak(chunk, index_map[at], index_map[end_norm] + 1))
            at = normalized.find(needle, at + 1)
    return sorted(leaks, key=lambda l: (l.start, l.chunk))
