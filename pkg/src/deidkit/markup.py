"""Extraction-prompt construction and parsing of marker-annotated LLM output.

The markup dialect wraps each entity as ``BEGINER_<LABEL> chunk ENDNER``.
Parsing is total: any input yields a result, with quality problems reported
as diagnostics rather than exceptions. Returned spans always reference the
ORIGINAL document's offsets; when the model edited text outside or inside
chunks, an anchor-based monotonic alignment maps chunks back into the
original, and chunks that cannot be located confidently are dropped.
"""

from __future__ import annotations

import difflib
import enum
import re
from bisect import bisect_left
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

from .annotations import Document, EntitySpan, SpanSource
from .errors import EmptyInputError
from .labels import LabelSet

BEGIN_PREFIX = "BEGINER_"
END_MARKER = "ENDNER"

# Chunks matching the original at below this local similarity are dropped.
MIN_CHUNK_SIMILARITY = 0.7

_ANCHOR_N = 8

_BEGIN_RE = re.compile(r"(?<![A-Za-z0-9_])BEGINER_(?P<label>[A-Z][A-Z_-]*)?")
_END_RE = re.compile(r"(?<![A-Za-z0-9_])ENDNER(?![A-Za-z0-9_])")

ENTITY_DEFINITIONS: dict[str, str] = {
    "AGE": (
        'Identifies the age number or age-related information. Example: In '
        '"88 years old," 88 would be marked as AGE. In "in his 50\'s,"50\'s '
        "would be marked as AGE."
    ),
    "CITY": "Identifies the name of a city.",
    "COUNTRY": "Identifies the name of a country.",
    "DATE": (
        'Identifies specific dates or years. Example: In "He was admitted on '
        '03/29/2089," 03/29/2089 would be marked as DATE. In "His surgery was '
        'in the 1980\'s," 1980\'s would be marked as DATE. In "His record was '
        'marked on 2089-08-24" 2089-08-24 would be marked at DATE.'
    ),
    "DEVICE": (
        "Identifies serial numbers, item code or product code of a medical "
        'device mentioned. Example: In "The AA 737 pacemaker was implanted," '
        "AA 737 would be marked as DEVICE."
    ),
    "DOCTOR": (
        "Identifies the name of a doctor or healthcare professional. Only the "
        'name should be marked, not the title such as "Dr.", "M.D.".'
    ),
    "HOSPITAL": "Identifies the name of a hospital or nursing home.",
    "IDNUM": "Identifies identification numbers such as medical record or patient numbers.",
    "LOCATION-OTHER": "Identifies specific locations related to healthcare, excluding city or country.",
    "LOCATION": "Identifies specific locations related to healthcare, excluding city or country.",
    "MEDICAL RECORD": "Identifies medical record numbers or similar identifiers.",
    "ORGANIZATION": "Identifies names of organizations or institutions.",
    "PATIENT": (
        "Identifies the patient's name. Only the name should be marked, not "
        'titles like "Mr." or "Mrs."'
    ),
    "PHONE": "Identifies phone numbers, including fax numbers.",
    "PROFESSION": "Identifies professions or job titles.",
    "STATE": "Identifies the name of a state or region.",
    "STREET": "Identifies street addresses.",
    "USERNAME": "Identifies usernames or account IDs.",
    "ZIP": "Identifies postal or zip codes.",
    "EMAIL": "Identifies email addresses.",
    "FAX": "Identifies fax numbers.",
    "SSN": "Identifies social security numbers.",
    "ID": "Identifies identification numbers.",
    "SEX": "Identifies sex or gender mentions.",
    "FAMILY": "Identifies names of the patient's family members.",
    "ACCOUNT": "Identifies account numbers.",
    "DLN": "Identifies driver's license numbers.",
    "IP": "Identifies IP addresses.",
    "LICENSE": "Identifies certificate or license numbers.",
    "PLATE": "Identifies vehicle license plate numbers.",
    "URL": "Identifies web addresses.",
    "VIN": "Identifies vehicle identification numbers.",
}

EXAMPLE_ORIGINAL = (
    "Mrs. Linda Martinez, a 45-year-old architect, having MR#: 2775283 for an "
    "evaluation on 2023-05-10. Her insulin pump model ZX900 was assessed by "
    "Dr. Michael Brown, M.D. The patient's condition has improved since the "
    "1990s, but she mentioned feeling unwell for past 6 months. MF381/1183 "
    "was referenced during her visit, which lasted approximately 5 hours and "
    "concluded at 10:05:03. She was discharged on 20/10/2023."
)

EXAMPLE_MARKED = (
    "Mrs. BEGINER_PATIENT Linda Martinez ENDNER, a BEGINER_AGE 45 ENDNER "
    "year-old BEGINER_PROFESSION architect ENDNER, having MR#: "
    "BEGINER_MEDICALRECORD 2775283 ENDNER for an evaluation on BEGINER_DATE "
    "2023-05-10 ENDNER. Her insulin pump model BEGINER_DEVICE ZX900 ENDNER "
    "was assessed by Dr. BEGINER_DOCTOR Michael Brown ENDNER, M.D. The "
    "patient's condition has improved since the BEGINER_DATE 1990s ENDNER, "
    "but she mentioned feeling unwell for past 6 months. BEGINER_IDNUM "
    "MF381/1183 ENDNER was referenced during her visit, which lasted "
    "approximately 5 hours and concluded at 10:05:03. She was discharged on "
    "BEGINER_DATE 20/10/2023 ENDNER."
)

_PROMPT_HEAD = """You are tasked with extracting Protected Health Information (PHI) from clinical notes. Your job is to identify and mark specific entities within the text. Here are the entities you need to look for:

<entities>
"""

_PROMPT_TAIL = f"""
</entities>

I will provide you with a clinical note. Your task is to process this note and mark all instances of the PHI entities listed above.

Here is the clinical note:

{{clinical_note}}

Instructions for marking PHI entities:
* Carefully read through the entire clinical note.
*  Identify any text that matches one of the PHI entity types listed above.
* For each identified PHI entity, mark the beginning and end of the relevant text chunk using the following format:
BEGINER_ LABEL CHUNK ENDNER where ENTITY LABEL is one of the entity types from the list, and CHUNK is the actual text containing the PHI.
* While marking, DO NOT EDIT OR CHANGE the original clinical text, only put marks described above.

Here are few examples of correct markup:

Original text:
{EXAMPLE_ORIGINAL}

Marked text:
{EXAMPLE_MARKED}

Important notes:
* Be sure to process the entire clinical note and mark all instances of PHI entities.
* If a chunk of text could belong to multiple entity types, choose the most specific or appropriate one.
* Do not mark information that is not part of the specified PHI entity types.
* Preserve the original text exactly as it appears, including any spelling errors or formatting.
* Label the data, ensuring that professional titles or suffixes such as 'M.D.', 'Ph.D.', or similar are not removed. These titles must be preserved exactly as they appear in the text, without alteration or omission and should NEVER be inside the label.
* Apostrophe 's' ('s) should not be included within the label when associated with Names. Only the person's name should be inside the label, and the apostrophe 's' should remain outside the marked text. However, apostrophe 's' is allowed within the DATE label when referring to a decade (e.g., 80's).
* Mark only specific calendar dates as DATE. Do not mark relative time expressions like "6 months," "1 year ago," "5 weeks," "5 wks," "yesterday," "today," "days," or similar units of time (months, years, weeks), as they do not represent actual dates.
* Mark only actual dates as DATE. Do not mark time-related expressions such as "10:05:03," "10am," or durations like "5 hours" as DATE, since they refer to times or durations rather than specific calendar dates.
* Fax numbers should be treated as PHONE entities and marked the same way as phone numbers.
Please process the provided clinical note and return it with all PHI entities appropriately marked."""


def build_prompt(note: Document, labels: LabelSet | Sequence[str]) -> str:
    """Render the extraction prompt with definitions restricted to ``labels``.

    A LabelSet contributes its model tier (the tier an LLM stands in for);
    a plain sequence is used as given. The note is interpolated verbatim.
    """
    if isinstance(labels, LabelSet):
        names: Sequence[str] = labels.model_labels
    else:
        names = tuple(labels)
    if not names:
        raise EmptyInputError("cannot build a prompt for an empty label set")
    lines = []
    for name in names:
        definition = ENTITY_DEFINITIONS.get(name, f"Identifies {name.lower()} mentions.")
        lines.append(f"{LabelSet.display_name(name)} ({definition})")
    return (
        _PROMPT_HEAD
        + "\n".join(lines)
        + _PROMPT_TAIL.replace("{clinical_note}", note.text)
    )


class DiagnosticKind(enum.Enum):
    UNKNOWN_LABEL = "UNKNOWN_LABEL"
    UNBALANCED = "UNBALANCED"
    TEXT_EDITED = "TEXT_EDITED"
    EXTRA_TOKENS = "EXTRA_TOKENS"


@dataclass(frozen=True, slots=True)
class Diagnostic:
    kind: DiagnosticKind
    location: int
    detail: str


@dataclass(frozen=True, slots=True)
class MarkupParse:
    spans: tuple[EntitySpan, ...]
    diagnostics: tuple[Diagnostic, ...]
    alignment_score: float


def _anchor_blocks(a: str, b: str) -> list[tuple[int, int, int]]:
    """Monotonic matching blocks between two strings.

    Unique n-gram anchors pin correspondence points (longest increasing
    subsequence keeps them monotonic); the gaps between consecutive anchors
    are refined with difflib. Blocks are (a_pos, b_pos, size), sorted.
    """
    if a == b:
        return [(0, 0, len(a))] if a else []
    n = _ANCHOR_N
    anchors: list[tuple[int, int]] = []
    if len(a) >= n and len(b) >= n:
        count_a = Counter(a[i : i + n] for i in range(len(a) - n + 1))
        pos_b: dict[str, list[int]] = defaultdict(list)
        for j in range(len(b) - n + 1):
            pos_b[b[j : j + n]].append(j)
        for i in range(len(a) - n + 1):
            gram = a[i : i + n]
            if count_a[gram] == 1 and len(pos_b.get(gram, ())) == 1:
                anchors.append((i, pos_b[gram][0]))

    # Longest strictly increasing subsequence over the b-positions.
    tails: list[int] = []
    tail_idx: list[int] = []
    prev = [-1] * len(anchors)
    for idx, (_, j) in enumerate(anchors):
        k = bisect_left(tails, j)
        if k == len(tails):
            tails.append(j)
            tail_idx.append(idx)
        else:
            tails[k] = j
            tail_idx[k] = idx
        prev[idx] = tail_idx[k - 1] if k > 0 else -1
    chain: list[tuple[int, int]] = []
    cursor = tail_idx[-1] if tail_idx else -1
    while cursor != -1:
        chain.append(anchors[cursor])
        cursor = prev[cursor]
    chain.reverse()

    blocks: list[tuple[int, int, int]] = []
    a_done = b_done = 0
    for ai, bi in chain + [(len(a), len(b))]:
        if ai < a_done or bi < b_done:
            continue
        if ai > a_done or bi > b_done:
            matcher = difflib.SequenceMatcher(
                None, a[a_done:ai], b[b_done:bi], autojunk=False
            )
            for ga, gb, size in matcher.get_matching_blocks():
                if size:
                    blocks.append((a_done + ga, b_done + gb, size))
        if ai < len(a):
            blocks.append((ai, bi, n))
            a_done, b_done = ai + n, bi + n

    # Merge adjacent or overlapping same-diagonal blocks.
    merged: list[list[int]] = []
    for ai, bi, size in sorted(blocks):
        if merged and bi - ai == merged[-1][1] - merged[-1][0] and ai <= merged[-1][0] + merged[-1][2]:
            merged[-1][2] = max(merged[-1][2], ai + size - merged[-1][0])
        else:
            merged.append([ai, bi, size])
    return [tuple(m) for m in merged]


def _map_interval(
    blocks: list[tuple[int, int, int]], cs: int, ce: int
) -> tuple[int, int, int] | None:
    """Map cleaned-text interval [cs, ce) into the original through blocks.

    Returns (o_start, o_end, matched_chars) or None when nothing overlaps.
    """
    o_start = o_end = None
    matched = 0
    for ai, bi, size in blocks:
        lo, hi = max(cs, ai), min(ce, ai + size)
        if lo >= hi:
            continue
        matched += hi - lo
        if o_start is None:
            o_start = bi + (lo - ai)
        o_end = bi + (hi - ai)
    if o_start is None:
        return None
    return o_start, o_end, matched


@dataclass
class _RawChunk:
    label: str | None
    cstart: int
    cend: int
    marker_pos: int


def parse_markup(original: Document, marked: str, labels: LabelSet) -> MarkupParse:
    """Parse marker-annotated text back into spans on the original document.

    Never raises: unknown labels, unbalanced markers, and model edits are
    reported in ``diagnostics``. ``alignment_score`` is the matched-character
    fraction between the marker-stripped text and the original (1.0 when they
    are identical).
    """
    events: list[tuple[int, int, str, str | None]] = []
    begin_extents: list[tuple[int, int]] = []
    for m in _BEGIN_RE.finditer(marked):
        events.append((m.start(), m.end(), "begin", m.group("label")))
        begin_extents.append((m.start(), m.end()))
    for m in _END_RE.finditer(marked):
        if any(s <= m.start() < e for s, e in begin_extents):
            continue
        events.append((m.start(), m.end(), "end", None))
    events.sort()

    diagnostics: list[Diagnostic] = []
    pieces: list[str] = []
    clen = 0
    swallow_space = False
    chunks: list[_RawChunk] = []
    open_chunk: _RawChunk | None = None

    def append_text(segment: str, before_end: bool) -> None:
        nonlocal clen, swallow_space
        if swallow_space and segment.startswith(" "):
            segment = segment[1:]
        swallow_space = False
        if before_end and segment.endswith(" "):
            segment = segment[:-1]
        pieces.append(segment)
        clen += len(segment)

    def close_chunk(at: int) -> None:
        nonlocal open_chunk
        if open_chunk is not None:
            open_chunk.cend = at
            chunks.append(open_chunk)
        open_chunk = None

    pos = 0
    for start, end, kind, raw_label in events:
        append_text(marked[pos:start], before_end=(kind == "end"))
        if kind == "begin":
            if open_chunk is not None:
                diagnostics.append(
                    Diagnostic(
                        DiagnosticKind.UNBALANCED,
                        start,
                        "begin marker inside an open chunk; previous chunk closed here",
                    )
                )
                close_chunk(clen)
            if raw_label is None:
                diagnostics.append(
                    Diagnostic(DiagnosticKind.UNBALANCED, start, "begin marker without a label")
                )
            else:
                canonical = labels.try_resolve(raw_label)
                if canonical is None:
                    diagnostics.append(
                        Diagnostic(DiagnosticKind.UNKNOWN_LABEL, start, raw_label)
                    )
                open_chunk = _RawChunk(canonical, clen, clen, start)
            swallow_space = True
        else:
            if open_chunk is None:
                diagnostics.append(
                    Diagnostic(DiagnosticKind.UNBALANCED, start, "end marker without a begin")
                )
            else:
                close_chunk(clen)
        pos = end
    append_text(marked[pos:], before_end=False)
    cleaned = "".join(pieces)

    if open_chunk is not None:
        terminator = re.search(r"[.!?؟]", cleaned[open_chunk.cstart :])
        at = open_chunk.cstart + terminator.start() if terminator else len(cleaned)
        diagnostics.append(
            Diagnostic(
                DiagnosticKind.UNBALANCED,
                open_chunk.marker_pos,
                "unclosed begin marker; chunk closed at sentence end",
            )
        )
        close_chunk(at)

    # Trim the chunk boundaries to non-whitespace content.
    trimmed: list[_RawChunk] = []
    for chunk in chunks:
        text = cleaned[chunk.cstart : chunk.cend]
        lead = len(text) - len(text.lstrip())
        trail = len(text) - len(text.rstrip())
        chunk.cstart += lead
        chunk.cend -= trail
        if chunk.cstart >= chunk.cend:
            if chunk.label is not None:
                diagnostics.append(
                    Diagnostic(DiagnosticKind.UNBALANCED, chunk.marker_pos, "empty chunk")
                )
            continue
        if chunk.label is None:
            continue  # UNKNOWN_LABEL already recorded; text stays in cleaned
        trimmed.append(chunk)

    identical = cleaned == original.text
    if identical:
        blocks = [(0, 0, len(cleaned))] if cleaned else []
        score = 1.0
    else:
        blocks = _anchor_blocks(cleaned, original.text)
        total_matched = sum(size for _, _, size in blocks)
        denom = len(cleaned) + len(original.text)
        score = (2.0 * total_matched / denom) if denom else 1.0
        diagnostics.append(
            Diagnostic(
                DiagnosticKind.TEXT_EDITED,
                0,
                "marker-stripped text differs from the original document",
            )
        )

    spans: list[EntitySpan] = []
    for chunk in trimmed:
        mapped = _map_interval(blocks, chunk.cstart, chunk.cend)
        chunk_text = cleaned[chunk.cstart : chunk.cend]
        length = chunk.cend - chunk.cstart
        if mapped is None:
            diagnostics.append(
                Diagnostic(
                    DiagnosticKind.TEXT_EDITED,
                    chunk.marker_pos,
                    f"chunk {chunk_text!r} could not be located in the original",
                )
            )
            continue
        o_start, o_end, matched_chars = mapped
        while o_start < o_end and original.text[o_start].isspace():
            o_start += 1
        while o_end > o_start and original.text[o_end - 1].isspace():
            o_end -= 1
        similarity = matched_chars / length
        if similarity < MIN_CHUNK_SIMILARITY:
            diagnostics.append(
                Diagnostic(
                    DiagnosticKind.TEXT_EDITED,
                    chunk.marker_pos,
                    f"chunk {chunk_text!r} matched only {similarity:.2f} of the original; dropped",
                )
            )
            continue
        if o_start >= o_end:
            continue
        exact = matched_chars == length and o_end - o_start == length
        if not exact:
            diagnostics.append(
                Diagnostic(
                    DiagnosticKind.EXTRA_TOKENS,
                    chunk.marker_pos,
                    f"chunk {chunk_text!r} contains text not in the original; "
                    "span trimmed to the aligned region",
                )
            )
        spans.append(
            EntitySpan(
                start=o_start,
                end=o_end,
                label=chunk.label,
                source=SpanSource.LLM,
                confidence=1.0 if exact else round(similarity, 4),
            )
        )

    spans.sort()
    accepted: list[EntitySpan] = []
    for span in spans:
        if accepted and span.start < accepted[-1].end:
            diagnostics.append(
                Diagnostic(
                    DiagnosticKind.UNBALANCED,
                    0,
                    f"span [{span.start}, {span.end}) overlaps a previous span after "
                    "alignment; dropped",
                )
            )
            continue
        accepted.append(span)

    return MarkupParse(tuple(accepted), tuple(diagnostics), score)
