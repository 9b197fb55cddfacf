"""Strict chunk-level and IOB token-level scoring with macro/micro aggregation.

Chunk mode counts a prediction as correct only when a gold span with the
identical (doc_id, start, end, label) triple exists. Token mode scores each
tag value (B-L, I-L, O) as a multiclass problem. Display rounding is half-up
to three decimals; full precision is retained internally.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

from .annotations import EntitySpan
from .conll import ConllRecord
from .errors import AlignmentError, DocumentMismatchError, EmptyInputError
from .labels import LabelSet

logger = logging.getLogger(__name__)


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, F1 with 0 whenever a denominator is 0."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def f1_from_pr(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def round_half_up(value: float, places: int = 3) -> float:
    """Half-up display rounding (0.9305 -> 0.931), unlike bankers' round()."""
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def aggregate_macro(per_label_f1: Mapping[str, float]) -> float:
    """Arithmetic mean of per-label F1 values at full precision."""
    if not per_label_f1:
        raise EmptyInputError("cannot average an empty score map")
    total = sum((Decimal(str(v)) for v in per_label_f1.values()), Decimal(0))
    return float(total / len(per_label_f1))


@dataclass(frozen=True, slots=True)
class LabelCounts:
    tp: int
    fp: int
    fn: int

    @property
    def support(self) -> int:
        return self.tp + self.fn

    @property
    def metrics(self) -> tuple[float, float, float]:
        return prf(self.tp, self.fp, self.fn)


@dataclass(frozen=True)
class ChunkEvalReport:
    per_label: dict[str, LabelCounts]
    macro_avg_f1: float
    micro_precision: float
    micro_recall: float
    micro_avg_f1: float
    lenient: bool = False

    def label_f1(self, label: str) -> float:
        return self.per_label[label].metrics[2]


@dataclass(frozen=True, slots=True)
class TagMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class TokenEvalReport:
    per_tag: dict[str, TagMetrics]
    macro_avg: tuple[float, float, float]
    weighted_avg: tuple[float, float, float]
    accuracy: float
    total_tokens: int


def _dedupe(spans: Iterable[EntitySpan], doc_id: str, side: str) -> set[tuple[int, int, str]]:
    keys: set[tuple[int, int, str]] = set()
    for span in spans:
        if span.key in keys:
            logger.warning(
                "duplicate %s span %s in document %s collapsed", side, span.key, doc_id
            )
        keys.add(span.key)
    return keys


def evaluate_chunks(
    gold: Mapping[str, Sequence[EntitySpan]],
    pred: Mapping[str, Sequence[EntitySpan]],
    labels: LabelSet | None = None,
    lenient_overlap: bool = False,
) -> ChunkEvalReport:
    """Strict span evaluation: both the chunk boundaries and the label must match.

    ``gold`` and ``pred`` map doc_id to spans. Documents missing from ``pred``
    count as all-miss; predictions for unknown documents raise
    DocumentMismatchError. ``lenient_overlap`` switches to a diagnostics-only
    mode where any same-label character overlap matches; its numbers must
    never be confused with the strict headline metrics, so the report carries
    a ``lenient`` flag.
    """
    unknown = set(pred) - set(gold)
    if unknown:
        raise DocumentMismatchError(
            f"predictions reference unknown documents: {sorted(unknown)}"
        )

    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    fn: dict[str, int] = {}

    def bump(counter: dict[str, int], label: str) -> None:
        counter[label] = counter.get(label, 0) + 1

    for doc_id in gold:
        gold_keys = _dedupe(gold.get(doc_id, ()), doc_id, "gold")
        pred_keys = _dedupe(pred.get(doc_id, ()), doc_id, "predicted")
        if lenient_overlap:
            matched_gold: set[tuple[int, int, str]] = set()
            for pk in sorted(pred_keys):
                hit = next(
                    (
                        gk
                        for gk in sorted(gold_keys - matched_gold)
                        if gk[2] == pk[2] and pk[0] < gk[1] and gk[0] < pk[1]
                    ),
                    None,
                )
                if hit is not None:
                    matched_gold.add(hit)
                    bump(tp, pk[2])
                else:
                    bump(fp, pk[2])
            for gk in gold_keys - matched_gold:
                bump(fn, gk[2])
        else:
            for key in gold_keys & pred_keys:
                bump(tp, key[2])
            for key in pred_keys - gold_keys:
                bump(fp, key[2])
            for key in gold_keys - pred_keys:
                bump(fn, key[2])

    evaluated = sorted(set(tp) | set(fp) | set(fn))
    if labels is not None:
        evaluated = sorted(evaluated, key=lambda l: labels.priority_index(l) if l in labels else 999)
    per_label = {
        label: LabelCounts(tp.get(label, 0), fp.get(label, 0), fn.get(label, 0))
        for label in evaluated
    }
    macro = (
        aggregate_macro({label: counts.metrics[2] for label, counts in per_label.items()})
        if per_label
        else 0.0
    )
    pooled = LabelCounts(sum(tp.values()), sum(fp.values()), sum(fn.values()))
    micro_p, micro_r, micro_f1 = pooled.metrics
    return ChunkEvalReport(per_label, macro, micro_p, micro_r, micro_f1, lenient_overlap)


def evaluate_tokens(
    gold: Sequence[ConllRecord], pred: Sequence[ConllRecord]
) -> TokenEvalReport:
    """Multiclass per-tag scoring over aligned token sequences, O included."""
    gold_sentences = [s for record in gold for s in record.sentences]
    pred_sentences = [s for record in pred for s in record.sentences]
    if len(gold_sentences) != len(pred_sentences):
        raise AlignmentError(
            f"{len(gold_sentences)} gold sentences but {len(pred_sentences)} predicted"
        )
    gold_tags: list[str] = []
    pred_tags: list[str] = []
    for index, (gs, ps) in enumerate(zip(gold_sentences, pred_sentences)):
        if len(gs.tags) != len(ps.tags):
            raise AlignmentError(
                f"sentence {index}: {len(gs.tags)} gold tokens but {len(ps.tags)} predicted"
            )
        gold_tags.extend(gs.tags)
        pred_tags.extend(ps.tags)

    tags = sorted(set(gold_tags) | set(pred_tags))
    per_tag: dict[str, TagMetrics] = {}
    for tag in tags:
        tp = sum(1 for g, p in zip(gold_tags, pred_tags) if g == tag and p == tag)
        fp = sum(1 for g, p in zip(gold_tags, pred_tags) if g != tag and p == tag)
        fn = sum(1 for g, p in zip(gold_tags, pred_tags) if g == tag and p != tag)
        precision, recall, f1 = prf(tp, fp, fn)
        per_tag[tag] = TagMetrics(precision, recall, f1, tp + fn)

    count = len(per_tag)
    macro = (
        tuple(sum(getattr(m, attr) for m in per_tag.values()) / count for attr in ("precision", "recall", "f1"))
        if count
        else (0.0, 0.0, 0.0)
    )
    total = len(gold_tags)
    if total:
        weighted = tuple(
            sum(getattr(m, attr) * m.support for m in per_tag.values()) / total
            for attr in ("precision", "recall", "f1")
        )
        accuracy = sum(1 for g, p in zip(gold_tags, pred_tags) if g == p) / total
    else:
        weighted = (0.0, 0.0, 0.0)
        accuracy = 0.0
    return TokenEvalReport(per_tag, macro, weighted, accuracy, total)


def chunk_report_to_dict(report: ChunkEvalReport) -> dict:
    return {
        "mode": "lenient-overlap" if report.lenient else "strict",
        "per_label": {
            label: {
                "tp": counts.tp,
                "fp": counts.fp,
                "fn": counts.fn,
                "precision": counts.metrics[0],
                "recall": counts.metrics[1],
                "f1": counts.metrics[2],
                "support": counts.support,
            }
            for label, counts in report.per_label.items()
        },
        "macro_avg_f1": report.macro_avg_f1,
        "micro_precision": report.micro_precision,
        "micro_recall": report.micro_recall,
        "micro_avg_f1": report.micro_avg_f1,
    }


def token_report_to_dict(report: TokenEvalReport) -> dict:
    return {
        "per_tag": {
            tag: {
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
            }
            for tag, m in report.per_tag.items()
        },
        "macro_avg": dict(zip(("precision", "recall", "f1"), report.macro_avg)),
        "weighted_avg": dict(zip(("precision", "recall", "f1"), report.weighted_avg)),
        "accuracy": report.accuracy,
        "total_tokens": report.total_tokens,
    }


def report_to_json(report: ChunkEvalReport | TokenEvalReport) -> str:
    payload = (
        chunk_report_to_dict(report)
        if isinstance(report, ChunkEvalReport)
        else token_report_to_dict(report)
    )
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _fmt(x: float) -> str:
    return f"{round_half_up(x):.3f}"


def chunk_report_to_table(report: ChunkEvalReport) -> str:
    width = max([len(l) for l in report.per_label] + [len("micro avg")]) + 2
    lines = [f"{'label':<{width}}{'P':>7}{'R':>7}{'F1':>7}{'support':>9}"]
    for label, counts in report.per_label.items():
        p, r, f1 = counts.metrics
        lines.append(
            f"{label:<{width}}{_fmt(p):>7}{_fmt(r):>7}{_fmt(f1):>7}{counts.support:>9}"
        )
    total_support = sum(c.support for c in report.per_label.values())
    lines.append("")
    lines.append(f"{'macro avg':<{width}}{'':>7}{'':>7}{_fmt(report.macro_avg_f1):>7}{total_support:>9}")
    lines.append(
        f"{'micro avg':<{width}}{_fmt(report.micro_precision):>7}"
        f"{_fmt(report.micro_recall):>7}{_fmt(report.micro_avg_f1):>7}{total_support:>9}"
    )
    if report.lenient:
        lines.append("")
        lines.append("mode: lenient-overlap (diagnostics only, NOT the strict metric)")
    return "\n".join(lines) + "\n"


def token_report_to_table(report: TokenEvalReport) -> str:
    width = max([len(t) for t in report.per_tag] + [len("weighted avg")]) + 2
    lines = [f"{'tag':<{width}}{'P':>7}{'R':>7}{'F1':>7}{'support':>9}"]
    for tag, m in report.per_tag.items():
        lines.append(
            f"{tag:<{width}}{_fmt(m.precision):>7}{_fmt(m.recall):>7}{_fmt(m.f1):>7}{m.support:>9}"
        )
    lines.append("")
    for name, triple in (("macro avg", report.macro_avg), ("weighted avg", report.weighted_avg)):
        p, r, f1 = triple
        lines.append(f"{name:<{width}}{_fmt(p):>7}{_fmt(r):>7}{_fmt(f1):>7}{report.total_tokens:>9}")
    lines.append(f"{'accuracy':<{width}}{'':>7}{'':>7}{_fmt(report.accuracy):>7}{report.total_tokens:>9}")
    return "\n".join(lines) + "\n"


def chunk_report_to_csv(report: ChunkEvalReport) -> str:
    """CSV rows (label, precision, recall, f1, support) plus aggregate rows."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["label", "precision", "recall", "f1", "support"])
    for label, counts in report.per_label.items():
        p, r, f1 = counts.metrics
        writer.writerow([label, _fmt(p), _fmt(r), _fmt(f1), counts.support])
    total_support = sum(c.support for c in report.per_label.values())
    writer.writerow(["macro avg", "", "", _fmt(report.macro_avg_f1), total_support])
    writer.writerow(
        [
            "micro avg",
            _fmt(report.micro_precision),
            _fmt(report.micro_recall),
            _fmt(report.micro_avg_f1),
            total_support,
        ]
    )
    return buffer.getvalue()
