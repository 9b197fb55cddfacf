"""Deterministic regex detection for the rule-tier PHI labels.

Patterns use an engine-portable regex subset (no backreferences, no
lookbehind). A pattern may mark the entity with a ``(?P<v>...)`` group when it
needs trigger context (e.g. the word "Fax" before a number); the emitted span
covers only that group. Named validators run as post-checks; a failing
validator drops the match entirely.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Callable

from .annotations import Document, EntitySpan, SpanSource
from .errors import ConfigError, PatternCompileError
from .labels import LabelSet

_BACKREF_RE = re.compile(r"\\[1-9]|\(\?P=")
_LOOKBEHIND_RE = re.compile(r"\(\?<[=!]")


def _validate_ssn(text: str) -> bool:
    digits = re.sub(r"\D", "", text)
    if len(digits) != 9:
        return False
    area, group, serial = digits[:3], digits[3:5], digits[5:]
    if area in ("000", "666") or area >= "900":
        return False
    return group != "00" and serial != "0000"


def _validate_ipv4(text: str) -> bool:
    parts = text.split(".")
    return len(parts) == 4 and all(p.isdigit() and int(p) <= 255 for p in parts)


def _validate_ipv6(text: str) -> bool:
    import ipaddress

    if text.count(":") < 2 or not any(c in "0123456789abcdefABCDEF" for c in text):
        return False
    try:
        ipaddress.IPv6Address(text)
        return True
    except ValueError:
        return False


_VIN_VALUES = {ch: v for ch, v in zip("ABCDEFGH", range(1, 9))}
_VIN_VALUES.update({ch: v for ch, v in zip("JKLMNPR", (1, 2, 3, 4, 5, 7, 9))})
_VIN_VALUES.update({ch: v for ch, v in zip("STUVWXYZ", range(2, 10))})
_VIN_VALUES.update({str(d): d for d in range(10)})
_VIN_WEIGHTS = (8, 7, 6, 5, 4, 3, 2, 10, 0, 9, 8, 7, 6, 5, 4, 3, 2)


def _validate_vin_checkdigit(text: str) -> bool:
    if len(text) != 17 or any(ch not in _VIN_VALUES and ch != "X" for ch in text):
        return False
    total = sum(_VIN_VALUES.get(ch, 0) * w for ch, w in zip(text, _VIN_WEIGHTS))
    remainder = total % 11
    expected = "X" if remainder == 10 else str(remainder)
    return text[8] == expected


def _validate_has_digit(text: str) -> bool:
    return any(ch.isdigit() for ch in text)


VALIDATORS: dict[str, Callable[[str], bool]] = {
    "ssn": _validate_ssn,
    "ipv4": _validate_ipv4,
    "ipv6": _validate_ipv6,
    "vin_checkdigit": _validate_vin_checkdigit,
    "has_digit": _validate_has_digit,
}


@dataclass(frozen=True, slots=True)
class RulePattern:
    label: str
    pattern: str
    validator: str | None = None
    priority: int = 0


@dataclass(frozen=True, slots=True)
class CompiledRule:
    label: str
    pattern: re.Pattern
    validator: Callable[[str], bool] | None
    priority: int

    def span_group(self) -> str | int:
        return "v" if "v" in self.pattern.groupindex else 0


# Shipped US-centric Safe Harbor defaults; override per language via rule files.
DEFAULT_EN_RULES: tuple[RulePattern, ...] = (
    RulePattern(
        "EMAIL",
        r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}\b",
        None,
        50,
    ),
    RulePattern("SSN", r"\b\d{3}-\d{2}-\d{4}\b", "ssn", 48),
    RulePattern("IP", r"\b(?:\d{1,3}\.){3}\d{1,3}\b", "ipv4", 45),
    RulePattern(
        "IP",
        r"\b(?:[0-9A-Fa-f]{1,4}:){7}[0-9A-Fa-f]{1,4}\b"
        r"|(?:[0-9A-Fa-f]{1,4}(?::[0-9A-Fa-f]{1,4})*)?::(?:[0-9A-Fa-f]{1,4}(?::[0-9A-Fa-f]{1,4})*)?",
        "ipv6",
        44,
    ),
    RulePattern(
        "URL",
        # Final character class keeps trailing sentence punctuation out.
        r"\b(?:https?|ftp)://[^\s<>()\"']*[^\s<>()\"'.,;:!?]"
        r"|\bwww\.[^\s<>()\"']*[^\s<>()\"'.,;:!?]",
        None,
        40,
    ),
    RulePattern("VIN", r"\b[A-HJ-NPR-Z0-9]{17}\b", None, 35),
    RulePattern("SSN", r"\b\d{9}\b", "ssn", 30),
    RulePattern(
        "PLATE",
        r"(?i:\b(?:licen[cs]e\s+)?plate(?:\s+(?:no|num|number)\.?)?\s*[:#]*\s*)"
        r"(?P<v>[A-Z0-9]{2,10}(?:[- ][A-Z0-9]{2,6})?)",
        "has_digit",
        26,
    ),
    RulePattern(
        "FAX",
        r"(?i:\bfax(?:\s+(?:no|num|number)\.?)?\s*[:#]*\s*)"
        r"(?P<v>\+?\(?\d[\d ().-]{5,}\d)",
        None,
        25,
    ),
    RulePattern(
        "ACCOUNT",
        r"(?i:\b(?:account|acct)(?:\s+(?:no|num|number)\.?)?\s*[:#]*\s*)"
        r"(?P<v>[A-Za-z]{0,3}[\d-]{4,}\d)",
        "has_digit",
        24,
    ),
    RulePattern(
        "DLN",
        r"(?i:\b(?:dln|dl|driver'?s?\s+licen[cs]e)(?:\s+(?:no|num|number)\.?)?\s*[:#]*\s*)"
        r"(?P<v>[A-Z0-9][A-Z0-9-]{3,})",
        "has_digit",
        23,
    ),
    RulePattern(
        "LICENSE",
        r"(?i:\blicen[cs]e(?:\s+(?:no|num|number)\.?)?\s*[:#]*\s*)"
        r"(?P<v>[A-Z0-9][A-Z0-9-]{3,})",
        "has_digit",
        22,
    ),
)


def compile_rules(
    rules: list[RulePattern] | tuple[RulePattern, ...],
    labels: LabelSet | None = None,
) -> tuple[CompiledRule, ...]:
    """Validate and compile a rule list; aggregates all failures into one error."""
    compiled: list[CompiledRule] = []
    failures: list[tuple[str, str, str]] = []
    for rule in rules:
        if labels is not None and rule.label not in labels.rule_labels:
            failures.append((rule.label, rule.pattern, "not a rule-tier label"))
            continue
        if _LOOKBEHIND_RE.search(rule.pattern):
            failures.append((rule.label, rule.pattern, "lookbehind is not portable"))
            continue
        if _BACKREF_RE.search(rule.pattern):
            failures.append((rule.label, rule.pattern, "backreferences are not portable"))
            continue
        validator = None
        if rule.validator is not None:
            validator = VALIDATORS.get(rule.validator)
            if validator is None:
                failures.append((rule.label, rule.pattern, f"unknown validator {rule.validator!r}"))
                continue
        try:
            pattern = re.compile(rule.pattern)
        except re.error as exc:
            failures.append((rule.label, rule.pattern, f"does not compile: {exc}"))
            continue
        compiled.append(CompiledRule(rule.label, pattern, validator, rule.priority))
    if failures:
        raise PatternCompileError(failures)
    return tuple(compiled)


def load_rule_file(path: str) -> list[RulePattern]:
    """Load {label, pattern, validator, priority} entries from a JSON rule file."""
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read rule file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"rule file {path!r} is not valid JSON: {exc}") from exc
    entries = payload["rules"] if isinstance(payload, dict) else payload
    rules = []
    for entry in entries:
        try:
            rules.append(
                RulePattern(
                    label=entry["label"],
                    pattern=entry["pattern"],
                    validator=entry.get("validator"),
                    priority=int(entry.get("priority", 0)),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"rule entry missing key {exc}: {entry!r}") from exc
    return rules


def detect_rules(
    doc: Document, rules: tuple[CompiledRule, ...]
) -> list[EntitySpan]:
    """Run all rules over a document and resolve overlaps deterministically.

    Longest match wins; ties break by higher priority, then earlier start,
    then label name. Returned spans are non-overlapping, sorted by start,
    with source RULE and confidence 1.0.
    """
    candidates: list[tuple[int, int, str, int]] = []
    for rule in rules:
        group = rule.span_group()
        for match in rule.pattern.finditer(doc.text):
            start, end = match.span(group)
            if start == end:
                continue
            if rule.validator is not None and not rule.validator(doc.text[start:end]):
                continue
            candidates.append((start, end, rule.label, rule.priority))

    candidates.sort(key=lambda c: (-(c[1] - c[0]), -c[3], c[0], c[2]))
    taken: list[tuple[int, int]] = []
    accepted: list[EntitySpan] = []
    for start, end, label, _priority in candidates:
        if any(start < t_end and t_start < end for t_start, t_end in taken):
            continue
        taken.append((start, end))
        accepted.append(
            EntitySpan(start=start, end=end, label=label, source=SpanSource.RULE)
        )
    return sorted(accepted)
