"""Label registries: per-language sets of PHI labels split into rule and model tiers.

Label names are uppercase ASCII words, optionally joined by a space, hyphen,
or underscore ("LOCATION-OTHER", "MEDICAL RECORD"). Because tags and markup
markers cannot carry spaces, every label also has a *tag form* with spaces
removed ("MEDICALRECORD") and an optional *display form* used in extraction
prompts; :meth:`LabelSet.resolve` accepts any of these spellings.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from .errors import ConfigError, UnknownLabelError

_LABEL_RE = re.compile(r"^[A-Z]+(?:[ _-][A-Z]+)*$")

# Prompt/marker spellings that differ from the canonical label name.
DISPLAY_OVERRIDES = {
    "LOCATION-OTHER": "LOCATION",
}


def normalize_label(name: str) -> str:
    """Collapse a label spelling for lenient lookup (drop space/underscore/hyphen)."""
    return re.sub(r"[ _-]", "", name.upper())


@dataclass(frozen=True)
class LabelSet:
    """Ordered registry of entity labels for one language.

    ``rule_labels`` are detected by regex rules, ``model_labels`` by the
    token-classification backend. ``priority`` orders all labels for overlap
    tie-breaking and defaults to rule labels followed by model labels.
    """

    language_code: str
    rule_labels: tuple[str, ...]
    model_labels: tuple[str, ...]
    priority: tuple[str, ...] = ()
    _aliases: dict[str, str] = field(
        default_factory=dict, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        object.__setattr__(self, "rule_labels", tuple(self.rule_labels))
        object.__setattr__(self, "model_labels", tuple(self.model_labels))
        if not self.priority:
            object.__setattr__(self, "priority", self.rule_labels + self.model_labels)
        else:
            object.__setattr__(self, "priority", tuple(self.priority))

        all_labels = self.rule_labels + self.model_labels
        if not all_labels:
            raise ConfigError("label set must contain at least one label")
        for name in all_labels:
            if not _LABEL_RE.match(name):
                raise ConfigError(f"invalid label name: {name!r}")
        overlap = set(self.rule_labels) & set(self.model_labels)
        if overlap:
            raise ConfigError(f"labels in both tiers: {sorted(overlap)}")
        if len(set(all_labels)) != len(all_labels):
            raise ConfigError("duplicate label names")
        if sorted(self.priority) != sorted(all_labels):
            raise ConfigError("priority must be a permutation of all labels")

        aliases: dict[str, str] = {}
        for name in all_labels:
            for key in (name, normalize_label(name), normalize_label(self.display_name(name))):
                existing = aliases.get(key)
                if existing is not None and existing != name:
                    raise ConfigError(f"ambiguous label spellings: {existing!r} / {name!r}")
                aliases[key] = name
        object.__setattr__(self, "_aliases", aliases)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.rule_labels + self.model_labels

    def __contains__(self, name: object) -> bool:
        return name in self._aliases if isinstance(name, str) else False

    def __iter__(self):
        return iter(self.labels)

    def try_resolve(self, name: str) -> str | None:
        """Canonical label for any accepted spelling, or None."""
        hit = self._aliases.get(name)
        if hit is None:
            hit = self._aliases.get(normalize_label(name))
        return hit

    def resolve(self, name: str) -> str:
        hit = self.try_resolve(name)
        if hit is None:
            raise UnknownLabelError(f"unknown label: {name!r}")
        return hit

    def priority_index(self, label: str) -> int:
        return self.priority.index(self.resolve(label))

    @staticmethod
    def tag_name(label: str) -> str:
        """Label spelling used inside IOB2 tags (no spaces)."""
        return label.replace(" ", "")

    @staticmethod
    def display_name(label: str) -> str:
        """Label spelling used in extraction prompts and markup markers."""
        return DISPLAY_OVERRIDES.get(label, label.replace(" ", ""))

    def to_dict(self) -> dict:
        return {
            "language_code": self.language_code,
            "rule_labels": list(self.rule_labels),
            "model_labels": list(self.model_labels),
            "priority": list(self.priority),
        }


def label_set_hash(labels: LabelSet) -> str:
    """Hash the model-tier label list for engine/backend agreement checks.

    sha256 over the sorted canonical model label names joined by newlines,
    lowercase hex. Documented in docs/protocol.md; both sides must match.
    """
    payload = "\n".join(sorted(labels.model_labels)).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


_EN_RULE = ("ACCOUNT", "DLN", "EMAIL", "FAX", "IP", "LICENSE", "PLATE", "SSN", "URL", "VIN")

_EN_MODEL = (
    "AGE", "CITY", "COUNTRY", "DATE", "DEVICE", "DOCTOR", "HOSPITAL", "IDNUM",
    "LOCATION-OTHER", "MEDICAL RECORD", "ORGANIZATION", "PATIENT", "PHONE",
    "PROFESSION", "STATE", "STREET", "USERNAME", "ZIP",
)

# 13-label core shared by the German, Italian, French, and Arabic sets.
_CORE_13 = (
    "AGE", "CITY", "COUNTRY", "DATE", "DOCTOR", "HOSPITAL", "IDNUM",
    "ORGANIZATION", "PATIENT", "PHONE", "PROFESSION", "STREET", "ZIP",
)

BUILTIN_LABEL_SETS: dict[str, LabelSet] = {
    "en": LabelSet("en", _EN_RULE, _EN_MODEL),
    "de": LabelSet("de", (), _CORE_13),
    "it": LabelSet("it", (), _CORE_13),
    "fr": LabelSet("fr", (), _CORE_13),
    "ar": LabelSet("ar", (), _CORE_13),
    "tr": LabelSet(
        "tr",
        (),
        (
            "AGE", "CITY", "COUNTRY", "DATE", "DOCTOR", "FAMILY", "HOSPITAL",
            "IDNUM", "LOCATION", "MEDICAL RECORD", "ORGANIZATION", "PATIENT",
            "PHONE", "PROFESSION", "STREET", "ZIP",
        ),
    ),
    "es": LabelSet(
        "es",
        (),
        (
            "AGE", "CITY", "COUNTRY", "DATE", "DOCTOR", "EMAIL", "HOSPITAL",
            "ID", "MEDICAL RECORD", "ORGANIZATION", "PATIENT", "PHONE",
            "PROFESSION", "SEX", "SSN", "STREET", "ZIP",
        ),
    ),
    "ro": LabelSet(
        "ro",
        (),
        (
            "AGE", "CITY", "COUNTRY", "DATE", "DOCTOR", "EMAIL", "FAX",
            "HOSPITAL", "IDNUM", "LOCATION", "MEDICAL RECORD", "ORGANIZATION",
            "PATIENT", "PHONE", "PROFESSION", "STREET", "ZIP",
        ),
    ),
}


def builtin_label_set(name: str) -> LabelSet:
    try:
        return BUILTIN_LABEL_SETS[name]
    except KeyError:
        raise ConfigError(
            f"no builtin label set {name!r}; available: {sorted(BUILTIN_LABEL_SETS)}"
        ) from None


def load_label_set(source: str | dict) -> LabelSet:
    """Load a label set from a builtin name, a JSON file path, or a dict."""
    if isinstance(source, dict):
        payload = source
    elif source in BUILTIN_LABEL_SETS:
        return BUILTIN_LABEL_SETS[source]
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                payload = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read label set {source!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"label set {source!r} is not valid JSON: {exc}") from exc
    try:
        return LabelSet(
            language_code=payload["language_code"],
            rule_labels=tuple(payload.get("rule_labels", ())),
            model_labels=tuple(payload.get("model_labels", ())),
            priority=tuple(payload.get("priority", ())),
        )
    except KeyError as exc:
        raise ConfigError(f"label set missing key: {exc}") from exc
