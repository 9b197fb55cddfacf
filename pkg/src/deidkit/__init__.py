"""deidkit: hybrid rule + model clinical text de-identification engine."""

from .annotations import (
    Document,
    EntitySpan,
    Repair,
    Sentence,
    SpanSource,
    TagSequence,
    Token,
    bio_to_spans,
    spans_to_bio,
    validate_spans,
)
from .labels import LabelSet, builtin_label_set, label_set_hash, load_label_set
from .tokenization import split_sentences, word_punct_tokenize

__version__ = "0.1.0"

__all__ = [
    "Document",
    "EntitySpan",
    "LabelSet",
    "Repair",
    "Sentence",
    "SpanSource",
    "TagSequence",
    "Token",
    "bio_to_spans",
    "builtin_label_set",
    "label_set_hash",
    "load_label_set",
    "spans_to_bio",
    "split_sentences",
    "validate_spans",
    "word_punct_tokenize",
    "__version__",
]
