import random

import pytest
from hypothesis import HealthCheck, settings

from deidkit.annotations import EntitySpan, Sentence, SpanSource, Token
from deidkit.labels import builtin_label_set

settings.register_profile(
    "ci", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def en_labels():
    return builtin_label_set("en")


WORD_POOL = (
    "patient alpha woche straße aşı İstanbul çarşı mircea năstase "
    "المريض مستشفى bucurești zürich okay x1 3mg"
).split()

PUNCT_POOL = list(".,;:!?()#/-\"'")


def random_sentence(rng: random.Random, min_tokens: int = 1, max_tokens: int = 12) -> Sentence:
    """Build a sentence with realistic multilingual tokens and random spacing."""
    count = rng.randint(min_tokens, max_tokens)
    tokens = []
    pos = rng.randint(0, 3)
    start = pos
    for i in range(count):
        if rng.random() < 0.25:
            text = rng.choice(PUNCT_POOL)
        else:
            text = rng.choice(WORD_POOL)
        tokens.append(Token(text, pos, pos + len(text)))
        pos += len(text) + rng.randint(1, 2) if i < count - 1 else len(text)
    return Sentence(tuple(tokens), start, pos)


def random_token_aligned_spans(
    rng: random.Random, sentence: Sentence, labels, max_spans: int = 4
) -> list[EntitySpan]:
    """Non-overlapping spans that each cover a whole number of tokens."""
    n = len(sentence.tokens)
    indices = list(range(n))
    rng.shuffle(indices)
    spans = []
    used = set()
    for first in indices[: rng.randint(0, max_spans)]:
        width = rng.randint(1, 3)
        covered = set(range(first, min(first + width, n)))
        if covered & used:
            continue
        used |= covered
        last = max(covered)
        spans.append(
            EntitySpan(
                start=sentence.tokens[first].start,
                end=sentence.tokens[last].end,
                label=rng.choice(labels.labels),
                source=SpanSource.GOLD,
            )
        )
    return sorted(spans)
