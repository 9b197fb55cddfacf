import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deidkit.errors import PluginError
from deidkit.tokenization import (
    DefaultSplitter,
    ExternalSplitter,
    split_sentences,
    word_punct_tokenize,
)

MULTILINGUAL_SAMPLES = [
    "Mrs. Linda Martinez, a 45-year-old architect, having MR#: 2775283.",
    "Die Patientin wurde am 20.10.2023 in der Charité aufgenommen.",
    "Hasta İstanbul'da 5 gün yattı; taburcu edildi.",
    "المريض دخل المستشفى في ١٢ يناير وخرج بعد أسبوع.",
    "Pacientul Năstase a fost internat la Spitalul Județean pe 03/04/2021.",
    "Tabs\tand  double  spaces\nand newlines.",
    "e-mail: john.doe@example.org (urgent!)",
]


def oracle_tokenize(text):
    """Independent linear scan: word = isalnum or underscore, maximal runs."""
    def is_word(ch):
        return ch.isalnum() or ch == "_"

    spans = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        j = i
        if is_word(ch):
            while j < len(text) and is_word(text[j]):
                j += 1
        else:
            while j < len(text) and not text[j].isspace() and not is_word(text[j]):
                j += 1
        spans.append((i, j))
        i = j
    return [(text[a:b], a, b) for a, b in spans]


class TestWordPunct:
    def test_mr_number_line(self):
        # Maximal punctuation runs: "#:" stays one token.
        tokens = word_punct_tokenize("MR#: 2775283")
        assert [(t.text, t.start, t.end) for t in tokens] == [
            ("MR", 0, 2),
            ("#:", 2, 4),
            ("2775283", 5, 12),
        ]

    def test_empty_input(self):
        assert word_punct_tokenize("") == []

    def test_slash_date(self):
        tokens = word_punct_tokenize("03/29/2089")
        assert [t.text for t in tokens] == ["03", "/", "29", "/", "2089"]

    @pytest.mark.parametrize("text", MULTILINGUAL_SAMPLES)
    def test_matches_independent_oracle(self, text):
        got = [(t.text, t.start, t.end) for t in word_punct_tokenize(text)]
        assert got == oracle_tokenize(text)

    @pytest.mark.parametrize("text", MULTILINGUAL_SAMPLES)
    def test_reconstruction(self, text):
        tokens = word_punct_tokenize(text)
        rebuilt = []
        pos = 0
        for tok in tokens:
            rebuilt.append(text[pos : tok.start])
            rebuilt.append(tok.text)
            pos = tok.end
        rebuilt.append(text[pos:])
        assert "".join(rebuilt) == text

    @given(
        st.text(
            alphabet=st.sampled_from(
                list("abcZÄéışč中ح012 \t\n.,;:!?#/@-_()'\"؟")
            ),
            max_size=60,
        )
    )
    @settings(max_examples=300)
    def test_oracle_equivalence_property(self, text):
        got = [(t.text, t.start, t.end) for t in word_punct_tokenize(text)]
        assert got == oracle_tokenize(text)

    def test_offsets_strictly_increase_no_whitespace(self):
        rng = random.Random(5)
        for _ in range(100):
            text = "".join(
                rng.choice("ab1 .\t,É؟ç") for _ in range(rng.randint(0, 40))
            )
            tokens = word_punct_tokenize(text)
            prev_end = -1
            for tok in tokens:
                assert tok.start >= prev_end
                assert not any(ch.isspace() for ch in tok.text)
                prev_end = tok.end

    def test_idempotent_on_token_texts(self):
        for text in MULTILINGUAL_SAMPLES:
            for tok in word_punct_tokenize(text):
                again = word_punct_tokenize(tok.text)
                assert [t.text for t in again] == [tok.text]

    def test_base_offset_shifts(self):
        tokens = word_punct_tokenize("ab cd", base=100)
        assert [(t.start, t.end) for t in tokens] == [(100, 102), (103, 105)]


class TestDefaultSplitter:
    # Hand-written truth fixtures for the default splitter.
    FIXTURES = [
        ("She was discharged on 20/10/2023.", 1),
        ("First point is done. Second thing follows.", 2),
        ("   \t\n  ", 0),
        ("", 0),
        ("Dr. Brown saw her. She improved.", 2),
        ("Value was 3.5 mg daily.", 1),
        ("Really?! Yes. No...", 3),
        ("One sentence without terminator", 1),
        ("Admitted 2021. 45 days later discharged.", 2),
    ]

    @pytest.mark.parametrize("text,expected", FIXTURES)
    def test_sentence_counts(self, text, expected):
        assert len(split_sentences(text)) == expected

    def test_two_sentence_offsets(self):
        text = "First point is done. Second thing follows."
        first, second = split_sentences(text)
        assert text[first.start : first.end] == "First point is done."
        assert text[second.start : second.end] == "Second thing follows."

    def test_abbreviation_guard_blocks_split(self):
        sentences = split_sentences("Seen by Dr. Brown today.")
        assert len(sentences) == 1

    def test_single_letter_guard(self):
        # Initials and dotted suffixes do not end sentences.
        sentences = split_sentences("Signed J. Smith, M.D. Patient stable.")
        assert len(sentences) == 1

    def test_arabic_question_mark_splits(self):
        sentences = split_sentences("هل تحسن المريض؟ نعم تحسن.", language_code="ar")
        assert len(sentences) == 2

    def test_tokens_within_sentence_bounds(self):
        for text, _ in self.FIXTURES:
            for sentence in split_sentences(text):
                for token in sentence.tokens:
                    assert sentence.start <= token.start < token.end <= sentence.end

    def test_ranges_cover_all_non_whitespace(self):
        text = "A b c. D e f! G?"
        ranges = DefaultSplitter().split(text)
        covered = set()
        for start, end in ranges:
            covered |= set(range(start, end))
        for i, ch in enumerate(text):
            if not ch.isspace():
                assert i in covered


class FakeSplitter:
    name = "fake"

    def __init__(self, ranges):
        self.ranges = ranges

    def split(self, text):
        return self.ranges


class TestPluginValidation:
    def test_overlapping_ranges_rejected(self):
        with pytest.raises(PluginError):
            split_sentences("abcdef", FakeSplitter([(0, 4), (3, 6)]))

    def test_unordered_ranges_rejected(self):
        with pytest.raises(PluginError):
            split_sentences("ab cd", FakeSplitter([(3, 5), (0, 2)]))

    def test_uncovered_text_rejected(self):
        with pytest.raises(PluginError):
            split_sentences("ab cd", FakeSplitter([(0, 2)]))

    def test_valid_plugin_ranges_accepted(self):
        sentences = split_sentences("ab cd", FakeSplitter([(0, 2), (3, 5)]))
        assert [s.tokens[0].text for s in sentences] == ["ab", "cd"]


class TestExternalSplitter:
    def test_subprocess_roundtrip(self):
        # Child splits on the first space, emitting two TAB-separated ranges.
        script = (
            "import sys\n"
            "text = sys.stdin.read()\n"
            "cut = text.index(' ')\n"
            "print(f'0\\t{cut}')\n"
            "print(f'{cut + 1}\\t{len(text)}')\n"
        )
        splitter = ExternalSplitter(("python3", "-c", script), name="two-part")
        sentences = split_sentences("hello world", splitter)
        assert [s.tokens[0].text for s in sentences] == ["hello", "world"]

    def test_failing_child_raises_plugin_error(self):
        splitter = ExternalSplitter(("python3", "-c", "import sys; sys.exit(3)"))
        with pytest.raises(PluginError):
            split_sentences("hello world", splitter)

    def test_garbage_output_raises_plugin_error(self):
        splitter = ExternalSplitter(("python3", "-c", "print('not-a-range')"))
        with pytest.raises(PluginError):
            split_sentences("hello world", splitter)


class TestPluginSerialization:
    def test_unsafe_plugin_calls_are_serialized(self):
        import threading

        class UnsafeSplitter:
            name = "unsafe"
            concurrent_safe = False

            def __init__(self):
                self.active = 0
                self.max_active = 0
                self.lock = threading.Lock()

            def split(self, text):
                with self.lock:
                    self.active += 1
                    self.max_active = max(self.max_active, self.active)
                import time

                time.sleep(0.002)
                with self.lock:
                    self.active -= 1
                return [(0, len(text))] if text.strip() else []

        plugin = UnsafeSplitter()
        threads = [
            threading.Thread(target=split_sentences, args=("some text", plugin))
            for _ in range(8)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert plugin.max_active == 1
