import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deidkit.annotations import Repair, TagSequence
from deidkit.conll import (
    AnnotatedDoc,
    ConllRecord,
    ConllSentence,
    read_conll,
    read_span_json,
    write_conll,
    write_span_json,
)
from deidkit.errors import FormatError, InvalidTagError


def record(*sentences, doc_id=None):
    return ConllRecord(
        tuple(ConllSentence(tuple(tokens), TagSequence(tuple(tags))) for tokens, tags in sentences),
        doc_id,
    )


class TestRead:
    def test_two_column_file(self):
        data = b"Linda B-PATIENT\nMartinez I-PATIENT\n\n"
        records = read_conll(data)
        assert len(records) == 1
        (sentence,) = records[0].sentences
        assert sentence.tokens == ("Linda", "Martinez")
        assert list(sentence.tags) == ["B-PATIENT", "I-PATIENT"]

    def test_four_column_file_takes_first_and_last(self):
        # Golden expectation produced by hand from the column convention:
        # token = column 1, tag = column 4.
        data = (
            b"Linda NNP NP B-PATIENT\n"
            b"Martinez NNP NP I-PATIENT\n"
            b"visited VBD VP O\n"
            b"\n"
        )
        (rec,) = read_conll(data)
        assert rec.sentences[0].tokens == ("Linda", "Martinez", "visited")
        assert list(rec.sentences[0].tags) == ["B-PATIENT", "I-PATIENT", "O"]

    def test_empty_file(self):
        assert read_conll(b"") == []

    def test_single_column_line_is_format_error(self):
        with pytest.raises(FormatError) as exc_info:
            read_conll(b"token O\nlonely\n\n")
        assert exc_info.value.line == 2

    def test_tolerant_separators(self):
        data = b"a\tO\nb  \t B-DATE\n\n"
        (rec,) = read_conll(data)
        assert rec.sentences[0].tokens == ("a", "b")

    def test_docstart_partitions_records(self):
        data = b"-DOCSTART- note1\n\na O\n\n-DOCSTART- note2\n\nb O\n\n"
        records = read_conll(data)
        assert [r.doc_id for r in records] == ["note1", "note2"]

    def test_docstart_filler_column_ignored(self):
        data = b"-DOCSTART- -X- O O\n\na O\n\n"
        (rec,) = read_conll(data)
        assert rec.doc_id is None

    def test_strict_mode_rejects_dangling_inside(self):
        data = b"a O\nb I-DATE\n\n"
        with pytest.raises(InvalidTagError):
            read_conll(data, Repair.STRICT)
        assert len(read_conll(data, Repair.RELAXED)) == 1

    def test_invalid_utf8_is_format_error(self):
        with pytest.raises(FormatError):
            read_conll(b"\xff\xfe broken O\n")

    @given(st.binary(max_size=200))
    @settings(max_examples=200)
    def test_reader_never_panics(self, data):
        try:
            records = read_conll(data)
        except (FormatError, InvalidTagError):
            return
        for rec in records:
            for sentence in rec.sentences:
                assert len(sentence.tokens) == len(sentence.tags)


class TestWrite:
    def test_round_trip_identity(self):
        records = [
            record((("Linda", "Martinez"), ("B-PATIENT", "I-PATIENT")), doc_id="n1"),
            record((("See", "ya"), ("O", "O")), (("2775283",), ("B-MEDICALRECORD",))),
        ]
        assert read_conll(write_conll(records)) == records

    def test_single_anonymous_record_round_trip(self):
        records = [record((("a", "b"), ("O", "B-DATE")))]
        data = write_conll(records)
        assert b"-DOCSTART-" not in data
        assert read_conll(data) == records

    def test_golden_bytes(self):
        records = [record((("Linda", "Martinez", ","), ("B-PATIENT", "I-PATIENT", "O")))]
        expected = b"Linda B-PATIENT\nMartinez I-PATIENT\n, O\n\n"
        assert write_conll(records) == expected

    def test_whitespace_in_token_rejected(self):
        records = [record((("a\tb",), ("O",)))]
        with pytest.raises(FormatError):
            write_conll(records)

    def test_write_read_canonicalizes_separator(self):
        data = b"a\tO\n\n"
        assert write_conll(read_conll(data)) == b"a O\n\n"

    def test_random_round_trips(self):
        rng = random.Random(99)
        alphabet = "abcXYZ0123"
        for _ in range(50):
            records = []
            for r in range(rng.randint(1, 3)):
                sentences = []
                for _ in range(rng.randint(1, 4)):
                    tokens = tuple(
                        "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 6)))
                        for _ in range(rng.randint(1, 5))
                    )
                    tags = tuple(rng.choice(("O", "B-DATE", "I-DATE")) for _ in tokens)
                    sentences.append((tokens, tags))
                records.append(record(*sentences, doc_id=f"r{r}"))
            assert read_conll(write_conll(records)) == records


class TestSpanJson:
    def test_round_trip(self):
        from deidkit.annotations import Document, EntitySpan, SpanSource

        doc = AnnotatedDoc(
            Document("n1", "Linda Martinez, 45"),
            (
                EntitySpan(start=0, end=14, label="PATIENT", source=SpanSource.GOLD),
                EntitySpan(start=16, end=18, label="AGE", source=SpanSource.MODEL, confidence=0.9),
            ),
        )
        (back,) = read_span_json(write_span_json([doc]))
        assert back.document == doc.document
        assert [s.key for s in back.spans] == [s.key for s in doc.spans]
        assert back.spans[1].source is SpanSource.MODEL

    def test_single_object_accepted(self):
        data = b'{"doc_id": "d", "text": "hi", "spans": []}'
        (doc,) = read_span_json(data)
        assert doc.document.doc_id == "d"

    def test_missing_text_is_format_error(self):
        with pytest.raises(FormatError):
            read_span_json(b'{"doc_id": "d"}')

    def test_bad_span_entry_is_format_error(self):
        with pytest.raises(FormatError):
            read_span_json(b'{"doc_id": "d", "text": "hi", "spans": [{"label": "X"}]}')
