import datetime
import random
import re

import pytest

from deidkit.surrogates import (
    age_surrogate,
    draw_date_shift,
    format_preserving_random,
    is_decade_text,
    normalize_chunk,
    parse_date_text,
    replace_decade,
    shift_date_text,
)


class TestDateShift:
    def test_worked_example(self):
        # Calendar oracle: 2089-03-29 minus 57 days is 2089-01-31.
        assert shift_date_text("03/29/2089", -57) == "01/31/2089"

    def test_iso_format_preserved(self):
        assert shift_date_text("2023-05-10", 30) == "2023-06-09"

    def test_dmy_detected_when_day_exceeds_twelve(self):
        # 20/10/2023 can only be day-first; +31 days is 20/11/2023.
        assert shift_date_text("20/10/2023", 31) == "20/11/2023"

    def test_month_name_format(self):
        assert shift_date_text("January 5, 2019", 60) == "March 6, 2019"
        assert shift_date_text("Jan 5, 2019", 60) == "Mar 6, 2019"

    def test_two_digit_year_preserved(self):
        assert shift_date_text("03/29/89", -57) == "01/31/89"

    def test_unpadded_components_stay_unpadded(self):
        assert shift_date_text("3/9/2021", 1, "mdy") == "3/10/2021"

    def test_unparseable_returns_none(self):
        assert shift_date_text("around spring", 30) is None
        assert shift_date_text("13/13/2020", 30) is None

    FORMAT_CLASSES = [
        ("mdy-slash", "%02d/%02d/%04d", "mdy"),
        ("dmy-slash", "%02d/%02d/%04d", "dmy"),
        ("iso", None, "iso"),
        ("month-name", None, "name"),
    ]

    def test_calendar_oracle_on_random_dates(self):
        # Oracle: re-parse the shifted text and check the day delta exactly.
        rng = random.Random(20240215)
        checked = 0
        for _ in range(500):
            base = datetime.date(1940, 1, 1) + datetime.timedelta(
                days=rng.randint(0, 60000)
            )
            style = rng.choice(("mdy", "dmy", "iso", "name", "abbrev"))
            if style == "mdy":
                text, order = f"{base.month:02d}/{base.day:02d}/{base.year:04d}", "mdy"
            elif style == "dmy":
                text, order = f"{base.day:02d}/{base.month:02d}/{base.year:04d}", "dmy"
            elif style == "iso":
                text, order = base.isoformat(), "mdy"
            elif style == "name":
                text, order = f"{base.strftime('%B')} {base.day}, {base.year}", "mdy"
            else:
                text, order = f"{base.strftime('%B')[:3]} {base.day}, {base.year}", "mdy"
            days = rng.choice((-1, 1)) * rng.randint(30, 365)
            shifted = shift_date_text(text, days, order)
            assert shifted is not None, text
            reparsed = parse_date_text(shifted, order)
            assert reparsed is not None, shifted
            assert (reparsed.date - base).days == days, (text, shifted, days)
            # Format class preserved: separators and component count.
            assert re.sub(r"[A-Za-z0-9]", "x", shifted) == re.sub(
                r"[A-Za-z0-9]", "x", text
            ) or style in ("name", "abbrev")
            checked += 1
        assert checked == 500

    def test_shift_magnitude_range(self):
        for seed in range(200):
            shift = draw_date_shift(random.Random(seed))
            assert 30 <= abs(shift) <= 365


class TestDecades:
    def test_decade_forms_recognized(self):
        for text in ("1990s", "1980's", "80's", "90s"):
            assert is_decade_text(text)
        for text in ("1990", "20/10/2023", "nineties"):
            assert not is_decade_text(text)

    def test_replacement_same_shape_different_decade(self):
        rng = random.Random(9)
        for text in ("1990s", "1980's", "80's", "90s"):
            out = replace_decade(text, rng)
            assert out != text
            assert re.sub(r"\d", "d", out) == re.sub(r"\d", "d", text)

    def test_four_digit_stays_in_century(self):
        rng = random.Random(1)
        for _ in range(50):
            out = replace_decade("1990s", rng)
            assert out.startswith("19") and out.endswith("0s")


class TestFallbacks:
    def test_format_preserving_randomizes_digits(self):
        rng = random.Random(2)
        out = format_preserving_random("Spring 2089 visit 3", rng)
        assert re.fullmatch(r"Spring \d{4} visit \d", out)
        assert out != "Spring 2089 visit 3"

    def test_month_words_swapped(self):
        rng = random.Random(3)
        out = format_preserving_random("mid-June 2089", rng)
        assert re.fullmatch(r"mid-[A-Z][a-z]+ \d{4}", out)

    def test_age_same_decade(self):
        rng = random.Random(4)
        for age in (45, 7, 80, 89):
            for _ in range(20):
                out = int(age_surrogate(str(age), rng))
                assert out != age
                assert out // 10 == age // 10 or (age < 10 and 1 <= out <= 9)

    def test_age_over_89_aggregation_policy(self):
        rng = random.Random(5)
        assert age_surrogate("93", rng, over_89_policy="aggregate") == "90+"
        assert age_surrogate("93", rng, over_89_policy="none") != "90+"

    def test_normalize_chunk(self):
        assert normalize_chunk("  Linda   MARTINEZ ") == "linda martinez"
