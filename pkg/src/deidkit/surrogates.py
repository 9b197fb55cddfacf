"""Surrogate value generation for obfuscation: calendar-shifted dates,
decade swaps, same-decade ages, and format-preserving fallbacks.

Date shifting preserves the textual format class: separator, component
order, zero padding, and 2- vs 4-digit years all survive the shift. Decade
forms ("1990s", "80's") are not shifted by days; they are swapped for a
different decade with the same suffix shape.
"""

from __future__ import annotations

import datetime
import random
import re
from dataclasses import dataclass
from typing import Callable

_MONTHS = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)

_NUMERIC_DATE_RE = re.compile(r"^(\d{1,2})([/.-])(\d{1,2})\2(\d{2}|\d{4})$")
_ISO_DATE_RE = re.compile(r"^(\d{4})-(\d{1,2})-(\d{1,2})$")
_MONTH_NAME_RE = re.compile(r"^([A-Za-z]+)(\.?) (\d{1,2})(,?) (\d{4})$")
_DECADE_RE = re.compile(r"^(\d{2}|\d{4})('?s)$")


@dataclass(frozen=True, slots=True)
class ParsedDate:
    date: datetime.date
    render: Callable[[datetime.date], str]


def _month_from_name(name: str) -> int | None:
    lowered = name.lower()
    for index, month in enumerate(_MONTHS, 1):
        if month.lower() == lowered or month.lower()[:3] == lowered:
            return index
    return None


def _pad(value: int, template: str) -> str:
    # Two-digit source components stay two-digit after the shift.
    return f"{value:02d}" if len(template) == 2 else str(value)


def parse_date_text(text: str, date_order: str = "mdy") -> ParsedDate | None:
    """Parse a date chunk in one of the shipped formats, or None.

    Numeric dd/mm vs mm/dd ambiguity resolves by the component that must be a
    day (value > 12), falling back to ``date_order``.
    """
    m = _ISO_DATE_RE.match(text)
    if m:
        year, month, day = (int(g) for g in m.groups())
        try:
            parsed = datetime.date(year, month, day)
        except ValueError:
            return None
        month_t, day_t = m.group(2), m.group(3)

        def render_iso(d: datetime.date) -> str:
            return f"{d.year:04d}-{_pad(d.month, month_t)}-{_pad(d.day, day_t)}"

        return ParsedDate(parsed, render_iso)

    m = _NUMERIC_DATE_RE.match(text)
    if m:
        first_t, sep, second_t, year_t = m.group(1), m.group(2), m.group(3), m.group(4)
        first, second = int(first_t), int(second_t)
        year = int(year_t)
        if len(year_t) == 2:
            year += 2000 if year < 50 else 1900
        if first > 12 and second <= 12:
            order = "dmy"
        elif second > 12 and first <= 12:
            order = "mdy"
        else:
            order = "dmy" if date_order == "dmy" else "mdy"
        month, day = (first, second) if order == "mdy" else (second, first)
        try:
            parsed = datetime.date(year, month, day)
        except ValueError:
            return None

        def render_numeric(d: datetime.date) -> str:
            year_out = f"{d.year % 100:02d}" if len(year_t) == 2 else f"{d.year:04d}"
            month_s, day_s = _pad(d.month, first_t if order == "mdy" else second_t), _pad(
                d.day, second_t if order == "mdy" else first_t
            )
            a, b = (month_s, day_s) if order == "mdy" else (day_s, month_s)
            return f"{a}{sep}{b}{sep}{year_out}"

        return ParsedDate(parsed, render_numeric)

    m = _MONTH_NAME_RE.match(text)
    if m:
        name, dot, day_t, comma, year_t = m.groups()
        month = _month_from_name(name)
        if month is None:
            return None
        try:
            parsed = datetime.date(int(year_t), month, int(day_t))
        except ValueError:
            return None
        abbreviated = len(name) <= 3
        upper = name.isupper()
        lower = name.islower()

        def render_name(d: datetime.date) -> str:
            month_name = _MONTHS[d.month - 1]
            if abbreviated:
                month_name = month_name[:3]
            if upper:
                month_name = month_name.upper()
            elif lower:
                month_name = month_name.lower()
            return f"{month_name}{dot} {_pad(d.day, day_t)}{comma} {d.year:04d}"

        return ParsedDate(parsed, render_name)
    return None


def is_decade_text(text: str) -> bool:
    return _DECADE_RE.match(text) is not None


def shift_date_text(text: str, days: int, date_order: str = "mdy") -> str | None:
    """Shift a parseable date by ``days`` preserving its format, else None."""
    parsed = parse_date_text(text, date_order)
    if parsed is None:
        return None
    return parsed.render(parsed.date + datetime.timedelta(days=days))


def replace_decade(text: str, rng: random.Random) -> str | None:
    """Swap a decade form for a different decade with the same digit width."""
    m = _DECADE_RE.match(text)
    if m is None:
        return None
    digits, suffix = m.groups()
    decade = int(digits) // 10 * 10
    if len(digits) == 2:
        choices = [d for d in range(0, 100, 10) if d != decade]
        return f"{rng.choice(choices):02d}{suffix}"
    century = decade // 100 * 100
    choices = [d for d in range(century, century + 100, 10) if d != decade]
    return f"{rng.choice(choices):04d}{suffix}"


def format_preserving_random(text: str, rng: random.Random) -> str:
    """Randomize digits (and month names) in place, keeping everything else.

    Used for DATE chunks outside the shipped format list; redraws once if the
    result collides with the input.
    """
    def one_draw() -> str:
        def sub_word(m: re.Match) -> str:
            month = _month_from_name(m.group())
            if month is None:
                return m.group()
            name = _MONTHS[rng.randrange(12)]
            if len(m.group()) <= 3:
                name = name[:3]
            return name.upper() if m.group().isupper() else name

        out = re.sub(r"[A-Za-z]+", sub_word, text)
        return re.sub(r"\d", lambda _: str(rng.randrange(10)), out)

    result = one_draw()
    for _ in range(10):
        if result != text:
            break
        result = one_draw()
    return result


def age_surrogate(text: str, rng: random.Random, over_89_policy: str = "none") -> str:
    """Replace an age with another age in the same decade.

    ``over_89_policy="aggregate"`` maps ages above 89 to the fixed bucket
    "90+" instead.
    """
    if not text.strip().isdigit():
        return format_preserving_random(text, rng)
    age = int(text.strip())
    if age > 89 and over_89_policy == "aggregate":
        return "90+"
    decade = age // 10 * 10
    choices = [a for a in range(max(decade, 1), decade + 10) if a != age]
    return str(rng.choice(choices)) if choices else str(age + 1)


def draw_date_shift(rng: random.Random) -> int:
    """Per-document day shift: sign random, magnitude uniform in [30, 365]."""
    magnitude = rng.randint(30, 365)
    return magnitude if rng.random() < 0.5 else -magnitude


def normalize_chunk(text: str) -> str:
    """Normalization for surrogate-consistency keys: trim, collapse, casefold."""
    return re.sub(r"\s+", " ", text.strip()).casefold()
