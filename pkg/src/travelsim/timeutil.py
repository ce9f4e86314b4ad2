"""Integer-minute clock and the "MM-DD HH:MM" surface form.

A time point is the number of minutes since 00:00 on the world's start date.
Calendar arithmetic uses a fixed non-leap year; a date that falls before the
start date in the calendar is taken to be in the following year.
"""

from __future__ import annotations

import datetime as _dt
import re

DAY = 1440

_YEAR = 2001
_TIME_RE = re.compile(r"^\s*(\d{2})-(\d{2})\s+(\d{2}):(\d{2})\s*$")
_CLOCK_RE = re.compile(r"^\s*(\d{2}):(\d{2})\s*$")
_DATE_RE = re.compile(r"^(\d{2})-(\d{2})$")


class TimeFormatError(ValueError):
    pass


def _date(text: str) -> _dt.date:
    m = _DATE_RE.match(text)
    if not m:
        raise TimeFormatError(f"bad date {text!r}, expected MM-DD")
    try:
        return _dt.date(_YEAR, int(m.group(1)), int(m.group(2)))
    except ValueError as exc:
        raise TimeFormatError(f"bad date {text!r}: {exc}") from None


def check_date(text: str) -> str:
    _date(text)
    return text


def parse_time(text: str, start_date: str) -> int:
    """Parse ``"MM-DD HH:MM"`` into minutes since ``start_date`` 00:00."""
    m = _TIME_RE.match(text)
    if not m:
        raise TimeFormatError(f"bad time literal {text!r}, expected MM-DD HH:MM")
    month, day, hour, minute = (int(g) for g in m.groups())
    if hour > 23 or minute > 59:
        raise TimeFormatError(f"bad time literal {text!r}")
    start = _date(start_date)
    try:
        when = _dt.date(_YEAR, month, day)
    except ValueError:
        raise TimeFormatError(f"bad date in {text!r}") from None
    if when < start:
        when = when.replace(year=_YEAR + 1)
    return (when - start).days * DAY + hour * 60 + minute


def render_time(minutes: int, start_date: str) -> str:
    if minutes < 0:
        raise TimeFormatError(f"negative time point {minutes}")
    days, rem = divmod(int(minutes), DAY)
    when = _date(start_date) + _dt.timedelta(days=days)
    return f"{when.month:02d}-{when.day:02d} {rem // 60:02d}:{rem % 60:02d}"


def parse_clock(text: str) -> int:
    """Parse ``"HH:MM"`` into a minute of the day (``"24:00"`` allowed)."""
    m = _CLOCK_RE.match(text)
    if not m:
        raise TimeFormatError(f"bad clock {text!r}, expected HH:MM")
    hour, minute = int(m.group(1)), int(m.group(2))
    value = hour * 60 + minute
    if minute > 59 or value > DAY:
        raise TimeFormatError(f"bad clock {text!r}")
    return value


def render_clock(minute_of_day: int) -> str:
    return f"{minute_of_day // 60:02d}:{minute_of_day % 60:02d}"


def occurrences(window: tuple[int, int], t0: int, t1: int) -> list[tuple[int, int]]:
    """Absolute intervals of a daily window that intersect ``[t0, t1]``.

    A window with ``start > end`` wraps past midnight.
    """
    start, end = window
    length = end - start if start <= end else DAY - start + end
    out = []
    first = t0 // DAY - 1
    for day in range(first, t1 // DAY + 1):
        a = day * DAY + start
        b = a + length
        if b >= t0 and a <= t1:
            out.append((a, b))
    return out


def overlaps(a: int, b: int, c: int, d: int) -> bool:
    """Open-interval overlap of ``(a, b)`` and ``(c, d)``."""
    return a < d and c < b


def within_daily(window: tuple[int, int], begin: int, end: int) -> bool:
    """True when ``[begin, end]`` fits inside one occurrence of ``window``."""
    return any(a <= begin and end <= b for a, b in occurrences(window, begin, end))
