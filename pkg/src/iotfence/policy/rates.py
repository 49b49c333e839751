"""Textual grammars for rate, bandwidth and schedule bounds.

``6/hr``       RateSpec: at most 6 new connections per hour
``10M/w``      BandwidthSpec: at most 10,000,000 bytes per week
``08:00-20:00`` Schedule: daily window [start, end), may wrap midnight

All three types are immutable values and keep the exact token they were
written with, so a parsed document serializes back to the same text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import time
from enum import Enum

from iotfence.errors import InvariantError


class TimeUnit(str, Enum):
    SECOND = "second"
    MINUTE = "minute"
    HOUR = "hour"
    DAY = "day"
    WEEK = "week"

    @property
    def seconds(self) -> int:
        return _UNIT_SECONDS[self]


_UNIT_SECONDS = {
    TimeUnit.SECOND: 1,
    TimeUnit.MINUTE: 60,
    TimeUnit.HOUR: 3600,
    TimeUnit.DAY: 86400,
    TimeUnit.WEEK: 7 * 86400,
}

UNIT_TOKENS: dict[str, TimeUnit] = {
    "s": TimeUnit.SECOND,
    "sec": TimeUnit.SECOND,
    "second": TimeUnit.SECOND,
    "m": TimeUnit.MINUTE,
    "min": TimeUnit.MINUTE,
    "minute": TimeUnit.MINUTE,
    "h": TimeUnit.HOUR,
    "hr": TimeUnit.HOUR,
    "hour": TimeUnit.HOUR,
    "d": TimeUnit.DAY,
    "day": TimeUnit.DAY,
    "w": TimeUnit.WEEK,
    "week": TimeUnit.WEEK,
}

# Token used when a rate is built in code rather than parsed.
CANONICAL_TOKENS: dict[TimeUnit, str] = {
    TimeUnit.SECOND: "s",
    TimeUnit.MINUTE: "min",
    TimeUnit.HOUR: "hr",
    TimeUnit.DAY: "d",
    TimeUnit.WEEK: "w",
}

MULTIPLIERS = {"": 1, "K": 10**3, "M": 10**6, "G": 10**9}

_RATE_RE = re.compile(r"^\s*(\d+)\s*/\s*([A-Za-z]+)\s*$")
_BANDWIDTH_RE = re.compile(r"^\s*(\d+)\s*([KMG]?)\s*/\s*([A-Za-z]+)\s*$")
_SCHEDULE_RE = re.compile(r"^\s*(\d{1,2}):(\d{2})\s*-\s*(\d{1,2}):(\d{2})\s*$")


def _unit_for(token: str, text: str) -> TimeUnit:
    unit = UNIT_TOKENS.get(token.lower())
    if unit is None:
        raise InvariantError(f"unknown time unit '{token}' in {text!r}")
    return unit


@dataclass(frozen=True)
class RateSpec:
    """At most ``count`` events per ``unit``."""

    count: int
    unit: TimeUnit
    token: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.count < 1:
            raise InvariantError(f"rate count must be >= 1, got {self.count}")
        if not self.token:
            object.__setattr__(self, "token", CANONICAL_TOKENS[self.unit])

    @property
    def period_seconds(self) -> int:
        return self.unit.seconds


@dataclass(frozen=True)
class BandwidthSpec:
    """At most ``bytes`` outbound payload bytes per ``unit``."""

    amount: int
    multiplier: str
    unit: TimeUnit
    token: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.multiplier not in MULTIPLIERS:
            raise InvariantError(f"bandwidth multiplier must be K, M or G, got {self.multiplier!r}")
        if self.amount < 1:
            raise InvariantError(f"bandwidth must be positive, got {self.amount}")
        if not self.token:
            object.__setattr__(self, "token", CANONICAL_TOKENS[self.unit])

    @property
    def bytes(self) -> int:
        return self.amount * MULTIPLIERS[self.multiplier]

    @property
    def period_seconds(self) -> int:
        return self.unit.seconds


@dataclass(frozen=True)
class Schedule:
    """Daily local-time window ``[start, end)``; wraps midnight when start > end."""

    start: time
    end: time

    def __post_init__(self) -> None:
        if self.start == self.end:
            raise InvariantError("schedule window is empty (start == end)")

    def contains(self, moment: time) -> bool:
        if self.start < self.end:
            return self.start <= moment < self.end
        return moment >= self.start or moment < self.end


def parse_rate(text: str) -> RateSpec:
    """Parse ``<count>/<unit-token>``."""
    match = _RATE_RE.match(text)
    if not match:
        raise InvariantError(f"rate must look like '<count>/<unit>', got {text!r}")
    count, token = int(match.group(1)), match.group(2)
    return RateSpec(count=count, unit=_unit_for(token, text), token=token)


def format_rate(rate: RateSpec) -> str:
    return f"{rate.count}/{rate.token}"


def parse_bandwidth(text: str) -> BandwidthSpec:
    """Parse ``<n>[K|M|G]/<unit-token>``; multipliers are decimal."""
    match = _BANDWIDTH_RE.match(text)
    if not match:
        raise InvariantError(f"bandwidth must look like '<n>[K|M|G]/<unit>', got {text!r}")
    amount, multiplier, token = int(match.group(1)), match.group(2), match.group(3)
    return BandwidthSpec(amount=amount, multiplier=multiplier, unit=_unit_for(token, text), token=token)


def format_bandwidth(bandwidth: BandwidthSpec) -> str:
    return f"{bandwidth.amount}{bandwidth.multiplier}/{bandwidth.token}"


def parse_schedule(text: str) -> Schedule:
    """Parse ``HH:MM-HH:MM``."""
    match = _SCHEDULE_RE.match(text)
    if not match:
        raise InvariantError(f"schedule must look like 'HH:MM-HH:MM', got {text!r}")
    h1, m1, h2, m2 = (int(g) for g in match.groups())
    try:
        return Schedule(start=time(h1, m1), end=time(h2, m2))
    except ValueError as e:
        raise InvariantError(f"invalid schedule {text!r}: {e}") from None


def format_schedule(schedule: Schedule) -> str:
    return f"{schedule.start:%H:%M}-{schedule.end:%H:%M}"
