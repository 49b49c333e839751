"""Sliding-window counters for connection rates and outbound bytes.

Windows are exact: an event at time ``t`` stays counted while ``now - t`` is
less than the period. Timestamps are integer microseconds.
"""

from __future__ import annotations

from collections import deque
from enum import Enum


class BandwidthResult(str, Enum):
    OK = "ok"
    EXCEEDED = "exceeded"


class RateWindow:
    """At most ``limit`` events in any trailing ``period_us``."""

    def __init__(self, limit: int, period_us: int):
        self.limit = limit
        self.period_us = period_us
        self._events: deque[int] = deque()

    def _expire(self, now: int) -> None:
        horizon = now - self.period_us
        while self._events and self._events[0] <= horizon:
            self._events.popleft()

    def count(self, now: int) -> int:
        self._expire(now)
        return len(self._events)

    def allows(self, now: int) -> bool:
        return self.count(now) < self.limit

    def record(self, now: int) -> None:
        self._events.append(now)


class ByteWindow:
    """At most ``limit`` bytes in any trailing ``period_us``."""

    def __init__(self, limit: int, period_us: int):
        self.limit = limit
        self.period_us = period_us
        self.total = 0
        self._events: deque[tuple[int, int]] = deque()

    def _expire(self, now: int) -> None:
        horizon = now - self.period_us
        while self._events and self._events[0][0] <= horizon:
            _, size = self._events.popleft()
            self.total -= size

    def charge(self, now: int, size: int) -> BandwidthResult:
        """Charge ``size`` bytes if they fit; an exceeded charge leaves the window unchanged."""
        if size == 0:
            return BandwidthResult.OK
        self._expire(now)
        if self.total + size > self.limit:
            return BandwidthResult.EXCEEDED
        self._events.append((now, size))
        self.total += size
        return BandwidthResult.OK
