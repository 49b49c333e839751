"""DNS-learned destinations.

An address returned in an allowed answer for ``qname`` is a valid
destination for rules naming ``qname`` until
``arrival + clamp(ttl, floor, cap)``. A later answer for the same name and
address replaces the earlier one. The table is a cachetools TLRUCache
driven by trace time instead of the wall clock.
"""

from __future__ import annotations

from ipaddress import IPv4Address
from typing import NamedTuple

from cachetools import TLRUCache

from iotfence.traffic.records import MICROS, DnsMessage


class Binding(NamedTuple):
    arrived: int
    lifetime: int  # microseconds, already clamped


class BindingTable:
    def __init__(self, *, ttl_floor: int = 60, ttl_cap: int = 86400, maxsize: int = 65536):
        self.ttl_floor = ttl_floor
        self.ttl_cap = ttl_cap
        self._now = 0
        self._cache: TLRUCache[tuple[str, IPv4Address], Binding] = TLRUCache(
            maxsize=maxsize,
            ttu=lambda _key, binding, now: now + binding.lifetime,
            timer=lambda: self._now,
        )

    def lifetime_us(self, ttl: int) -> int:
        return min(max(ttl, self.ttl_floor), self.ttl_cap) * MICROS

    def add(self, qname: str, address: IPv4Address, ttl: int, now: int) -> None:
        self._now = now
        self._cache[(qname, address)] = Binding(now, self.lifetime_us(ttl))

    def add_answers(self, message: DnsMessage, now: int) -> None:
        """Bind every A answer of ``message`` to the queried name."""
        ttls: dict[IPv4Address, int] = {}
        for answer in message.a_records:
            ttls[answer.address] = max(answer.ttl, ttls.get(answer.address, answer.ttl))
        for address, ttl in ttls.items():
            self.add(message.qname, address, ttl, now)

    def bound_at(self, qname: str, address: IPv4Address, now: int) -> int | None:
        """Arrival time of the live binding of ``address`` to ``qname``, if any."""
        self._now = now
        binding = self._cache.get((qname, address))
        return binding.arrived if binding is not None else None

    def contains(self, qname: str, address: IPv4Address, now: int) -> bool:
        return self.bound_at(qname, address, now) is not None

    def __len__(self) -> int:
        return len(self._cache)
