"""Match statistics collected at the enforcement point."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from ipaddress import IPv4Address
from typing import Any


class Decision(str, Enum):
    ALLOW = "ALLOW"
    DENY = "DENY"


class Reason(str, Enum):
    RULE_MATCH = "RULE_MATCH"
    ESTABLISHED_REPLY = "ESTABLISHED_REPLY"
    DEFAULT_DENY = "DEFAULT_DENY"
    RATE_EXCEEDED = "RATE_EXCEEDED"
    DNS_QNAME_DENIED = "DNS_QNAME_DENIED"
    DNS_ANSWER_OUT_OF_RANGE = "DNS_ANSWER_OUT_OF_RANGE"
    BANDWIDTH_EXCEEDED = "BANDWIDTH_EXCEEDED"
    RESOLVER_MISMATCH = "RESOLVER_MISMATCH"
    PACKET_SIZE_EXCEEDED = "PACKET_SIZE_EXCEEDED"
    OUTSIDE_SCHEDULE = "OUTSIDE_SCHEDULE"


ALLOW_REASONS = frozenset({Reason.RULE_MATCH, Reason.ESTABLISHED_REPLY})


@dataclass(frozen=True)
class Verdict:
    """Decision for one packet; ``rule_id`` is the matched or violated policy entry."""

    index: int
    timestamp: int
    decision: Decision
    reason: Reason
    rule_id: str | None = None

    def __post_init__(self) -> None:
        if (self.decision is Decision.ALLOW) != (self.reason in ALLOW_REASONS):
            raise ValueError(f"{self.decision.value} verdict cannot carry reason {self.reason.value}")

    @property
    def allowed(self) -> bool:
        return self.decision is Decision.ALLOW

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "ts": self.timestamp,
            "decision": self.decision.value,
            "reason": self.reason.value,
            "rule_id": self.rule_id,
        }


Endpoint = tuple[IPv4Address, str, int | None]


@dataclass
class MatchStats:
    """Per-rule hit counts and the distinct destinations the device was denied."""

    rule_hits: Counter[str] = field(default_factory=Counter)
    extraneous: dict[Endpoint, None] = field(default_factory=dict)
    allowed_total: int = 0
    denied_total: int = 0

    def record(self, verdict: Verdict, endpoint: Endpoint | None = None) -> None:
        """Count ``verdict``; ``endpoint`` is the destination of a device-sent packet."""
        if verdict.allowed:
            self.allowed_total += 1
            if verdict.reason is Reason.RULE_MATCH and verdict.rule_id is not None:
                self.rule_hits[verdict.rule_id] += 1
            return
        self.denied_total += 1
        if endpoint is not None:
            self.extraneous.setdefault(endpoint, None)

    def to_dict(self) -> dict[str, Any]:
        return {
            "rule_hits": dict(sorted(self.rule_hits.items())),
            "extraneous": [
                {"dst": str(dst), "proto": proto, "port": port} for dst, proto, port in self.extraneous
            ],
            "denied_total": self.denied_total,
            "allowed_total": self.allowed_total,
        }
