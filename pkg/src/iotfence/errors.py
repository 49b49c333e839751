"""Exception hierarchy for iotfence.

Every error raised on purpose by the library derives from ``IotFenceError`` so
the CLI can map it to an exit code without catching unrelated failures.
"""

from __future__ import annotations


class IotFenceError(Exception):
    """Base class for all iotfence errors."""


# ---------------------------------------------------------------------------
# Policy documents
# ---------------------------------------------------------------------------


class PolicyError(IotFenceError):
    """A policy document could not be turned into a DevicePolicy."""

    def __init__(self, message: str, *, location: str | None = None):
        super().__init__(message)
        self.message = message
        self.location = location

    def __str__(self) -> str:
        return f"{self.location}: {self.message}" if self.location else self.message


class PolicySyntaxError(PolicyError):
    """Policy text is not well-formed JSON (or has no single device key)."""


class SchemaError(PolicyError, ValueError):
    """Unknown key, missing key or wrong JSON type."""


class InvariantError(PolicyError, ValueError):
    """A value is well-typed but violates the policy grammar (MAC, CIDR, port, rate...)."""


class DanglingHostnameError(PolicyError, ValueError):
    """A connection rule names a host that no DNS query rule allows resolving."""

    def __init__(self, hostname: str, *, location: str | None = None):
        super().__init__(
            f"connection destination '{hostname}' has no matching AllowedDNSQueries entry",
            location=location,
        )
        self.hostname = hostname


# ---------------------------------------------------------------------------
# Captures
# ---------------------------------------------------------------------------


class CaptureError(IotFenceError):
    """A capture file could not be read."""


class FormatError(CaptureError):
    """Bad pcap magic, unsupported link type or truncated file header."""


class EmptyCaptureError(CaptureError):
    """No traffic from the requested device was found."""


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------


class CompileError(IotFenceError):
    """A policy cannot be lowered into enforcement rules."""


class JoinError(CompileError):
    """A hostname connection rule has no reply rule bounding its destinations."""

    def __init__(self, hostname: str, rule_id: str):
        super().__init__(
            f"{rule_id}: destination '{hostname}' has no AllowedDNSReplies entry; "
            "cannot bound destination addresses"
        )
        self.hostname = hostname
        self.rule_id = rule_id


class UnsupportedRuleError(CompileError):
    """A rule feature has no lowering in the selected backend."""


# ---------------------------------------------------------------------------
# Monitor
# ---------------------------------------------------------------------------


class MonitorError(IotFenceError):
    """The reference monitor was driven incorrectly."""


class OutOfOrderTimestampError(MonitorError):
    """Packets must be evaluated in non-decreasing timestamp order."""

    def __init__(self, previous: int, current: int):
        super().__init__(f"packet timestamp {current} precedes previous packet at {previous}")
        self.previous = previous
        self.current = current
