"""Policy data model.

A DevicePolicy is a whitelist for one device: which DNS names it may look up
(and through which resolver), which answers those lookups may return, and
which outbound connections it may open. Anything not listed is denied.

Models are frozen pydantic models with a strict key set; custom value types
(IPv4 addresses, CIDRs, ports, rate/bandwidth/schedule grammars) are parsed
by plain validators that raise ``SchemaError`` for wrong JSON types and
``InvariantError`` for grammar violations.
"""

from __future__ import annotations

import re
from collections.abc import Iterator
from ipaddress import IPv4Address, IPv4Network, ip_network
from typing import Annotated, Any, Literal

from dnslib import QTYPE
from pydantic import AliasChoices, BaseModel, ConfigDict, Field, PlainSerializer, PlainValidator, model_validator

from iotfence.errors import DanglingHostnameError, InvariantError, SchemaError
from iotfence.policy.rates import (
    BandwidthSpec,
    RateSpec,
    Schedule,
    format_bandwidth,
    format_rate,
    format_schedule,
    parse_bandwidth,
    parse_rate,
    parse_schedule,
)

_MAC_RE = re.compile(r"^[0-9a-f]{2}(:[0-9a-f]{2}){5}$")
_LABEL_RE = re.compile(r"^[a-z0-9_]([a-z0-9_-]{0,61}[a-z0-9_])?$")


# ---------------------------------------------------------------------------
# Value parsers
# ---------------------------------------------------------------------------


def _require_str(value: Any, what: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"expected {what} as a JSON string, got {type(value).__name__}")
    return value


def normalize_mac(value: Any) -> str:
    text = _require_str(value, "MAC address").strip().lower().replace("-", ":")
    if not _MAC_RE.match(text):
        raise InvariantError(f"invalid EUI-48 address {value!r}")
    return text


def normalize_qname(value: Any) -> str:
    """Lowercase, strip one trailing dot, and check DNS length limits."""
    text = _require_str(value, "domain name").strip().lower()
    if text.endswith("."):
        text = text[:-1]
    if not text or len(text) > 253:
        raise InvariantError(f"domain name must be 1-253 characters, got {value!r}")
    for label in text.split("."):
        if len(label.encode()) > 63 or not _LABEL_RE.match(label):
            raise InvariantError(f"invalid DNS label {label!r} in {value!r}")
    return text


def normalize_qtype(value: Any) -> str:
    text = _require_str(value, "DNS record type").strip().upper()
    if text not in QTYPE.reverse:
        raise InvariantError(f"unknown DNS record type {value!r}")
    return text


def _ipv4(value: Any) -> IPv4Address:
    if isinstance(value, IPv4Address):
        return value
    text = _require_str(value, "IPv4 address")
    try:
        return IPv4Address(text.strip())
    except ValueError:
        raise InvariantError(f"invalid IPv4 address {value!r}") from None


def _cidr(value: Any) -> IPv4Network:
    if isinstance(value, IPv4Network):
        return value
    text = _require_str(value, "CIDR")
    try:
        network = ip_network(text.strip(), strict=True)
    except ValueError:
        raise InvariantError(f"invalid IPv4 CIDR {value!r}") from None
    if not isinstance(network, IPv4Network):
        raise InvariantError(f"only IPv4 prefixes are supported, got {value!r}")
    return network


def _port(value: Any) -> int:
    if isinstance(value, bool):
        raise SchemaError("expected port as a string or integer, got bool")
    if isinstance(value, str):
        if not value.strip().isdigit():
            raise InvariantError(f"port must be numeric, got {value!r}")
        value = int(value)
    if not isinstance(value, int):
        raise SchemaError(f"expected port as a string or integer, got {type(value).__name__}")
    if not 1 <= value <= 65535:
        raise InvariantError(f"port must be in 1-65535, got {value}")
    return value


def _dest(value: Any) -> str:
    """Hostname or IPv4 CIDR; a bare address is accepted as a /32 literal."""
    text = _require_str(value, "destination").strip()
    if is_ip_literal(text):
        _cidr(text)
        return text
    return normalize_qname(text)


def _size(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"expected packet size as an integer, got {type(value).__name__}")
    if value < 1:
        raise InvariantError(f"packet size must be positive, got {value}")
    return value


def _grammar(parser, kind: type):
    def validate(value: Any):
        if isinstance(value, kind):
            return value
        return parser(_require_str(value, kind.__name__))

    return validate


def is_ip_literal(dest: str) -> bool:
    """True when ``dest`` is written as an IPv4 address or prefix rather than a hostname."""
    head = dest.split("/", 1)[0]
    parts = head.split(".")
    return len(parts) == 4 and all(p.isdigit() for p in parts)


Mac = Annotated[str, PlainValidator(normalize_mac)]
QName = Annotated[str, PlainValidator(normalize_qname)]
QType = Annotated[str, PlainValidator(normalize_qtype)]
IPv4 = Annotated[IPv4Address, PlainValidator(_ipv4), PlainSerializer(str, return_type=str)]
Cidr = Annotated[IPv4Network, PlainValidator(_cidr), PlainSerializer(str, return_type=str)]
Port = Annotated[int, PlainValidator(_port), PlainSerializer(str, return_type=str)]
Dest = Annotated[str, PlainValidator(_dest)]
Rate = Annotated[
    RateSpec, PlainValidator(_grammar(parse_rate, RateSpec)), PlainSerializer(format_rate, return_type=str)
]
Bandwidth = Annotated[
    BandwidthSpec,
    PlainValidator(_grammar(parse_bandwidth, BandwidthSpec)),
    PlainSerializer(format_bandwidth, return_type=str),
]
DailyWindow = Annotated[
    Schedule, PlainValidator(_grammar(parse_schedule, Schedule)), PlainSerializer(format_schedule, return_type=str)
]
PacketSize = Annotated[int, PlainValidator(_size)]


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------

_RULE_CONFIG = ConfigDict(extra="forbid", frozen=True, validate_by_name=True, validate_by_alias=True)


def query_rule_id(index: int) -> str:
    return f"dns_queries[{index}]"


def reply_rule_id(index: int) -> str:
    return f"dns_replies[{index}]"


def connection_rule_id(index: int) -> str:
    return f"connections[{index}]"


class DnsQueryRule(BaseModel):
    """Device may look up ``qname`` (record ``qtype``) through ``resolver``."""

    model_config = _RULE_CONFIG

    qtype: QType = Field(alias="type")
    qname: QName = Field(alias="query")
    resolver: IPv4


class DnsReplyRule(BaseModel):
    """Answers to ``qtype qname`` lookups must fall inside ``answers``."""

    model_config = _RULE_CONFIG

    qtype: QType = Field(alias="type")
    qname: QName = Field(alias="query")
    answers: Cidr


class ConnectionRule(BaseModel):
    """Outbound connection to a hostname or CIDR, with optional volume/time bounds."""

    model_config = _RULE_CONFIG

    family: Literal["IPv4"] = "IPv4"
    dest: Dest
    proto: Literal["TCP", "UDP"]
    dstport: Port
    freq: Rate | None = None
    max_bw_out: Bandwidth | None = Field(default=None, alias="max-bw-out")
    max_packet_size: PacketSize | None = Field(default=None, alias="max-packet-size")
    schedule: DailyWindow | None = None

    @property
    def is_literal(self) -> bool:
        return is_ip_literal(self.dest)

    @property
    def network(self) -> IPv4Network | None:
        """Destination prefix for literal rules, None for hostname rules."""
        return _cidr(self.dest) if self.is_literal else None


# ---------------------------------------------------------------------------
# Device policy
# ---------------------------------------------------------------------------


class DevicePolicy(BaseModel):
    """Whitelist for one device. An all-empty policy denies everything."""

    model_config = _RULE_CONFIG

    device_name: str = Field(exclude=True)
    mac_addr: Mac = Field(alias="MACAddr")
    ip_addr: IPv4 | None = Field(default=None, alias="IPAddr")
    allowed_dns_queries: tuple[DnsQueryRule, ...] = Field(
        default=(),
        validation_alias=AliasChoices("AllowedDNSQueries", "AllowedLookups"),
        serialization_alias="AllowedDNSQueries",
    )
    allowed_dns_replies: tuple[DnsReplyRule, ...] = Field(default=(), alias="AllowedDNSReplies")
    allowed_connections: tuple[ConnectionRule, ...] = Field(default=(), alias="AllowedConnections")

    @model_validator(mode="after")
    def _no_dangling_hostnames(self) -> DevicePolicy:
        resolvable = {q.qname for q in self.allowed_dns_queries}
        for index, rule in enumerate(self.allowed_connections):
            if not rule.is_literal and rule.dest not in resolvable:
                raise DanglingHostnameError(rule.dest, location=f"AllowedConnections[{index}].dest")
        return self

    @property
    def is_deny_all(self) -> bool:
        return not (self.allowed_dns_queries or self.allowed_dns_replies or self.allowed_connections)

    def iter_rules(self) -> Iterator[tuple[str, DnsQueryRule | DnsReplyRule | ConnectionRule]]:
        """Yield ``(rule_id, rule)`` for every entry, in document order."""
        for i, q in enumerate(self.allowed_dns_queries):
            yield query_rule_id(i), q
        for i, r in enumerate(self.allowed_dns_replies):
            yield reply_rule_id(i), r
        for i, c in enumerate(self.allowed_connections):
            yield connection_rule_id(i), c

    def reply_rules_for(self, qname: str, qtype: str = "A") -> list[tuple[str, DnsReplyRule]]:
        return [
            (reply_rule_id(i), r)
            for i, r in enumerate(self.allowed_dns_replies)
            if r.qname == qname and r.qtype == qtype
        ]

    def query_rules_for(self, qname: str) -> list[tuple[str, DnsQueryRule]]:
        return [(query_rule_id(i), q) for i, q in enumerate(self.allowed_dns_queries) if q.qname == qname]
