"""Normalized packet, flow and DNS records shared by the whole pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntFlag
from ipaddress import IPv4Address

MICROS = 1_000_000


class Proto(str, Enum):
    TCP = "TCP"
    UDP = "UDP"
    OTHER = "OTHER"


class TcpFlags(IntFlag):
    NONE = 0
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    PSH = 0x08
    ACK = 0x10
    URG = 0x20
    ECE = 0x40
    CWR = 0x80


@dataclass(frozen=True)
class DnsAnswer:
    """One answer record; ``address`` is set for A records only."""

    name: str
    rtype: str
    ttl: int
    address: IPv4Address | None = None


@dataclass(frozen=True)
class DnsMessage:
    is_response: bool
    txid: int
    qtype: str
    qname: str
    answers: tuple[DnsAnswer, ...] = ()

    @property
    def a_records(self) -> list[DnsAnswer]:
        return [a for a in self.answers if a.address is not None]


@dataclass(frozen=True)
class PacketRecord:
    """A decoded IPv4 packet. Timestamps are integer microseconds since the epoch."""

    timestamp: int
    src_mac: str
    dst_mac: str
    src_ip: IPv4Address
    dst_ip: IPv4Address
    proto: Proto
    src_port: int | None = None
    dst_port: int | None = None
    payload_len: int = 0
    tcp_flags: TcpFlags = TcpFlags.NONE
    dns: DnsMessage | None = None

    def __post_init__(self) -> None:
        has_ports = self.src_port is not None and self.dst_port is not None
        if has_ports != (self.proto in (Proto.TCP, Proto.UDP)):
            raise ValueError(f"ports must be present exactly for TCP/UDP packets ({self.proto.value})")
        if self.payload_len < 0:
            raise ValueError("payload_len must be >= 0")

    @property
    def is_syn(self) -> bool:
        """Connection-opening SYN (SYN without ACK)."""
        return (
            self.proto is Proto.TCP
            and TcpFlags.SYN in self.tcp_flags
            and TcpFlags.ACK not in self.tcp_flags
        )

    @property
    def ends_flow(self) -> bool:
        return self.proto is Proto.TCP and bool(self.tcp_flags & (TcpFlags.FIN | TcpFlags.RST))


@dataclass(frozen=True)
class FlowKey:
    """5-tuple in device→remote (initiator-first) direction."""

    src_ip: IPv4Address
    dst_ip: IPv4Address
    proto: Proto
    src_port: int
    dst_port: int

    @classmethod
    def of(cls, pkt: PacketRecord) -> FlowKey:
        return cls(pkt.src_ip, pkt.dst_ip, pkt.proto, pkt.src_port, pkt.dst_port)

    def reversed(self) -> FlowKey:
        return FlowKey(self.dst_ip, self.src_ip, self.proto, self.dst_port, self.src_port)


@dataclass
class FlowRecord:
    """One TCP/UDP session; byte and packet counters are split by direction."""

    key: FlowKey
    first_ts: int
    last_ts: int
    out_bytes: int = 0
    out_packets: int = 0
    in_bytes: int = 0
    in_packets: int = 0
    syn_seen: bool = False
    closed: bool = False
    remote_initiated: bool = False
    rule_id: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class DnsTransaction:
    """A query paired with its response (if one arrived)."""

    query: DnsMessage
    resolver: IPv4Address
    query_ts: int
    response: DnsMessage | None = None
    response_ts: int | None = None

    @property
    def answer_addresses(self) -> list[IPv4Address]:
        if self.response is None:
            return []
        return [a.address for a in self.response.a_records]
