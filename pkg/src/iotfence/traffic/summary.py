"""Per-device network footprint: endpoints, domains, hardcoded IPs, resolver use."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import asdict, dataclass
from ipaddress import IPv4Address

from iotfence.traffic.records import DnsTransaction, FlowRecord, Proto

DNS_PORT = 53
_BROADCAST = IPv4Address("255.255.255.255")


@dataclass(frozen=True)
class CaptureSummary:
    distinct_endpoints: int = 0
    distinct_domains: int = 0
    hardcoded_ips: int = 0
    rogue_resolver: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _is_local_noise(ip: IPv4Address) -> bool:
    # mDNS/SSDP chatter and limited broadcast are not remote endpoints.
    return ip.is_multicast or ip == _BROADCAST


def _outbound_flows(flows: Iterable[FlowRecord]) -> list[FlowRecord]:
    return [
        f
        for f in flows
        if not f.remote_initiated and f.key.dst_port != DNS_PORT and not _is_local_noise(f.key.dst_ip)
    ]


def summarize_capture(
    flows: Iterable[FlowRecord],
    dns_transactions: Iterable[DnsTransaction],
    dhcp_resolver: IPv4Address | None = None,
) -> CaptureSummary:
    """Compute the footprint of one device's capture.

    An IP counts as hardcoded when no DNS answer containing it arrived at or
    before the first connection to it; a lookup made afterwards does not help.
    """
    transactions = list(dns_transactions)
    outbound = _outbound_flows(flows)

    endpoints = {(f.key.dst_ip, f.key.proto, f.key.dst_port) for f in outbound}
    endpoints |= {(tx.resolver, Proto.UDP, DNS_PORT) for tx in transactions}

    domains = {tx.query.qname for tx in transactions}

    first_contact: dict[IPv4Address, int] = {}
    for f in outbound:
        seen = first_contact.get(f.key.dst_ip)
        if seen is None or f.first_ts < seen:
            first_contact[f.key.dst_ip] = f.first_ts

    first_answer: dict[IPv4Address, int] = {}
    for tx in transactions:
        if tx.response_ts is None:
            continue
        for ip in tx.answer_addresses:
            seen = first_answer.get(ip)
            if seen is None or tx.response_ts < seen:
                first_answer[ip] = tx.response_ts

    hardcoded = sum(
        1 for ip, contact in first_contact.items() if ip not in first_answer or first_answer[ip] > contact
    )
    rogue = dhcp_resolver is not None and any(tx.resolver != dhcp_resolver for tx in transactions)

    return CaptureSummary(
        distinct_endpoints=len(endpoints),
        distinct_domains=len(domains),
        hardcoded_ips=hardcoded,
        rogue_resolver=rogue,
    )
