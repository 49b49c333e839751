"""Learn a least-privilege policy from observed device traffic.

The learned policy lists exactly what the capture shows: each distinct DNS
lookup becomes a query rule, the addresses those lookups returned become
reply rules, and each distinct outbound destination becomes a connection
rule with a rate inferred from how often the device opened it. Replaying the
source capture through the monitor under the learned policy yields no
denials.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_left
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from ipaddress import IPv4Address, IPv4Network, ip_network

from iotfence.errors import EmptyCaptureError, InvariantError
from iotfence.policy.models import (
    ConnectionRule,
    DevicePolicy,
    DnsQueryRule,
    DnsReplyRule,
    normalize_qname,
    normalize_qtype,
)
from iotfence.policy.rates import RateSpec, TimeUnit
from iotfence.traffic.records import MICROS, DnsTransaction, FlowRecord, PacketRecord, Proto

logger = logging.getLogger(__name__)

DNS_PORT = 53


@dataclass(frozen=True)
class DeviceIdentity:
    mac: str
    ip: IPv4Address | None = None


@dataclass(frozen=True)
class SynthOptions:
    """Knobs for policy learning.

    ``binding_ttl_floor``/``binding_ttl_cap`` must match the monitor's
    settings; hostname attribution only trusts DNS answers the monitor
    would still consider live.
    """

    device_name: str = "Device"
    aggregate_prefix: int | str = "exact"
    rate_slack: float = 1.0
    min_observations: int = 2
    binding_ttl_floor: int = 60
    binding_ttl_cap: int = 86400
    capture_duration: float | None = None  # seconds; derived from the traffic when None


def aggregate_prefixes(ips: Iterable[IPv4Address], target: int | str = "exact") -> list[IPv4Network]:
    """Smallest set of ``target``-length blocks covering ``ips`` ("exact" gives /32s)."""
    prefix = 32 if target == "exact" else int(target)
    if not 0 <= prefix <= 32:
        raise ValueError(f"prefix length must be in 0-32, got {target!r}")
    return sorted({ip_network(f"{ip}/{prefix}", strict=False) for ip in ips})


def _peak_in_window(times_us: Sequence[int], period_us: int) -> int:
    """Largest number of events inside any trailing window ``(t - period, t]``."""
    peak = 0
    for i, t in enumerate(times_us):
        start = bisect_left(times_us, t - period_us + 1)
        peak = max(peak, i - start + 1)
    return peak


def infer_rate(
    start_times: Iterable[int],
    duration_s: float,
    slack: float = 1.0,
    *,
    min_observations: int = 2,
) -> RateSpec | None:
    """Connection-rate bound for events at ``start_times`` (microseconds).

    The unit is hours when the capture averages at least one event per hour,
    days otherwise. The count is the larger of the average and the busiest
    trailing window, scaled by ``slack`` and rounded up. Returns None with
    fewer than ``min_observations`` events.
    """
    times = sorted(start_times)
    if len(times) < max(min_observations, 2):
        return None
    if slack < 1:
        raise ValueError(f"rate slack must be >= 1, got {slack}")
    duration_s = max(duration_s, 1.0)

    unit = TimeUnit.HOUR if len(times) * TimeUnit.HOUR.seconds / duration_s >= 1 else TimeUnit.DAY
    average = len(times) * unit.seconds / duration_s
    peak = _peak_in_window(times, unit.seconds * MICROS)
    # Round before ceil so 6.000000001 does not become 7.
    count = math.ceil(round(max(average, peak) * slack, 6))
    return RateSpec(count=max(count, 1), unit=unit)


def _binding_expiry(response_ts: int, ttl: int, options: SynthOptions) -> int:
    return response_ts + min(max(ttl, options.binding_ttl_floor), options.binding_ttl_cap) * MICROS


def _capture_span(flows: Sequence[FlowRecord], transactions: Sequence[DnsTransaction]) -> float:
    starts = [f.first_ts for f in flows] + [tx.query_ts for tx in transactions]
    ends = [f.last_ts for f in flows] + [tx.response_ts or tx.query_ts for tx in transactions]
    return (max(ends) - min(starts)) / MICROS


def _valid_query(tx: DnsTransaction) -> tuple[str, str] | None:
    try:
        return normalize_qtype(tx.query.qtype), normalize_qname(tx.query.qname)
    except InvariantError as e:
        logger.warning("Ignoring DNS lookup that cannot be expressed as a rule: %s", e)
        return None


class _Bindings:
    """Time-ordered A answers: (response_ts, expiry, qname) per address."""

    def __init__(self, transactions: Iterable[DnsTransaction], options: SynthOptions):
        self._by_ip: dict[IPv4Address, list[tuple[int, int, str]]] = defaultdict(list)
        for tx in transactions:
            if tx.response is None or tx.response_ts is None or tx.query.qtype != "A":
                continue
            expiry: dict[IPv4Address, int] = {}
            for answer in tx.response.a_records:
                exp = _binding_expiry(tx.response_ts, answer.ttl, options)
                expiry[answer.address] = max(exp, expiry.get(answer.address, exp))
            for ip, exp in expiry.items():
                self._by_ip[ip].append((tx.response_ts, exp, tx.query.qname))
        for entries in self._by_ip.values():
            entries.sort(key=lambda e: e[0])

    def hostname_for(self, ip: IPv4Address, at: int) -> str | None:
        """Name of the most recent answer for ``ip`` still live at ``at``.

        Must agree with the first hostname rule ``monitor.engine.candidate_rules`` tries.
        """
        latest: dict[str, tuple[int, int]] = {}
        for arrived, expires, qname in self._by_ip.get(ip, ()):
            if arrived > at:
                break
            latest[qname] = (arrived, expires)
        live = [(arrived, qname) for qname, (arrived, expires) in latest.items() if at < expires]
        return max(live)[1] if live else None


def synthesize_policy(
    flows: Iterable[FlowRecord],
    dns_transactions: Iterable[DnsTransaction],
    device: DeviceIdentity,
    options: SynthOptions | None = None,
) -> DevicePolicy:
    """Build a policy that permits exactly the observed traffic of ``device``."""
    options = options or SynthOptions()
    flows = sorted(flows, key=lambda f: f.first_ts)
    lookups = [(tx, q) for tx in dns_transactions if (q := _valid_query(tx)) is not None]
    transactions = [tx for tx, _ in lookups]
    if not flows and not transactions:
        raise EmptyCaptureError(f"no traffic from {device.mac} in capture")

    duration = options.capture_duration or _capture_span(flows, transactions)

    # DNS lookups, deduplicated in first-seen order
    queries: dict[tuple[str, str, IPv4Address], None] = {}
    answers: dict[tuple[str, str], set[IPv4Address]] = {}
    for tx, (qtype, qname) in lookups:
        queries.setdefault((qtype, qname, tx.resolver), None)
        addresses = tx.answer_addresses
        if addresses:
            answers.setdefault((qtype, qname), set()).update(addresses)

    query_rules = [DnsQueryRule(qtype=t, qname=n, resolver=r) for t, n, r in queries]
    reply_rules = [
        DnsReplyRule(qtype=t, qname=n, answers=cidr)
        for (t, n), ips in answers.items()
        for cidr in aggregate_prefixes(ips, options.aggregate_prefix)
    ]

    # Outbound connections grouped by (dest, proto, port)
    resolvers = {tx.resolver for tx in transactions}
    bindings = _Bindings(transactions, options)
    starts: dict[tuple[str, Proto, int], list[int]] = {}
    for flow in flows:
        key = flow.key
        if flow.remote_initiated:
            continue
        if key.proto is Proto.UDP and key.dst_port == DNS_PORT and key.dst_ip in resolvers:
            continue
        dest = bindings.hostname_for(key.dst_ip, flow.first_ts) or f"{key.dst_ip}/32"
        starts.setdefault((dest, key.proto, key.dst_port), []).append(flow.first_ts)

    connection_rules = [
        ConnectionRule(
            dest=dest,
            proto=proto.value,
            dstport=port,
            freq=infer_rate(times, duration, options.rate_slack, min_observations=options.min_observations),
        )
        for (dest, proto, port), times in starts.items()
    ]
    for rule in connection_rules:
        if rule.freq is None:
            logger.info("Only one connection to %s %s:%d; no rate bound learned", rule.dest, rule.proto, rule.dstport)

    logger.info(
        "Learned %d lookups, %d reply ranges, %d connections for %s",
        len(query_rules),
        len(reply_rules),
        len(connection_rules),
        device.mac,
    )
    return DevicePolicy(
        device_name=options.device_name,
        mac_addr=device.mac,
        ip_addr=device.ip,
        allowed_dns_queries=tuple(query_rules),
        allowed_dns_replies=tuple(reply_rules),
        allowed_connections=tuple(connection_rules),
    )


def infer_device_ip(packets: Iterable[PacketRecord], mac: str) -> IPv4Address | None:
    """Most common unicast source address the device used, if any."""
    counts = Counter(
        pkt.src_ip
        for pkt in packets
        if pkt.src_mac == mac and not (pkt.src_ip.is_unspecified or pkt.src_ip.is_multicast)
    )
    return counts.most_common(1)[0][0] if counts else None
