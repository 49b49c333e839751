"""Reference monitor: per-packet verdicts for one device under one policy.

Decision order for each packet:

  1. DNS responses to the device must answer a query the monitor allowed on
     that flow (same transaction id, type and name); their A answers must lie
     in the reply rules for (type, name). Allowed answers become destination
     bindings.
  2. Other inbound packets are allowed only on flows the device opened.
  3. Outbound DNS queries must match a query rule (type, name, resolver).
  4. Further packets on an allowed outbound flow ride on it
     (ESTABLISHED_REPLY) and are charged against the bandwidth and
     packet-size bounds of the rule that opened it.
  5. New outbound flows must match a connection rule whose destination is a
     literal prefix or a live binding, then pass schedule, packet size, rate
     and bandwidth. Hostname rules are tried first, most recently bound name
     first, then literal rules in document order; the first rule that passes
     wins. A learned policy attributes connections the same way.
  6. Everything else is denied.

Only allowed packets change monitor state.
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass, field
from datetime import datetime, timezone, tzinfo
from zoneinfo import ZoneInfo

from iotfence.errors import OutOfOrderTimestampError
from iotfence.monitor.bindings import BindingTable
from iotfence.monitor.stats import Decision, Endpoint, MatchStats, Reason, Verdict
from iotfence.monitor.windows import BandwidthResult, ByteWindow, RateWindow
from iotfence.policy.models import ConnectionRule, DevicePolicy, connection_rule_id
from iotfence.settings import MonitorConfig
from iotfence.traffic.flows import FlowMatch, FlowTable
from iotfence.traffic.records import MICROS, FlowKey, PacketRecord

logger = logging.getLogger(__name__)


def _timezone(name: str) -> tzinfo:
    return timezone.utc if name.upper() == "UTC" else ZoneInfo(name)


@dataclass
class MonitorState:
    """Everything the monitor remembers between packets."""

    flows: FlowTable
    bindings: BindingTable
    timezone: tzinfo
    rates: dict[str, RateWindow] = field(default_factory=dict)
    bandwidth: dict[str, ByteWindow] = field(default_factory=dict)
    # (txid, qtype, qname) of allowed queries still waiting for an answer, per DNS flow
    lookups: dict[FlowKey, Counter[tuple[int, str, str]]] = field(default_factory=dict)
    last_ts: int | None = None
    next_index: int = 0

    @classmethod
    def for_policy(cls, policy: DevicePolicy, config: MonitorConfig | None = None) -> MonitorState:
        config = config or MonitorConfig()
        return cls(
            flows=FlowTable(udp_idle_timeout=config.udp_idle_timeout, device_mac=policy.mac_addr),
            bindings=BindingTable(
                ttl_floor=config.binding_ttl_floor,
                ttl_cap=config.binding_ttl_cap,
                maxsize=config.binding_maxsize,
            ),
            timezone=_timezone(config.schedule_timezone),
        )


def charge_bandwidth(state: MonitorState, rule_id: str, rule: ConnectionRule, pkt: PacketRecord) -> BandwidthResult:
    """Charge ``pkt`` to the rule's byte window; exceeded charges are not recorded."""
    if rule.max_bw_out is None:
        return BandwidthResult.OK
    window = state.bandwidth.get(rule_id)
    if window is None:
        window = state.bandwidth[rule_id] = ByteWindow(
            rule.max_bw_out.bytes, rule.max_bw_out.period_seconds * MICROS
        )
    return window.charge(pkt.timestamp, pkt.payload_len)


def _rate_window(state: MonitorState, rule_id: str, rule: ConnectionRule) -> RateWindow | None:
    if rule.freq is None:
        return None
    window = state.rates.get(rule_id)
    if window is None:
        window = state.rates[rule_id] = RateWindow(rule.freq.count, rule.freq.period_seconds * MICROS)
    return window


def _in_schedule(state: MonitorState, rule: ConnectionRule, pkt: PacketRecord) -> bool:
    if rule.schedule is None:
        return True
    moment = datetime.fromtimestamp(pkt.timestamp / MICROS, tz=state.timezone).time()
    return rule.schedule.contains(moment)


def _too_large(rule: ConnectionRule, pkt: PacketRecord) -> bool:
    return rule.max_packet_size is not None and pkt.payload_len > rule.max_packet_size


def _allow(state: MonitorState, pkt: PacketRecord, match: FlowMatch, reason: Reason, rule_id: str | None) -> Verdict:
    flow = state.flows.commit(pkt, match)
    if flow.rule_id is None:
        flow.rule_id = rule_id
    return Verdict(state.next_index, pkt.timestamp, Decision.ALLOW, reason, rule_id)


def _deny(state: MonitorState, pkt: PacketRecord, reason: Reason, rule_id: str | None = None) -> Verdict:
    return Verdict(state.next_index, pkt.timestamp, Decision.DENY, reason, rule_id)


def _dns_response(state: MonitorState, policy: DevicePolicy, pkt: PacketRecord, match: FlowMatch) -> Verdict:
    dns = pkt.dns
    if match.flow is None or match.starts_new:
        return _deny(state, pkt, Reason.DEFAULT_DENY)
    waiting = state.lookups.get(match.key)
    question = (dns.txid, dns.qtype, dns.qname)
    if not waiting or waiting[question] <= 0:
        return _deny(state, pkt, Reason.DNS_QNAME_DENIED)

    reply_rules = policy.reply_rules_for(dns.qname, dns.qtype)
    if reply_rules:
        for answer in dns.a_records:
            if not any(answer.address in rule.answers for _, rule in reply_rules):
                return _deny(state, pkt, Reason.DNS_ANSWER_OUT_OF_RANGE, reply_rules[0][0])
        rule_id = reply_rules[0][0]
    else:
        candidates = [(rid, q) for rid, q in policy.query_rules_for(dns.qname) if q.qtype == dns.qtype]
        rule_id = next((rid for rid, q in candidates if q.resolver == pkt.src_ip), None)
        if rule_id is None:
            if candidates:
                return _deny(state, pkt, Reason.RESOLVER_MISMATCH, candidates[0][0])
            return _deny(state, pkt, Reason.DNS_QNAME_DENIED)

    waiting[question] -= 1
    if waiting[question] == 0:
        del waiting[question]
    if not waiting:
        del state.lookups[match.key]
    state.bindings.add_answers(dns, pkt.timestamp)
    return _allow(state, pkt, match, Reason.RULE_MATCH, rule_id)


def _dns_query(state: MonitorState, policy: DevicePolicy, pkt: PacketRecord, match: FlowMatch) -> Verdict:
    dns = pkt.dns
    candidates = [(rid, q) for rid, q in policy.query_rules_for(dns.qname) if q.qtype == dns.qtype]
    for rule_id, rule in candidates:
        if rule.resolver == pkt.dst_ip:
            if match.starts_new or match.flow is None:
                state.lookups.pop(match.key, None)
            state.lookups.setdefault(match.key, Counter())[(dns.txid, dns.qtype, dns.qname)] += 1
            return _allow(state, pkt, match, Reason.RULE_MATCH, rule_id)
    if candidates:
        return _deny(state, pkt, Reason.RESOLVER_MISMATCH, candidates[0][0])
    return _deny(state, pkt, Reason.DNS_QNAME_DENIED)


def _continuation(state: MonitorState, policy: DevicePolicy, pkt: PacketRecord, match: FlowMatch) -> Verdict:
    rule_id = match.flow.rule_id
    rule = _connection_rule(policy, rule_id)
    if rule is not None:
        if _too_large(rule, pkt):
            return _deny(state, pkt, Reason.PACKET_SIZE_EXCEEDED, rule_id)
        if charge_bandwidth(state, rule_id, rule, pkt) is BandwidthResult.EXCEEDED:
            return _deny(state, pkt, Reason.BANDWIDTH_EXCEEDED, rule_id)
    return _allow(state, pkt, match, Reason.ESTABLISHED_REPLY, rule_id)


def _connection_rule(policy: DevicePolicy, rule_id: str | None) -> ConnectionRule | None:
    for i, rule in enumerate(policy.allowed_connections):
        if connection_rule_id(i) == rule_id:
            return rule
    return None


def candidate_rules(state: MonitorState, policy: DevicePolicy, pkt: PacketRecord) -> list[tuple[str, ConnectionRule]]:
    """Connection rules covering ``pkt``, in the order they are tried.

    Hostname rules come first, newest binding first (ties go to the
    greater name, then document order), followed by literal rules in
    document order.
    """
    bound: list[tuple[int, str, int, ConnectionRule]] = []
    literal: list[tuple[str, ConnectionRule]] = []
    for i, rule in enumerate(policy.allowed_connections):
        if rule.proto != pkt.proto.value or rule.dstport != pkt.dst_port:
            continue
        if rule.is_literal:
            if pkt.dst_ip in rule.network:
                literal.append((connection_rule_id(i), rule))
            continue
        arrived = state.bindings.bound_at(rule.dest, pkt.dst_ip, pkt.timestamp)
        if arrived is not None:
            bound.append((arrived, rule.dest, -i, rule))
    bound.sort(key=lambda entry: entry[:3], reverse=True)
    return [(connection_rule_id(-neg), rule) for _, _, neg, rule in bound] + literal


def _new_connection(state: MonitorState, policy: DevicePolicy, pkt: PacketRecord, match: FlowMatch) -> Verdict:
    first_failure: tuple[Reason, str] | None = None
    for rule_id, rule in candidate_rules(state, policy, pkt):
        window = _rate_window(state, rule_id, rule)
        if not _in_schedule(state, rule, pkt):
            failure = Reason.OUTSIDE_SCHEDULE
        elif _too_large(rule, pkt):
            failure = Reason.PACKET_SIZE_EXCEEDED
        elif window is not None and not window.allows(pkt.timestamp):
            failure = Reason.RATE_EXCEEDED
        elif charge_bandwidth(state, rule_id, rule, pkt) is BandwidthResult.EXCEEDED:
            failure = Reason.BANDWIDTH_EXCEEDED
        else:
            if window is not None:
                window.record(pkt.timestamp)
            return _allow(state, pkt, match, Reason.RULE_MATCH, rule_id)
        first_failure = first_failure or (failure, rule_id)

    if first_failure is None:
        return _deny(state, pkt, Reason.DEFAULT_DENY)
    return _deny(state, pkt, *first_failure)


def evaluate_packet(state: MonitorState, policy: DevicePolicy, pkt: PacketRecord) -> Verdict:
    """Decide ``pkt`` and update ``state`` if it is allowed.

    Raises OutOfOrderTimestampError when ``pkt`` is older than the previous packet.
    """
    if state.last_ts is not None and pkt.timestamp < state.last_ts:
        raise OutOfOrderTimestampError(state.last_ts, pkt.timestamp)

    match = state.flows.lookup(pkt)
    dns = pkt.dns
    if match is None:
        verdict = _deny(state, pkt, Reason.DEFAULT_DENY)
    elif not match.outbound:
        if dns is not None and dns.is_response:
            verdict = _dns_response(state, policy, pkt, match)
        elif match.flow is not None and not match.starts_new:
            verdict = _allow(state, pkt, match, Reason.ESTABLISHED_REPLY, match.flow.rule_id)
        else:
            verdict = _deny(state, pkt, Reason.DEFAULT_DENY)
    elif dns is not None and not dns.is_response:
        verdict = _dns_query(state, policy, pkt, match)
    elif match.flow is not None and not match.starts_new:
        verdict = _continuation(state, policy, pkt, match)
    else:
        verdict = _new_connection(state, policy, pkt, match)

    state.last_ts = pkt.timestamp
    state.next_index += 1
    if not verdict.allowed:
        logger.debug(
            "Denied packet %d (%s) to %s: %s", verdict.index, pkt.proto.value, pkt.dst_ip, verdict.reason.value
        )
    return verdict


def _endpoint(policy: DevicePolicy, pkt: PacketRecord) -> Endpoint | None:
    if pkt.src_mac != policy.mac_addr:
        return None
    return pkt.dst_ip, pkt.proto.value, pkt.dst_port


class Monitor:
    """Stateful monitor for one device; feed packets in timestamp order."""

    def __init__(self, policy: DevicePolicy, config: MonitorConfig | None = None):
        self.policy = policy
        self.state = MonitorState.for_policy(policy, config)
        self.stats = MatchStats()

    def evaluate(self, pkt: PacketRecord) -> Verdict:
        verdict = evaluate_packet(self.state, self.policy, pkt)
        self.stats.record(verdict, None if verdict.allowed else _endpoint(self.policy, pkt))
        return verdict


def replay(
    policy: DevicePolicy, packets: Iterable[PacketRecord], config: MonitorConfig | None = None
) -> tuple[list[Verdict], MatchStats]:
    """Evaluate a whole trace; returns verdicts in packet order and match statistics."""
    monitor = Monitor(policy, config)
    verdicts = [monitor.evaluate(pkt) for pkt in packets]
    logger.info(
        "Replayed %d packets: %d allowed, %d denied",
        len(verdicts),
        monitor.stats.allowed_total,
        monitor.stats.denied_total,
    )
    return verdicts, monitor.stats
