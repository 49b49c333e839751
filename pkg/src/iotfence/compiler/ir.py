"""Backend-neutral enforcement rules lowered from a DevicePolicy.

``compile_policy`` produces, in evaluation order:

  1. ACCEPT per connection rule (hostname destinations joined with every
     reply rule for that hostname, so the destination is bounded by CIDR)
  2. ACCEPT for UDP/53 to each permitted resolver
  3. FORWARD_DNS per permitted lookup
  4. SINKHOLE_DNS wildcard for every other lookup
  5. DROP for everything else from the device
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from ipaddress import IPv4Address, IPv4Network

from iotfence.errors import JoinError
from iotfence.policy.models import DevicePolicy, connection_rule_id, query_rule_id
from iotfence.policy.rates import BandwidthSpec, RateSpec, Schedule

logger = logging.getLogger(__name__)

DNS_PORT = 53
WILDCARD = "#"
DEFAULT_SINKHOLE = IPv4Address("127.0.0.1")


class Action(str, Enum):
    ACCEPT = "ACCEPT"
    DROP = "DROP"
    FORWARD_DNS = "FORWARD_DNS"
    SINKHOLE_DNS = "SINKHOLE_DNS"


@dataclass(frozen=True)
class Match:
    in_interface: str | None = None
    src_ip: IPv4Address | None = None
    src_mac: str | None = None
    dst: IPv4Network | None = None
    proto: str | None = None  # "tcp" / "udp"
    dst_port: int | None = None

    @property
    def is_empty(self) -> bool:
        return all(getattr(self, f.name) is None for f in fields(self))


@dataclass(frozen=True)
class RuleIR:
    """One lowered rule.

    ``rule_id`` names the policy entry the rule came from; hostname
    connection rules also record the reply rule they were joined with.
    Bounds netfilter cannot express (bandwidth, packet size, schedule) are
    carried so emitters can report them.
    """

    action: Action
    match: Match = field(default_factory=Match)
    limit: RateSpec | None = None
    qname: str | None = None
    resolver: IPv4Address | None = None
    address: IPv4Address | None = None
    rule_id: str | None = None
    joined_rule_id: str | None = None
    max_bw_out: BandwidthSpec | None = None
    max_packet_size: int | None = None
    schedule: Schedule | None = None

    def __post_init__(self) -> None:
        if self.action in (Action.ACCEPT, Action.DROP) and self.match.is_empty:
            raise ValueError(f"{self.action.value} rule needs at least one match predicate")
        if self.action in (Action.FORWARD_DNS, Action.SINKHOLE_DNS) and not self.qname:
            raise ValueError(f"{self.action.value} rule needs a qname or wildcard")


def _source(policy: DevicePolicy, interface: str | None) -> Match:
    if policy.ip_addr is not None:
        return Match(in_interface=interface, src_ip=policy.ip_addr)
    return Match(in_interface=interface, src_mac=policy.mac_addr)


def compile_policy(
    policy: DevicePolicy,
    interface: str | None = "wlan0",
    sinkhole: IPv4Address = DEFAULT_SINKHOLE,
) -> list[RuleIR]:
    """Lower ``policy`` to an ordered rule list.

    Raises JoinError when a hostname connection rule has no reply rule to
    bound its destination addresses.
    """
    source = _source(policy, interface)
    rules: list[RuleIR] = []

    for i, conn in enumerate(policy.allowed_connections):
        rule_id = connection_rule_id(i)
        if conn.is_literal:
            targets = [(conn.network, None)]
        else:
            targets = [(r.answers, rid) for rid, r in policy.reply_rules_for(conn.dest, "A")]
            if not targets:
                raise JoinError(conn.dest, rule_id)
        for network, joined in targets:
            rules.append(
                RuleIR(
                    action=Action.ACCEPT,
                    match=replace(source, dst=network, proto=conn.proto.lower(), dst_port=conn.dstport),
                    limit=conn.freq,
                    rule_id=rule_id,
                    joined_rule_id=joined,
                    max_bw_out=conn.max_bw_out,
                    max_packet_size=conn.max_packet_size,
                    schedule=conn.schedule,
                )
            )

    for i, query in enumerate(policy.allowed_dns_queries):
        rules.append(
            RuleIR(
                action=Action.ACCEPT,
                match=replace(source, dst=IPv4Network(f"{query.resolver}/32"), proto="udp", dst_port=DNS_PORT),
                rule_id=query_rule_id(i),
            )
        )
    for i, query in enumerate(policy.allowed_dns_queries):
        rules.append(
            RuleIR(action=Action.FORWARD_DNS, qname=query.qname, resolver=query.resolver, rule_id=query_rule_id(i))
        )

    rules.append(RuleIR(action=Action.SINKHOLE_DNS, qname=WILDCARD, address=sinkhole))
    rules.append(RuleIR(action=Action.DROP, match=source))
    logger.debug("Compiled %s into %d rules", policy.device_name, len(rules))
    return rules
