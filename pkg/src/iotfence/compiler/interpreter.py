"""Direct evaluation of compiled rules, modelling the deployed enforcement point.

The firewall half behaves like the nat PREROUTING chain: only the first
packet of a connection walks the rule list, later packets and replies ride
on connection tracking, and ``-m limit`` is treated as an exact sliding
window per rule. The DNS half behaves like the whitelisting forwarder: a
lookup is forwarded only when a FORWARD_DNS rule names the queried name and
the resolver it was sent to.
"""

from __future__ import annotations

from collections.abc import Iterable

from iotfence.compiler.ir import Action, Match, RuleIR
from iotfence.monitor.stats import Decision
from iotfence.monitor.windows import RateWindow
from iotfence.traffic.flows import DEFAULT_UDP_IDLE_TIMEOUT, FlowTable
from iotfence.traffic.records import MICROS, PacketRecord


def match_packet(match: Match, pkt: PacketRecord) -> bool:
    """True when every predicate of ``match`` holds for ``pkt`` (interface is not modelled)."""
    if match.src_ip is not None and pkt.src_ip != match.src_ip:
        return False
    if match.src_mac is not None and pkt.src_mac != match.src_mac:
        return False
    if match.dst is not None and pkt.dst_ip not in match.dst:
        return False
    if match.proto is not None and pkt.proto.value.lower() != match.proto:
        return False
    return match.dst_port is None or pkt.dst_port == match.dst_port


class IrInterpreter:
    def __init__(self, ir: Iterable[RuleIR], device_mac: str, *, udp_idle_timeout: int = DEFAULT_UDP_IDLE_TIMEOUT):
        self.rules = list(ir)
        self.flows = FlowTable(udp_idle_timeout=udp_idle_timeout, device_mac=device_mac)
        self._rates: dict[int, RateWindow] = {
            i: RateWindow(rule.limit.count, rule.limit.period_seconds * MICROS)
            for i, rule in enumerate(self.rules)
            if rule.action is Action.ACCEPT and rule.limit is not None
        }
        self._forwards = {
            (rule.qname, rule.resolver) for rule in self.rules if rule.action is Action.FORWARD_DNS
        }

    def _forwarded(self, pkt: PacketRecord) -> bool:
        return (pkt.dns.qname, pkt.dst_ip) in self._forwards

    def _first_accept(self, pkt: PacketRecord) -> int | None:
        for i, rule in enumerate(self.rules):
            if rule.action is Action.DROP and match_packet(rule.match, pkt):
                return None
            if rule.action is not Action.ACCEPT or not match_packet(rule.match, pkt):
                continue
            window = self._rates.get(i)
            if window is not None:
                if not window.allows(pkt.timestamp):
                    continue
                window.record(pkt.timestamp)
            return i
        return None

    def evaluate(self, pkt: PacketRecord) -> Decision:
        match = self.flows.lookup(pkt)
        if match is None:
            return Decision.DENY
        established = match.flow is not None and not match.starts_new

        if not match.outbound:
            if not established:
                return Decision.DENY
        elif pkt.dns is not None and not pkt.dns.is_response:
            if not self._forwarded(pkt):
                return Decision.DENY
            if not established and self._first_accept(pkt) is None:
                return Decision.DENY
        elif not established and self._first_accept(pkt) is None:
            return Decision.DENY

        self.flows.commit(pkt, match)
        return Decision.ALLOW

    def run(self, packets: Iterable[PacketRecord]) -> list[Decision]:
        return [self.evaluate(pkt) for pkt in packets]
