"""TCP/UDP session tracking.

``FlowTable`` is the single definition of where a flow begins and ends; both
offline analysis (``track_flows``) and the reference monitor use it, so a
policy learned from a capture counts connections exactly as the monitor does.

Rules:
  - TCP: a flow starts at the device's SYN, or at the first packet seen for a
    5-tuple already open when the capture began. FIN or RST closes it; later
    non-SYN packets (final ACKs) still belong to it, a new SYN starts a new flow.
  - UDP: packets on one 5-tuple separated by more than the idle timeout
    (60 s by default) belong to different flows.
  - A closed TCP flow expires after 120 s without packets, an open one after
    five days. Expired flows are forgotten; the next packet on the 5-tuple
    is looked up as if the table had never seen it.
  - Counters are split device→remote (out) and remote→device (in).
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

from iotfence.traffic.records import MICROS, FlowKey, FlowRecord, PacketRecord, Proto

DEFAULT_UDP_IDLE_TIMEOUT = 60
TCP_CLOSED_TIMEOUT = 120
TCP_IDLE_TIMEOUT = 5 * 86400


@dataclass(frozen=True)
class FlowMatch:
    """Where a packet falls, computed without touching table state."""

    key: FlowKey
    outbound: bool
    flow: FlowRecord | None
    starts_new: bool


class FlowTable:
    def __init__(self, *, udp_idle_timeout: int = DEFAULT_UDP_IDLE_TIMEOUT, device_mac: str | None = None):
        self.udp_idle_timeout_us = udp_idle_timeout * MICROS
        self.device_mac = device_mac
        self.flows: list[FlowRecord] = []
        self._active: dict[FlowKey, FlowRecord] = {}
        self._swept_at: int | None = None

    def _expired(self, flow: FlowRecord, now: int) -> bool:
        idle = now - flow.last_ts
        if flow.key.proto is Proto.UDP:
            return idle > self.udp_idle_timeout_us
        if flow.closed:
            return idle > TCP_CLOSED_TIMEOUT * MICROS
        return idle > TCP_IDLE_TIMEOUT * MICROS

    def _live(self, key: FlowKey, now: int) -> FlowRecord | None:
        flow = self._active.get(key)
        if flow is None or self._expired(flow, now):
            return None
        return flow

    def lookup(self, pkt: PacketRecord) -> FlowMatch | None:
        """Classify ``pkt`` against the table; None for non-TCP/UDP packets."""
        if pkt.proto is Proto.OTHER:
            return None
        fwd = FlowKey.of(pkt)
        rev = fwd.reversed()
        now = pkt.timestamp
        if self.device_mac is not None:
            outbound = pkt.src_mac == self.device_mac
        else:
            outbound = self._live(fwd, now) is not None or self._live(rev, now) is None
        key = fwd if outbound else rev
        flow = self._live(key, now)
        return FlowMatch(key=key, outbound=outbound, flow=flow, starts_new=self._starts_new(pkt, flow, outbound))

    def _starts_new(self, pkt: PacketRecord, flow: FlowRecord | None, outbound: bool) -> bool:
        if flow is None:
            return True
        if pkt.proto is Proto.UDP:
            return False
        # A fresh SYN after the old session closed or progressed reuses the 5-tuple.
        return pkt.is_syn and outbound and (flow.closed or flow.in_packets > 0)

    def evict(self, now: int) -> int:
        """Drop flows expired at ``now`` from the active set; returns how many went."""
        stale = [key for key, flow in self._active.items() if self._expired(flow, now)]
        for key in stale:
            del self._active[key]
        self._swept_at = now
        return len(stale)

    def __len__(self) -> int:
        return len(self._active)

    def commit(self, pkt: PacketRecord, match: FlowMatch) -> FlowRecord:
        """Apply ``pkt`` to the table and return the flow it belongs to."""
        if self._swept_at is None or pkt.timestamp - self._swept_at >= self.udp_idle_timeout_us:
            self.evict(pkt.timestamp)
        flow = match.flow
        if match.starts_new or flow is None:
            flow = FlowRecord(
                key=match.key,
                first_ts=pkt.timestamp,
                last_ts=pkt.timestamp,
                syn_seen=pkt.is_syn,
                remote_initiated=not match.outbound,
            )
            self.flows.append(flow)
            self._active[match.key] = flow

        flow.last_ts = pkt.timestamp
        if match.outbound:
            flow.out_bytes += pkt.payload_len
            flow.out_packets += 1
        else:
            flow.in_bytes += pkt.payload_len
            flow.in_packets += 1
        if pkt.ends_flow:
            flow.closed = True
        return flow

    def observe(self, pkt: PacketRecord) -> FlowRecord | None:
        match = self.lookup(pkt)
        return self.commit(pkt, match) if match is not None else None


def track_flows(
    packets: Iterable[PacketRecord],
    *,
    device_mac: str | None = None,
    udp_idle_timeout: int = DEFAULT_UDP_IDLE_TIMEOUT,
) -> list[FlowRecord]:
    """Group a timestamp-ordered packet stream into flows (in start order).

    With ``device_mac`` the device side defines direction; without it the
    first packet seen on a 5-tuple defines the initiator.
    """
    table = FlowTable(udp_idle_timeout=udp_idle_timeout, device_mac=device_mac)
    for pkt in packets:
        table.observe(pkt)
    return table.flows
