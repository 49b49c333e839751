"""Pair DNS queries with their responses."""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Iterable
from ipaddress import IPv4Address

from iotfence.traffic.records import DnsTransaction, PacketRecord

logger = logging.getLogger(__name__)

_PendingKey = tuple[int, str, IPv4Address]


class DnsTracker:
    """Incremental query/response matcher.

    A response is matched to the oldest unanswered query with the same
    transaction id and qname sent to the address the response came from.
    Responses without such a query are counted in ``orphans``.
    """

    def __init__(self) -> None:
        self.transactions: list[DnsTransaction] = []
        self.orphans = 0
        self._pending: dict[_PendingKey, deque[int]] = {}

    def observe(self, pkt: PacketRecord) -> DnsTransaction | None:
        dns = pkt.dns
        if dns is None:
            return None
        if not dns.is_response:
            tx = DnsTransaction(query=dns, resolver=pkt.dst_ip, query_ts=pkt.timestamp)
            self._pending.setdefault((dns.txid, dns.qname, pkt.dst_ip), deque()).append(len(self.transactions))
            self.transactions.append(tx)
            return tx

        waiting = self._pending.get((dns.txid, dns.qname, pkt.src_ip))
        if not waiting:
            self.orphans += 1
            logger.debug("Unmatched DNS response for %s from %s (id %d)", dns.qname, pkt.src_ip, dns.txid)
            return None
        index = waiting.popleft()
        query = self.transactions[index]
        matched = DnsTransaction(
            query=query.query,
            resolver=query.resolver,
            query_ts=query.query_ts,
            response=dns,
            response_ts=pkt.timestamp,
        )
        self.transactions[index] = matched
        return matched


def extract_dns(packets: Iterable[PacketRecord]) -> list[DnsTransaction]:
    """All DNS transactions in ``packets``, in query order.

    Queries that never got an answer are kept with ``response=None``.
    """
    tracker = DnsTracker()
    for pkt in packets:
        tracker.observe(pkt)
    if tracker.orphans:
        logger.info("%d DNS responses had no matching query", tracker.orphans)
    return tracker.transactions
