from __future__ import annotations

from ipaddress import IPv4Address

from iotfence.traffic import CaptureSummary, extract_dns, summarize_capture, track_flows
from tests.pcaps import (
    DEVICE_MAC,
    NETATMO_HOST,
    NETATMO_IP,
    RESOLVER,
    SYN,
    bulb_trace,
    lookup,
    netatmo_trace,
    ordered,
    tcp,
    tcp_session,
)


def _summarize(packets, dhcp_resolver=None) -> CaptureSummary:
    flows = track_flows(packets, device_mac=DEVICE_MAC)
    return summarize_capture(flows, extract_dns(packets), dhcp_resolver)


def test_empty_capture():
    assert summarize_capture([], []) == CaptureSummary(0, 0, 0, False)


def test_netatmo_footprint():
    summary = _summarize(netatmo_trace())

    assert summary == CaptureSummary(distinct_endpoints=2, distinct_domains=1, hardcoded_ips=0)
    assert summary.to_dict() == {
        "distinct_endpoints": 2,
        "distinct_domains": 1,
        "hardcoded_ips": 0,
        "rogue_resolver": False,
    }


def test_unresolved_destination_is_hardcoded():
    packets = ordered(
        lookup(0.0, NETATMO_HOST, [NETATMO_IP], txid=1)
        + tcp_session(1.0, NETATMO_IP, 25050, sport=50000)
        + tcp_session(20.0, NETATMO_IP, 25050, sport=50001)
        + tcp_session(40.0, "203.0.113.9", 443, sport=50002)
    )

    summary = _summarize(packets)

    assert summary.hardcoded_ips == 1
    assert summary.distinct_endpoints == 3


def test_lookup_after_first_contact_still_counts_as_hardcoded():
    packets = ordered(
        tcp_session(0.0, NETATMO_IP, 25050, sport=50000) + lookup(5.0, NETATMO_HOST, [NETATMO_IP], txid=1)
    )
    assert _summarize(packets).hardcoded_ips == 1


def test_multicast_and_remote_initiated_are_not_endpoints():
    summary = _summarize(bulb_trace(hours=1))
    assert summary.distinct_endpoints == 2

    inbound = [tcp(0.0, "203.0.113.50", 8080, SYN, inbound=True)]
    assert _summarize(inbound).distinct_endpoints == 0


def test_rogue_resolver():
    packets = ordered(
        lookup(0.0, NETATMO_HOST, [NETATMO_IP], txid=1)
        + lookup(10.0, "time.example.com", ["192.0.2.1"], txid=2, resolver="8.8.8.8", sport=40002)
    )

    assert _summarize(packets, IPv4Address(RESOLVER)).rogue_resolver
    assert not _summarize(packets).rogue_resolver
    summary = _summarize(packets, IPv4Address(RESOLVER))
    assert summary.distinct_domains == 2
    assert summary.distinct_endpoints == 2
