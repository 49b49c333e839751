"""A policy learned from a trace must admit that same trace, and nothing injected on top of it."""

from __future__ import annotations

import random
from ipaddress import IPv4Address

import pytest

from iotfence.monitor import Reason, replay
from iotfence.policy import parse_policy, serialize_policy
from iotfence.policy.rates import RateSpec, TimeUnit
from iotfence.synth import DeviceIdentity, SynthOptions, synthesize_policy
from iotfence.traffic import extract_dns, track_flows
from iotfence.traffic.records import MICROS
from tests.pcaps import DEVICE_IP, DEVICE_MAC, PROFILES, lookup, mirai_augmentation, ordered, tcp_session

DEVICE = DeviceIdentity(mac=DEVICE_MAC, ip=IPv4Address(DEVICE_IP))


def _learn(packets, **options):
    flows = track_flows(packets, device_mac=DEVICE_MAC)
    policy = synthesize_policy(flows, extract_dns(packets), DEVICE, SynthOptions(**options))
    # the monitor only ever sees the serialized form
    return parse_policy(serialize_policy(policy))


@pytest.mark.parametrize("profile", sorted(PROFILES))
@pytest.mark.parametrize("aggregate_prefix", ["exact", 24])
def test_learned_policy_admits_its_trace(profile, aggregate_prefix):
    packets = PROFILES[profile]()

    verdicts, stats = replay(_learn(packets, aggregate_prefix=aggregate_prefix), packets)

    assert stats.denied_total == 0
    assert [v for v in verdicts if not v.allowed] == []


@pytest.mark.parametrize("profile", sorted(PROFILES))
def test_injected_attack_is_denied(profile):
    legit = PROFILES[profile]()
    duration = (legit[-1].timestamp - legit[0].timestamp) / MICROS
    attack = mirai_augmentation(duration)
    injected = {id(p) for p in attack}
    packets = ordered(legit + attack)

    verdicts, stats = replay(_learn(legit), packets)

    for pkt, verdict in zip(packets, verdicts, strict=True):
        assert verdict.allowed != (id(pkt) in injected), pkt
    assert stats.denied_total == 1100
    assert len(stats.extraneous) == 101
    scan_reasons = {v.reason for p, v in zip(packets, verdicts, strict=True) if p.dst_port == 23}
    assert scan_reasons == {Reason.DEFAULT_DENY}


SHARED_IP = "198.51.100.7"


def test_names_sharing_an_address_keep_their_own_counts():
    packets = ordered(
        lookup(0.0, "a.example.com", [SHARED_IP], txid=1, ttl=86400)
        + tcp_session(0.5, SHARED_IP, 443, sport=50000)
        + lookup(1.0, "b.example.com", [SHARED_IP], txid=2, ttl=60, sport=40001)
        + tcp_session(2.0, SHARED_IP, 443, sport=50001)
        + tcp_session(3.0, SHARED_IP, 443, sport=50002)
        + tcp_session(200.0, SHARED_IP, 443, sport=50003)
    )
    policy = _learn(packets, capture_duration=2 * 86400)

    verdicts, stats = replay(policy, packets)

    assert [(c.dest, c.freq) for c in policy.allowed_connections] == [
        ("a.example.com", RateSpec(2, TimeUnit.DAY)),
        ("b.example.com", RateSpec(2, TimeUnit.DAY)),
    ]
    assert stats.denied_total == 0
    opened = [v.rule_id for p, v in zip(packets, verdicts, strict=True) if p.is_syn]
    assert opened == ["connections[0]", "connections[1]", "connections[1]", "connections[0]"]


@pytest.mark.parametrize("seed", range(20))
def test_overlapping_names_replay_cleanly(seed):
    rng = random.Random(seed)
    names = ["a.example.com", "b.example.com", "c.example.com"]
    addresses = ["198.51.100.7", "198.51.100.8"]
    packets = []
    for k in range(rng.randint(1, 8)):
        answers = rng.sample(addresses, rng.randint(1, 2))
        packets += lookup(
            rng.uniform(0, 900), rng.choice(names), answers, txid=k, ttl=rng.randint(30, 600), sport=40000 + k
        )
    for k in range(rng.randint(1, 30)):
        packets += tcp_session(rng.uniform(0, 1200), rng.choice(addresses), 443, sport=50000 + k)
    packets = ordered(packets)

    _, stats = replay(_learn(packets), packets)

    assert stats.denied_total == 0
