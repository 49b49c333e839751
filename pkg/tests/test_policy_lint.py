from __future__ import annotations

import json

from iotfence.policy import explain_policy, parse_policy, validate_policy
from iotfence.policy.validation import (
    ANY_ANSWER,
    NO_BYTE_BOUND,
    NO_RATE_BOUND,
    UNCONSTRAINED_ANSWERS,
    UNUSED_REPLY_RULE,
)
from tests.pcaps import DENY_ALL_POLICY, NETATMO_POLICY

BULB_POLICY = json.dumps(
    {
        "Light Bulb": {
            "MACAddr": "d0:73:d5:01:02:03",
            "AllowedDNSQueries": [{"type": "A", "query": "api.lightbulbs.io", "resolver": "192.168.1.1"}],
            "AllowedDNSReplies": [{"type": "A", "query": "api.lightbulbs.io", "answers": "52.1.0.0/16"}],
            "AllowedConnections": [
                {
                    "dest": "api.lightbulbs.io",
                    "proto": "TCP",
                    "dstport": "443",
                    "max-bw-out": "10M/w",
                    "schedule": "06:00-23:00",
                }
            ],
        }
    }
)


def test_netatmo_policy_warns_about_unbounded_bytes():
    warnings = validate_policy(parse_policy(NETATMO_POLICY))

    assert [(w.rule_id, w.code) for w in warnings] == [("connections[0]", NO_BYTE_BOUND)]
    assert "TCP:25050" in warnings[0].message


def test_deny_all_has_no_warnings():
    assert validate_policy(parse_policy(DENY_ALL_POLICY)) == []


def test_query_without_reply_rule_is_unconstrained():
    document = json.loads(NETATMO_POLICY)
    document["Netatmo Weather Station"]["AllowedDNSReplies"] = []

    codes = {(w.rule_id, w.code) for w in validate_policy(parse_policy(json.dumps(document)))}

    assert ("dns_queries[0]", UNCONSTRAINED_ANSWERS) in codes


def test_reply_rule_findings():
    document = json.loads(NETATMO_POLICY)
    document["Netatmo Weather Station"]["AllowedDNSReplies"] = [
        {"type": "A", "query": "netcom.netatmo.net", "answers": "0.0.0.0/0"},
        {"type": "A", "query": "cdn.netatmo.net", "answers": "10.0.0.0/8"},
    ]
    document["Netatmo Weather Station"]["AllowedConnections"][0]["max-bw-out"] = "1M/d"

    codes = [(w.rule_id, w.code) for w in validate_policy(parse_policy(json.dumps(document)))]

    assert codes == [("dns_replies[0]", ANY_ANSWER), ("dns_replies[1]", UNUSED_REPLY_RULE)]


def test_rule_without_rate_is_flagged():
    codes = {w.code for w in validate_policy(parse_policy(BULB_POLICY))}
    assert codes == {NO_RATE_BOUND}


def test_explain_netatmo():
    text = explain_policy(parse_policy(NETATMO_POLICY))

    assert text.splitlines() == [
        "This device may look up netcom.netatmo.net (A records) only through 192.168.1.1.",
        "Answers to A lookups of netcom.netatmo.net must be addresses in 62.210.92.0/24.",
        "This device may connect to netcom.netatmo.net on TCP port 25050, at most 6 per hour.",
    ]


def test_explain_bandwidth_rule():
    text = explain_policy(parse_policy(BULB_POLICY), subject="This light bulb")

    assert (
        "This light bulb will not send more than 10 MB of data per week to api.lightbulbs.io, "
        "over TCP port 443, only between 06:00 and 23:00."
    ) in text.splitlines()


def test_explain_deny_all():
    assert explain_policy(parse_policy(DENY_ALL_POLICY)) == "This device may not communicate at all."


def test_explain_is_deterministic():
    policy = parse_policy(BULB_POLICY)
    assert explain_policy(policy) == explain_policy(parse_policy(BULB_POLICY))
