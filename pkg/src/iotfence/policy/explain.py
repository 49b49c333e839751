"""Render a policy as plain English, one sentence per rule.

Example::

    >>> print(explain_policy(policy, subject="This light bulb"))
    This light bulb may look up api.lightbulbs.io (A records) only through 192.168.1.1.
    This light bulb will not send more than 10 MB of data per week to api.lightbulbs.io, over TCP port 443.
"""

from __future__ import annotations

from iotfence.policy.models import ConnectionRule, DevicePolicy, DnsQueryRule, DnsReplyRule
from iotfence.policy.rates import BandwidthSpec, RateSpec, Schedule

_BYTE_UNITS = {"": "bytes", "K": "KB", "M": "MB", "G": "GB"}


def format_volume(bandwidth: BandwidthSpec) -> str:
    return f"{bandwidth.amount} {_BYTE_UNITS[bandwidth.multiplier]}"


def _rate_phrase(rate: RateSpec) -> str:
    return f"at most {rate.count} per {rate.unit.value}"


def _schedule_phrase(schedule: Schedule) -> str:
    return f"only between {schedule.start:%H:%M} and {schedule.end:%H:%M}"


def explain_query(rule: DnsQueryRule, subject: str) -> str:
    return f"{subject} may look up {rule.qname} ({rule.qtype} records) only through {rule.resolver}."


def explain_reply(rule: DnsReplyRule, subject: str) -> str:
    return f"Answers to {rule.qtype} lookups of {rule.qname} must be addresses in {rule.answers}."


def explain_connection(rule: ConnectionRule, subject: str) -> str:
    service = f"{rule.proto} port {rule.dstport}"
    if rule.max_bw_out is not None:
        head = (
            f"{subject} will not send more than {format_volume(rule.max_bw_out)} of data "
            f"per {rule.max_bw_out.unit.value} to {rule.dest}, over {service}"
        )
    else:
        head = f"{subject} may connect to {rule.dest} on {service}"

    clauses = []
    if rule.freq is not None:
        clauses.append(_rate_phrase(rule.freq))
    if rule.schedule is not None:
        clauses.append(_schedule_phrase(rule.schedule))
    if rule.max_packet_size is not None:
        clauses.append(f"in packets of at most {rule.max_packet_size} bytes")
    return ", ".join([head, *clauses]) + "."


def explain_policy(policy: DevicePolicy, subject: str = "This device") -> str:
    """Deterministic English rendering of ``policy``."""
    if policy.is_deny_all:
        return f"{subject} may not communicate at all."

    sentences = [explain_query(q, subject) for q in policy.allowed_dns_queries]
    sentences += [explain_reply(r, subject) for r in policy.allowed_dns_replies]
    sentences += [explain_connection(c, subject) for c in policy.allowed_connections]
    return "\n".join(sentences)
