"""Policy linting: non-fatal findings on structurally valid policies.

A policy that parses is enforceable, but may still leave room for abuse:
a device allowed to reach its vendor's servers could send gigabytes to
them, or a lookup with no reply rule accepts any answer. These checks
surface such gaps without rejecting the policy.
"""

from __future__ import annotations

from dataclasses import dataclass

from iotfence.policy.models import DevicePolicy, connection_rule_id, query_rule_id, reply_rule_id

NO_RATE_BOUND = "no-rate-bound"
NO_BYTE_BOUND = "no-byte-bound"
UNCONSTRAINED_ANSWERS = "unconstrained-answers"
ANY_ANSWER = "any-answer"
UNUSED_REPLY_RULE = "unused-reply-rule"


@dataclass(frozen=True)
class PolicyWarning:
    """Result of a single lint check against one rule."""

    rule_id: str
    code: str
    message: str


def validate_policy(policy: DevicePolicy) -> list[PolicyWarning]:
    """Return warnings in rule order; an empty list means nothing to flag."""
    warnings: list[PolicyWarning] = []
    queried = {(q.qtype, q.qname) for q in policy.allowed_dns_queries}
    replied = {(r.qtype, r.qname) for r in policy.allowed_dns_replies}

    for i, query in enumerate(policy.allowed_dns_queries):
        if (query.qtype, query.qname) not in replied:
            warnings.append(
                PolicyWarning(
                    query_rule_id(i),
                    UNCONSTRAINED_ANSWERS,
                    f"{query.qtype} lookups of {query.qname} have no reply rule; any answer is accepted",
                )
            )

    for i, reply in enumerate(policy.allowed_dns_replies):
        if reply.answers.prefixlen == 0:
            warnings.append(
                PolicyWarning(
                    reply_rule_id(i),
                    ANY_ANSWER,
                    f"answers for {reply.qname} are bounded by {reply.answers}, which matches every address",
                )
            )
        if (reply.qtype, reply.qname) not in queried:
            warnings.append(
                PolicyWarning(
                    reply_rule_id(i),
                    UNUSED_REPLY_RULE,
                    f"reply rule for {reply.qname} has no matching query rule and can never apply",
                )
            )

    for i, conn in enumerate(policy.allowed_connections):
        label = f"{conn.proto}:{conn.dstport} to {conn.dest}"
        if conn.freq is None:
            warnings.append(
                PolicyWarning(
                    connection_rule_id(i),
                    NO_RATE_BOUND,
                    f"no connection-rate bound on {label}; the device may open unlimited connections",
                )
            )
        if conn.max_bw_out is None:
            warnings.append(
                PolicyWarning(
                    connection_rule_id(i),
                    NO_BYTE_BOUND,
                    f"no byte/bandwidth bound on {label}; the device may send unlimited data",
                )
            )
    return warnings
