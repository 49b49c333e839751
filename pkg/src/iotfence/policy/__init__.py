"""Policy model, grammar, codec, lint and English rendering."""

from iotfence.policy.codec import (
    load_policy,
    parse_policy,
    policy_from_dict,
    policy_to_dict,
    save_policy,
    serialize_policy,
)
from iotfence.policy.explain import explain_policy
from iotfence.policy.models import (
    ConnectionRule,
    DevicePolicy,
    DnsQueryRule,
    DnsReplyRule,
    connection_rule_id,
    query_rule_id,
    reply_rule_id,
)
from iotfence.policy.rates import (
    BandwidthSpec,
    RateSpec,
    Schedule,
    TimeUnit,
    format_bandwidth,
    format_rate,
    parse_bandwidth,
    parse_rate,
)
from iotfence.policy.validation import PolicyWarning, validate_policy

__all__ = [
    "BandwidthSpec",
    "ConnectionRule",
    "DevicePolicy",
    "DnsQueryRule",
    "DnsReplyRule",
    "PolicyWarning",
    "RateSpec",
    "Schedule",
    "TimeUnit",
    "connection_rule_id",
    "explain_policy",
    "format_bandwidth",
    "format_rate",
    "load_policy",
    "parse_bandwidth",
    "parse_policy",
    "parse_rate",
    "policy_from_dict",
    "policy_to_dict",
    "query_rule_id",
    "reply_rule_id",
    "save_policy",
    "serialize_policy",
    "validate_policy",
]
