"""dnsmasq whitelist emitter.

``no-resolv`` stops dnsmasq from using the host's resolvers, each permitted
name gets a ``server=`` forward, and every other lookup is answered with the
sinkhole address.
"""

from __future__ import annotations

from collections.abc import Iterable
from ipaddress import IPv4Address

from iotfence.compiler.ir import DEFAULT_SINKHOLE, WILDCARD, Action, RuleIR


def emit_dns_forwarder(ir: Iterable[RuleIR], upstream: IPv4Address | str | None = None) -> str:
    """Render dnsmasq configuration; forwards go to ``upstream`` or, if None, each rule's resolver."""
    rules = list(ir)
    forwards = sorted(
        {
            (rule.qname, str(upstream if upstream is not None else rule.resolver))
            for rule in rules
            if rule.action is Action.FORWARD_DNS
        }
    )
    servers = [f"server=/{qname}/{server}" for qname, server in forwards]
    sinkhole = next(
        (r.address for r in rules if r.action is Action.SINKHOLE_DNS and r.address is not None),
        DEFAULT_SINKHOLE,
    )
    lines = ["no-resolv", *servers, f"address=/{WILDCARD}/{sinkhole}"]
    return "\n".join(lines) + "\n"
