"""iptables script emitter.

Rules go into ``nat PREROUTING`` by default, matching the deployed access
point setup: the nat table only sees the first packet of each connection,
so ``-m limit`` bounds new connections rather than packets. The
``filter-forward`` chain mode writes conventional FORWARD rules with a
conntrack accept for replies and a real DROP tail.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable

from iotfence.compiler.ir import Action, Match, RuleIR
from iotfence.errors import UnsupportedRuleError
from iotfence.policy.explain import format_volume
from iotfence.policy.rates import TimeUnit, format_bandwidth, format_rate, format_schedule

logger = logging.getLogger(__name__)

NAT_PREROUTING = "nat-prerouting"
FILTER_FORWARD = "filter-forward"

_CHAIN_PREFIX = {
    NAT_PREROUTING: ["iptables", "-t", "nat", "-A", "PREROUTING"],
    FILTER_FORWARD: ["iptables", "-A", "FORWARD"],
}

# -m limit knows no week unit
_LIMIT_UNITS = {
    TimeUnit.SECOND: "second",
    TimeUnit.MINUTE: "minute",
    TimeUnit.HOUR: "hour",
    TimeUnit.DAY: "day",
}


def _match_args(match: Match) -> list[str]:
    args: list[str] = []
    if match.in_interface:
        args += ["-i", match.in_interface]
    if match.src_ip is not None:
        args += ["-s", str(match.src_ip)]
    elif match.src_mac:
        args += ["-m", "mac", "--mac-source", match.src_mac]
    if match.dst is not None:
        dst = str(match.dst.network_address) if match.dst.prefixlen == 32 else str(match.dst)
        args += ["-d", dst]
    if match.proto:
        args += ["-p", match.proto]
    if match.dst_port is not None:
        args += ["--dport", str(match.dst_port)]
    return args


def unsupported_bounds(rule: RuleIR) -> list[str]:
    """Human-readable bounds of ``rule`` that have no netfilter lowering."""
    notes = []
    if rule.limit is not None and rule.limit.unit not in _LIMIT_UNITS:
        notes.append(f"rate {format_rate(rule.limit)} (no week unit in -m limit)")
    if rule.max_bw_out is not None:
        notes.append(f"max-bw-out {format_bandwidth(rule.max_bw_out)} ({format_volume(rule.max_bw_out)})")
    if rule.max_packet_size is not None:
        notes.append(f"max-packet-size {rule.max_packet_size}")
    if rule.schedule is not None:
        notes.append(f"schedule {format_schedule(rule.schedule)}")
    return notes


def format_accept(rule: RuleIR, chain: str = NAT_PREROUTING) -> str:
    """Render one ACCEPT rule as an iptables command line."""
    args = [*_CHAIN_PREFIX[chain], *_match_args(rule.match)]
    if rule.limit is not None and rule.limit.unit in _LIMIT_UNITS:
        args += ["-m", "limit", "--limit", f"{rule.limit.count}/{_LIMIT_UNITS[rule.limit.unit]}"]
    args += ["-j", "ACCEPT"]
    return " ".join(args)


def _default_drop(drop: RuleIR | None, chain: str) -> list[str]:
    if chain == FILTER_FORWARD:
        match = _match_args(drop.match) if drop is not None else []
        return ["", "# default deny", " ".join([*_CHAIN_PREFIX[chain], *match, "-j", "DROP"])]

    lines = [
        "",
        "# default deny: anything from the device not accepted above is dropped,",
        "# replies to accepted connections are admitted by connection tracking.",
        "# Install in the filter table, e.g.:",
    ]
    if drop is not None:
        lines.append("#   " + " ".join(["iptables", "-A", "FORWARD", *_match_args(drop.match), "-j", "DROP"]))
    else:
        lines.append("#   iptables -P FORWARD DROP")
    return lines


def emit_netfilter(ir: Iterable[RuleIR], chain: str = NAT_PREROUTING, *, strict: bool = False) -> str:
    """Render the ACCEPT rules of ``ir`` as a shell script.

    Bounds iptables cannot express are written as ``# unsupported:`` comments
    and the rule is emitted without them; with ``strict`` they raise
    UnsupportedRuleError instead.
    """
    if chain not in _CHAIN_PREFIX:
        raise ValueError(f"unknown chain {chain!r}; expected one of {', '.join(_CHAIN_PREFIX)}")
    rules = list(ir)
    lines = ["#!/bin/sh"]
    if chain == FILTER_FORWARD:
        lines.append("iptables -A FORWARD -m conntrack --ctstate ESTABLISHED,RELATED -j ACCEPT")

    seen: set[str] = set()
    for rule in rules:
        if rule.action is not Action.ACCEPT:
            continue
        notes = unsupported_bounds(rule)
        if notes and strict:
            raise UnsupportedRuleError(f"{rule.rule_id}: {'; '.join(notes)}")
        for note in notes:
            logger.warning("%s: %s is not enforced by netfilter", rule.rule_id, note)
            lines.append(f"# unsupported: {rule.rule_id}: {note}")
        line = format_accept(rule, chain)
        if line in seen:
            continue
        seen.add(line)
        lines.append(line)

    drop = next((r for r in rules if r.action is Action.DROP), None)
    lines += _default_drop(drop, chain)
    return "\n".join(lines) + "\n"
