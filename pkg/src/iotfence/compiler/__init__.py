"""Lowering of policies to enforcement artifacts."""

from iotfence.compiler.dnsforward import emit_dns_forwarder
from iotfence.compiler.interpreter import IrInterpreter
from iotfence.compiler.ir import Action, Match, RuleIR, compile_policy
from iotfence.compiler.netfilter import FILTER_FORWARD, NAT_PREROUTING, emit_netfilter

__all__ = [
    "FILTER_FORWARD",
    "NAT_PREROUTING",
    "Action",
    "IrInterpreter",
    "Match",
    "RuleIR",
    "compile_policy",
    "emit_dns_forwarder",
    "emit_netfilter",
]
