"""iotfence: least-privilege network policies for consumer IoT devices.

Core modules
------------
policy/               Policy model, JSON codec, lint, English rendering
traffic/              pcap reading, flow and DNS tracking, footprint summaries
synth.py              Learn a policy from observed traffic
compiler/             Rule IR, iptables and dnsmasq emitters, IR interpreter
monitor/              Reference monitor (verdicts, DNS bindings, rate windows)
settings.py           Configuration (iotfence.yaml, env vars)
cli/                  Command-line front end

Public API
----------
- ``parse_policy`` / ``serialize_policy``: policy documents
- ``synthesize_policy``: learn a policy from flows and DNS transactions
- ``compile_policy``: lower a policy to enforcement rules
- ``replay``: evaluate a packet trace against a policy
"""

from iotfence.compiler import compile_policy, emit_dns_forwarder, emit_netfilter
from iotfence.monitor import Monitor, replay
from iotfence.policy import DevicePolicy, explain_policy, parse_policy, serialize_policy, validate_policy
from iotfence.synth import DeviceIdentity, SynthOptions, synthesize_policy

__version__ = "0.1.0"

__all__ = [
    "DeviceIdentity",
    "DevicePolicy",
    "Monitor",
    "SynthOptions",
    "compile_policy",
    "emit_dns_forwarder",
    "emit_netfilter",
    "explain_policy",
    "parse_policy",
    "replay",
    "serialize_policy",
    "synthesize_policy",
    "validate_policy",
]
