"""Reference monitor: verdicts, DNS bindings, rate windows, match statistics."""

from iotfence.monitor.bindings import BindingTable
from iotfence.monitor.engine import (
    Monitor,
    MonitorState,
    candidate_rules,
    charge_bandwidth,
    evaluate_packet,
    replay,
)
from iotfence.monitor.stats import Decision, MatchStats, Reason, Verdict
from iotfence.monitor.windows import BandwidthResult, ByteWindow, RateWindow

__all__ = [
    "BandwidthResult",
    "BindingTable",
    "ByteWindow",
    "Decision",
    "MatchStats",
    "Monitor",
    "MonitorState",
    "RateWindow",
    "Reason",
    "Verdict",
    "candidate_rules",
    "charge_bandwidth",
    "evaluate_packet",
    "replay",
]
