"""Capture parsing, flow and DNS tracking, footprint summaries."""

from iotfence.traffic.capture import CaptureReader, decode_dns, read_capture
from iotfence.traffic.dns import DnsTracker, extract_dns
from iotfence.traffic.flows import FlowMatch, FlowTable, track_flows
from iotfence.traffic.records import (
    MICROS,
    DnsAnswer,
    DnsMessage,
    DnsTransaction,
    FlowKey,
    FlowRecord,
    PacketRecord,
    Proto,
    TcpFlags,
)
from iotfence.traffic.summary import CaptureSummary, summarize_capture

__all__ = [
    "MICROS",
    "CaptureReader",
    "CaptureSummary",
    "DnsAnswer",
    "DnsMessage",
    "DnsTracker",
    "DnsTransaction",
    "FlowKey",
    "FlowMatch",
    "FlowRecord",
    "FlowTable",
    "PacketRecord",
    "Proto",
    "TcpFlags",
    "decode_dns",
    "extract_dns",
    "read_capture",
    "summarize_capture",
    "track_flows",
]
