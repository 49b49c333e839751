"""Classic pcap reader producing PacketRecords.

Frames are decoded with dpkt (Ethernet → IPv4 → TCP/UDP) and DNS payloads on
port 53 with dnslib. Only classic pcap with Ethernet link type is accepted;
both byte orders and microsecond/nanosecond variants are handled by dpkt.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator
from ipaddress import IPv4Address
from pathlib import Path

import dpkt
from dnslib import QTYPE, DNSError, DNSRecord

from iotfence.errors import FormatError
from iotfence.policy.models import normalize_mac
from iotfence.traffic.records import MICROS, DnsAnswer, DnsMessage, PacketRecord, Proto, TcpFlags

logger = logging.getLogger(__name__)

DNS_PORT = 53


def mac_to_str(raw: bytes) -> str:
    return ":".join(f"{b:02x}" for b in raw)


def decode_dns(payload: bytes) -> DnsMessage | None:
    """Decode a DNS message; returns None for payloads without a question."""
    record = DNSRecord.parse(payload)
    if not record.questions:
        return None
    question = record.questions[0]
    is_response = bool(record.header.qr)
    answers: list[DnsAnswer] = []
    if is_response:
        for rr in record.rr:
            address = IPv4Address(str(rr.rdata)) if rr.rtype == QTYPE.A else None
            answers.append(
                DnsAnswer(
                    name=str(rr.rname).rstrip(".").lower(),
                    rtype=QTYPE.get(rr.rtype),
                    ttl=int(rr.ttl),
                    address=address,
                )
            )
    return DnsMessage(
        is_response=is_response,
        txid=record.header.id,
        qtype=QTYPE.get(question.qtype),
        qname=str(question.qname).rstrip(".").lower(),
        answers=tuple(answers),
    )


class CaptureReader:
    """Iterable over the PacketRecords of one capture file.

    Counters are filled while iterating:
      skipped    frames that are not IPv4 or could not be decoded
      malformed  subset of ``skipped`` that failed to decode
      filtered   IPv4 frames to/from other MAC addresses
      dns_errors port-53 payloads that were not valid DNS
    """

    def __init__(self, path: Path | str, device_mac: str | None = None):
        self.path = Path(path)
        self.device_mac = normalize_mac(device_mac) if device_mac else None
        self.skipped = 0
        self.malformed = 0
        self.filtered = 0
        self.dns_errors = 0
        self.unordered = False

    def __iter__(self) -> Iterator[PacketRecord]:
        records = list(self._read())
        # Stable sort: a no-op on ordered captures, fixes small NIC-queue inversions.
        if any(b.timestamp < a.timestamp for a, b in zip(records, records[1:], strict=False)):
            self.unordered = True
            logger.warning("%s: packets are not in timestamp order; reordering", self.path)
            records.sort(key=lambda r: r.timestamp)
        yield from records

    def _read(self) -> Iterator[PacketRecord]:
        with open(self.path, "rb") as f:
            try:
                reader = dpkt.pcap.Reader(f)
            except (ValueError, dpkt.UnpackError) as e:
                raise FormatError(f"{self.path}: not a classic pcap file ({e})") from e
            if reader.datalink() != dpkt.pcap.DLT_EN10MB:
                raise FormatError(f"{self.path}: unsupported link type {reader.datalink()} (need Ethernet)")

            try:
                for ts, buf in reader:
                    record = self._decode(round(ts * MICROS), buf)
                    if record is not None:
                        yield record
            except dpkt.NeedData:
                logger.warning("%s: truncated packet at end of capture", self.path)

        logger.debug(
            "%s: skipped=%d malformed=%d filtered=%d dns_errors=%d",
            self.path,
            self.skipped,
            self.malformed,
            self.filtered,
            self.dns_errors,
        )

    def _decode(self, timestamp: int, buf: bytes) -> PacketRecord | None:
        try:
            eth = dpkt.ethernet.Ethernet(buf)
        except dpkt.UnpackError:
            self.skipped += 1
            self.malformed += 1
            return None
        ip = eth.data
        if not isinstance(ip, dpkt.ip.IP):
            self.skipped += 1
            return None

        src_mac, dst_mac = mac_to_str(eth.src), mac_to_str(eth.dst)
        if self.device_mac and self.device_mac not in (src_mac, dst_mac):
            self.filtered += 1
            return None

        fields = {
            "timestamp": timestamp,
            "src_mac": src_mac,
            "dst_mac": dst_mac,
            "src_ip": IPv4Address(ip.src),
            "dst_ip": IPv4Address(ip.dst),
        }
        transport = ip.data
        if ip.p in (dpkt.ip.IP_PROTO_TCP, dpkt.ip.IP_PROTO_UDP) and ip.offset == 0:
            if not isinstance(transport, dpkt.tcp.TCP | dpkt.udp.UDP):
                self.skipped += 1
                self.malformed += 1
                return None
            is_tcp = isinstance(transport, dpkt.tcp.TCP)
            payload = bytes(transport.data)
            dns = None
            if not is_tcp and DNS_PORT in (transport.sport, transport.dport) and payload:
                try:
                    dns = decode_dns(payload)
                except (DNSError, ValueError, IndexError) as e:
                    self.dns_errors += 1
                    logger.debug("Undecodable DNS payload at %d: %s", timestamp, e)
            return PacketRecord(
                **fields,
                proto=Proto.TCP if is_tcp else Proto.UDP,
                src_port=transport.sport,
                dst_port=transport.dport,
                payload_len=len(payload),
                tcp_flags=TcpFlags(transport.flags) if is_tcp else TcpFlags.NONE,
                dns=dns,
            )

        payload_len = len(transport) if isinstance(transport, bytes | bytearray) else len(bytes(transport))
        return PacketRecord(**fields, proto=Proto.OTHER, payload_len=payload_len)


def read_capture(path: Path | str, device_mac: str | None = None) -> CaptureReader:
    """Open ``path`` for iteration; counters are available on the returned reader."""
    return CaptureReader(path, device_mac)
