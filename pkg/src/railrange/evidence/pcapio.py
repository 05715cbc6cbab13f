"""Classic pcap writing and reading for captured fabric frames.

Output is the libpcap 2.4 format with little-endian headers, magic
``0xA1B2C3D4``, linktype 1 (Ethernet), snaplen 65535.  Each captured frame
is synthesized into an internally consistent Ethernet + IPv4 + TCP/UDP
packet:

* MAC addresses derive from the IP (locally administered ``02:52`` prefix
  followed by the four address octets), so layer 2 and layer 3 always agree;
* the IPv4 identification field and the TCP sequence number carry the
  fabric flow id (low 16 / 32 bits), which lets the catalog resolver match
  a record back to its flow;
* checksums are zero, the usual capture-offload convention.

The reader reverses the synthesis enough for analysis: it yields timestamps,
addresses, ports, protocol, and payload per record, and validates structure
(magic, lengths) strictly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, List, Tuple

from ..errors import EvidenceError
from ..simnet import Frame

PCAP_MAGIC = 0xA1B2C3D4
PCAP_VERSION = (2, 4)
SNAPLEN = 65535
LINKTYPE_ETHERNET = 1

_GLOBAL_HEADER = struct.Struct("<IHHiIII")
_RECORD_HEADER = struct.Struct("<IIII")
_ETH_HEADER = struct.Struct("!6s6sH")
_IPV4_HEADER = struct.Struct("!BBHHHBBH4s4s")
_TCP_HEADER = struct.Struct("!HHIIBBHHH")
_UDP_HEADER = struct.Struct("!HHHH")

ETHERTYPE_IPV4 = 0x0800
IPPROTO_TCP = 6
IPPROTO_UDP = 17


def mac_for_ip(ip: str) -> bytes:
    """Deterministic locally-administered MAC for a dotted-quad address."""
    octets = bytes(int(part) for part in ip.split("."))
    return b"\x02\x52" + octets


def _ip_bytes(ip: str) -> bytes:
    return bytes(int(part) for part in ip.split("."))


def synthesize_packet(frame: Frame) -> bytes:
    """Ethernet+IPv4+TCP/UDP bytes for one fabric frame."""
    if frame.proto == "tcp":
        l4 = _TCP_HEADER.pack(
            frame.src_port,
            frame.dst_port,
            frame.flow_id & 0xFFFFFFFF,  # seq carries the flow id
            0,  # ack
            5 << 4,  # data offset: 5 words
            0x18,  # PSH|ACK
            65535,  # window
            0,  # checksum (offload)
            0,  # urgent
        )
        proto = IPPROTO_TCP
    elif frame.proto == "udp":
        l4 = _UDP_HEADER.pack(frame.src_port, frame.dst_port, 8 + len(frame.payload), 0)
        proto = IPPROTO_UDP
    else:
        raise EvidenceError(f"frame with unknown protocol {frame.proto!r}")
    total_len = 20 + len(l4) + len(frame.payload)
    ip = _IPV4_HEADER.pack(
        0x45,  # version 4, ihl 5
        0,  # tos
        total_len,
        frame.flow_id & 0xFFFF,  # identification carries the flow id
        0x4000,  # don't fragment
        64,  # ttl
        proto,
        0,  # checksum (offload)
        _ip_bytes(frame.src_ip),
        _ip_bytes(frame.dst_ip),
    )
    eth = _ETH_HEADER.pack(mac_for_ip(frame.dst_ip), mac_for_ip(frame.src_ip), ETHERTYPE_IPV4)
    return eth + ip + l4 + frame.payload


def write_pcap(path, frames: Iterable[Frame], epoch_unix_us: int) -> int:
    """Write frames (in order) as a classic pcap; returns bytes written.

    Frame timestamps are microseconds since the scenario epoch;
    ``epoch_unix_us`` anchors them to wall time.
    """
    written = 0
    with open(path, "wb") as fh:
        header = _GLOBAL_HEADER.pack(PCAP_MAGIC, *PCAP_VERSION, 0, 0, SNAPLEN, LINKTYPE_ETHERNET)
        fh.write(header)
        written += len(header)
        for frame in frames:
            packet = synthesize_packet(frame)
            abs_us = epoch_unix_us + frame.ts
            incl = min(len(packet), SNAPLEN)
            record = _RECORD_HEADER.pack(abs_us // 1_000_000, abs_us % 1_000_000, incl, len(packet))
            fh.write(record)
            fh.write(packet[:incl])
            written += len(record) + incl
    return written


@dataclass(frozen=True)
class PcapRecord:
    ts_us: int  # absolute microseconds
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    proto: str  # tcp | udp
    payload: bytes
    seq: int  # TCP sequence (0 for UDP)
    ip_ident: int
    orig_len: int
    incl_len: int


def read_pcap(path) -> List[PcapRecord]:
    """Parse a classic pcap written by this module; strict about structure."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _GLOBAL_HEADER.size:
        raise EvidenceError(f"{path}: truncated pcap global header")
    magic, vmaj, vmin, _, _, snaplen, linktype = _GLOBAL_HEADER.unpack_from(data, 0)
    if magic != PCAP_MAGIC:
        raise EvidenceError(f"{path}: bad pcap magic {magic:#x}")
    if (vmaj, vmin) != PCAP_VERSION or linktype != LINKTYPE_ETHERNET:
        raise EvidenceError(f"{path}: unsupported pcap variant {vmaj}.{vmin}/{linktype}")
    records: List[PcapRecord] = []
    offset = _GLOBAL_HEADER.size
    while offset < len(data):
        if offset + _RECORD_HEADER.size > len(data):
            raise EvidenceError(f"{path}: truncated record header at {offset}")
        ts_sec, ts_usec, incl, orig = _RECORD_HEADER.unpack_from(data, offset)
        offset += _RECORD_HEADER.size
        if incl > snaplen or offset + incl > len(data):
            raise EvidenceError(f"{path}: record at {offset} overruns the file")
        packet = data[offset : offset + incl]
        offset += incl
        records.append(_parse_packet(ts_sec * 1_000_000 + ts_usec, packet, orig))
    return records


def _parse_packet(ts_us: int, packet: bytes, orig_len: int) -> PcapRecord:
    if len(packet) < 14 + 20:
        raise EvidenceError("packet too short for Ethernet+IPv4")
    _, _, ethertype = _ETH_HEADER.unpack_from(packet, 0)
    if ethertype != ETHERTYPE_IPV4:
        raise EvidenceError(f"unexpected ethertype {ethertype:#x}")
    (vihl, _, total_len, ident, _, _, proto_num, _, src, dst) = _IPV4_HEADER.unpack_from(packet, 14)
    if vihl != 0x45:
        raise EvidenceError(f"unexpected IPv4 version/ihl {vihl:#x}")
    l4_offset = 14 + 20
    if proto_num == IPPROTO_TCP:
        sport, dport, seq, _, off_words, _, _, _, _ = _TCP_HEADER.unpack_from(packet, l4_offset)
        payload_offset = l4_offset + ((off_words >> 4) * 4)
        proto = "tcp"
    elif proto_num == IPPROTO_UDP:
        sport, dport, _, _ = _UDP_HEADER.unpack_from(packet, l4_offset)
        payload_offset = l4_offset + 8
        seq = 0
        proto = "udp"
    else:
        raise EvidenceError(f"unexpected IP protocol {proto_num}")
    expected_payload = 14 + total_len - payload_offset
    payload = packet[payload_offset:]
    if len(payload) != expected_payload and orig_len == len(packet):
        raise EvidenceError("IPv4 total length disagrees with the record")
    return PcapRecord(
        ts_us=ts_us,
        src_ip=".".join(str(b) for b in src),
        dst_ip=".".join(str(b) for b in dst),
        src_port=sport,
        dst_port=dport,
        proto=proto,
        payload=payload,
        seq=seq,
        ip_ident=ident,
        orig_len=orig_len,
        incl_len=len(packet),
    )
