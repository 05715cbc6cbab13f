"""Independent reference dissector used by the test suite.

Deliberately imports nothing from the package under test: it re-derives the
pcap container, Ethernet/IPv4/TCP/UDP headers, the Modbus/TCP ADU grammar,
and the sealed-record cipher from their documented wire formats using only
the standard library.  Agreement between this module and the package is what
the evidence tests actually assert.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple


class DissectError(ValueError):
    pass


# ---------------------------------------------------------------------------
# pcap container + packet headers
# ---------------------------------------------------------------------------

PCAP_MAGIC_LE = 0xA1B2C3D4
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16


@dataclass
class RefPacket:
    ts_us: int
    src_mac: bytes
    dst_mac: bytes
    src_ip: str
    dst_ip: str
    proto: str  # "tcp" | "udp"
    src_port: int
    dst_port: int
    seq: Optional[int]  # TCP only
    ip_ident: int
    payload: bytes
    orig_len: int
    incl_len: int


def read_pcap_file(path) -> Tuple[dict, List[RefPacket]]:
    """Parse a pcap file; returns (global header fields, packets).

    Also enforces the structural invariant that the sum of record sizes
    (16-byte header + captured bytes) equals the file size minus the
    24-byte global header.
    """
    data = Path(path).read_bytes()
    if len(data) < GLOBAL_HEADER_LEN:
        raise DissectError("file shorter than a pcap global header")
    magic, vmaj, vmin, thiszone, sigfigs, snaplen, linktype = struct.unpack_from(
        "<IHHiIII", data, 0
    )
    if magic != PCAP_MAGIC_LE:
        raise DissectError(f"bad magic {magic:#010x}")
    if (vmaj, vmin) != (2, 4):
        raise DissectError(f"unsupported pcap version {vmaj}.{vmin}")
    if linktype != 1:
        raise DissectError(f"unsupported linktype {linktype}")
    header = {
        "magic": magic,
        "version": (vmaj, vmin),
        "thiszone": thiszone,
        "sigfigs": sigfigs,
        "snaplen": snaplen,
        "linktype": linktype,
    }
    packets: List[RefPacket] = []
    offset = GLOBAL_HEADER_LEN
    record_bytes = 0
    while offset < len(data):
        if offset + RECORD_HEADER_LEN > len(data):
            raise DissectError("truncated record header")
        ts_sec, ts_usec, incl_len, orig_len = struct.unpack_from("<IIII", data, offset)
        offset += RECORD_HEADER_LEN
        if offset + incl_len > len(data):
            raise DissectError("record body runs past end of file")
        if incl_len > snaplen:
            raise DissectError(f"captured length {incl_len} exceeds snaplen {snaplen}")
        frame = data[offset : offset + incl_len]
        offset += incl_len
        record_bytes += RECORD_HEADER_LEN + incl_len
        packets.append(_parse_frame(ts_sec * 1_000_000 + ts_usec, frame, orig_len, incl_len))
    if record_bytes != len(data) - GLOBAL_HEADER_LEN:
        raise DissectError("record sizes do not sum to the file size")
    return header, packets


def _parse_frame(ts_us: int, frame: bytes, orig_len: int, incl_len: int) -> RefPacket:
    if len(frame) < 14:
        raise DissectError("frame shorter than an Ethernet header")
    dst_mac, src_mac, ethertype = frame[:6], frame[6:12], struct.unpack_from("!H", frame, 12)[0]
    if ethertype != 0x0800:
        raise DissectError(f"unexpected ethertype {ethertype:#06x}")
    ip = frame[14:]
    if len(ip) < 20:
        raise DissectError("IPv4 header truncated")
    vihl = ip[0]
    if vihl >> 4 != 4:
        raise DissectError("not IPv4")
    ihl = (vihl & 0x0F) * 4
    total_len, ident = struct.unpack_from("!HH", ip, 2)
    proto_num = ip[9]
    src_ip = ".".join(str(b) for b in ip[12:16])
    dst_ip = ".".join(str(b) for b in ip[16:20])
    l4 = ip[ihl:total_len] if len(ip) >= total_len else ip[ihl:]
    if proto_num == 6:
        if len(l4) < 20:
            raise DissectError("TCP header truncated")
        src_port, dst_port, seq = struct.unpack_from("!HHI", l4, 0)
        data_off = (l4[12] >> 4) * 4
        payload = l4[data_off:]
        proto = "tcp"
    elif proto_num == 17:
        if len(l4) < 8:
            raise DissectError("UDP header truncated")
        src_port, dst_port, udp_len, _ck = struct.unpack_from("!HHHH", l4, 0)
        payload = l4[8:udp_len] if len(l4) >= udp_len else l4[8:]
        seq = None
        proto = "udp"
    else:
        raise DissectError(f"unexpected IP protocol {proto_num}")
    return RefPacket(
        ts_us=ts_us,
        src_mac=src_mac,
        dst_mac=dst_mac,
        src_ip=src_ip,
        dst_ip=dst_ip,
        proto=proto,
        src_port=src_port,
        dst_port=dst_port,
        seq=seq,
        ip_ident=ident,
        payload=payload,
        orig_len=orig_len,
        incl_len=incl_len,
    )


# ---------------------------------------------------------------------------
# Modbus/TCP
# ---------------------------------------------------------------------------

MODBUS_PORT = 502

_FC_NAMES = {
    0x01: "read_coils",
    0x03: "read_holding",
    0x04: "read_input",
    0x05: "write_coil",
    0x06: "write_register",
    0x0F: "write_coils",
    0x10: "write_registers",
}


def dissect_modbus(payload: bytes, role: str) -> dict:
    """Summarize one Modbus/TCP ADU; `role` is "request" or "response"."""
    if len(payload) < 8:
        raise DissectError("ADU shorter than MBAP + function code")
    txn_id, proto_id, length, unit_id = struct.unpack_from(">HHHB", payload, 0)
    if proto_id != 0:
        raise DissectError(f"MBAP protocol id {proto_id}")
    if length != len(payload) - 6:
        raise DissectError(f"MBAP length {length} != {len(payload) - 6} remaining bytes")
    fc = payload[7]
    body = payload[8:]
    out = {"txn_id": txn_id, "unit_id": unit_id, "fc": fc}
    if fc & 0x80:
        if role != "response" or len(body) != 1:
            raise DissectError("malformed exception response")
        out.update(name="exception", function=fc & 0x7F, code=body[0])
        return out
    name = _FC_NAMES.get(fc)
    if name is None:
        raise DissectError(f"unknown function code {fc:#04x}")
    out["name"] = name
    if role == "request":
        if fc in (0x01, 0x03, 0x04, 0x05, 0x06):
            if len(body) != 4:
                raise DissectError(f"{name} request body must be 4 bytes")
            a, b = struct.unpack(">HH", body)
            if fc == 0x05:
                if b not in (0x0000, 0xFF00):
                    raise DissectError("coil write value not 0x0000/0xFF00")
                out.update(addr=a, on=(b == 0xFF00))
            elif fc == 0x06:
                out.update(addr=a, value=b)
            else:
                out.update(addr=a, qty=b)
        elif fc in (0x0F, 0x10):
            if len(body) < 5:
                raise DissectError(f"{name} request body too short")
            addr, qty, count = struct.unpack_from(">HHB", body, 0)
            if len(body) != 5 + count:
                raise DissectError(f"{name} request data length mismatch")
            out.update(addr=addr, qty=qty)
            if fc == 0x10:
                if count != 2 * qty:
                    raise DissectError("register write byte count mismatch")
                out["values"] = list(struct.unpack(">%dH" % qty, body[5:]))
        return out
    if role != "response":
        raise DissectError(f"role must be request or response, got {role!r}")
    if fc in (0x01,):
        count = body[0] if body else -1
        if count < 1 or len(body) != 1 + count:
            raise DissectError("bit-read response byte count mismatch")
        bits = []
        for i in range(count * 8):
            bits.append(bool((body[1 + i // 8] >> (i % 8)) & 1))
        out.update(bits=bits)
    elif fc in (0x03, 0x04):
        count = body[0] if body else -1
        if count < 2 or count % 2 or len(body) != 1 + count:
            raise DissectError("register-read response byte count mismatch")
        out["values"] = list(struct.unpack(">%dH" % (count // 2), body[1:]))
    elif fc in (0x05, 0x06):
        if len(body) != 4:
            raise DissectError("write echo must be 4 bytes")
        a, b = struct.unpack(">HH", body)
        out.update(addr=a, value=b)
    elif fc in (0x0F, 0x10):
        if len(body) != 4:
            raise DissectError("multi-write response must be 4 bytes")
        a, b = struct.unpack(">HH", body)
        out.update(addr=a, qty=b)
    return out


def modbus_records(packets: Iterable[RefPacket]) -> List[Tuple[RefPacket, dict]]:
    """Dissect every port-502 packet with a payload; raises on any failure."""
    out = []
    for pkt in packets:
        if MODBUS_PORT not in (pkt.src_port, pkt.dst_port) or not pkt.payload:
            continue
        role = "request" if pkt.dst_port == MODBUS_PORT else "response"
        out.append((pkt, dissect_modbus(pkt.payload, role)))
    return out


# ---------------------------------------------------------------------------
# Sealed-channel records + key escrow
# ---------------------------------------------------------------------------


def parse_key_log(text: str) -> Dict[str, bytes]:
    keys: Dict[str, bytes] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key_id, hexkey = line.split(" ", 1)
        if len(hexkey) != 64:
            raise DissectError(f"key for {key_id} is not 32 bytes")
        keys[key_id] = bytes.fromhex(hexkey)
    return keys


def open_sealed_record(record: bytes, keys: Dict[str, bytes]) -> Tuple[str, bytes]:
    """Decrypt one SEAL-framed record with an escrowed key.

    Implements the documented format from scratch:
    "SEAL" u8 kid_len, kid, u32 ct_len, then tag(16) || xor-stream body
    where tag = HMAC-SHA256(key, "auth"||pt)[:16] and the keystream blocks
    are SHA256(key || tag || counter_be64).
    """
    if record[:4] != b"SEAL":
        raise DissectError("not a sealed record")
    kid_len = record[4]
    key_id = record[5 : 5 + kid_len].decode("ascii")
    (ct_len,) = struct.unpack_from(">I", record, 5 + kid_len)
    ct = record[5 + kid_len + 4 :]
    if len(ct) != ct_len:
        raise DissectError("sealed record length mismatch")
    key = keys[key_id]
    tag, body = ct[:16], ct[16:]
    stream = bytearray()
    counter = 0
    while len(stream) < len(body):
        stream += hashlib.sha256(key + tag + struct.pack(">Q", counter)).digest()
        counter += 1
    plaintext = bytes(a ^ b for a, b in zip(body, stream))
    expect = hmac.new(key, b"auth" + plaintext, hashlib.sha256).digest()[:16]
    if not hmac.compare_digest(tag, expect):
        raise DissectError(f"tag mismatch for {key_id}")
    return key_id, plaintext


def decrypt_channel(packets: Iterable[RefPacket], port: int, keys: Dict[str, bytes]) -> List[Tuple[RefPacket, str, str]]:
    """Open every sealed record to/from `port`; returns (packet, key_id, text)."""
    out = []
    for pkt in packets:
        if port not in (pkt.src_port, pkt.dst_port):
            continue
        if pkt.payload[:4] != b"SEAL":
            continue
        key_id, plaintext = open_sealed_record(pkt.payload, keys)
        out.append((pkt, key_id, plaintext.decode("utf-8", errors="replace")))
    return out


def commands_in_beacon_urls(texts: Iterable[str]) -> List[str]:
    """Pull base64 cmd= values out of decrypted task/result URLs."""
    found = []
    for text in texts:
        for line in text.split("\r\n"):
            for token in line.split(" "):
                if "?cmd=" in token:
                    blob = token.split("?cmd=", 1)[1]
                    try:
                        found.append(base64.b64decode(blob.encode(), validate=True).decode("utf-8"))
                    except Exception:
                        continue
    return found
