"""S7-style register write protocol (simplified), served on TCP port 102.

This is the range's stand-in for an S7 data-write channel: a fixed magic,
a message type byte, and a big-endian body.  It exists so RTU input
registers have a second, non-Modbus write surface.

    write request:  53 37 01 | seq:u16 | area:u8 | start:u16 | count:u16 | count*u16
    write ack:      53 37 81 | seq:u16 | result:u8          (0 = accepted)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Union

from ..errors import S7BadMagic, S7Truncated

S7_PORT = 102

MAGIC = b"\x53\x37"  # "S7"
MSG_WRITE = 0x01
MSG_ACK = 0x81

AREA_INPUT_REGS = 0x04

MAX_WRITE_VALUES = 64

_HEAD = struct.Struct(">2sB")
_WRITE_FIXED = struct.Struct(">HBHH")
_ACK_FIXED = struct.Struct(">HB")


@dataclass(frozen=True)
class S7WriteRequest:
    seq: int
    area: int
    start: int
    values: tuple


@dataclass(frozen=True)
class S7WriteAck:
    seq: int
    result: int  # 0 = accepted, nonzero = refused


def encode_s7_write(req: S7WriteRequest) -> bytes:
    if not 0 <= req.seq <= 0xFFFF:
        raise S7Truncated(f"seq out of range: {req.seq}")
    if not 0 <= req.area <= 0xFF:
        raise S7Truncated(f"area out of range: {req.area}")
    if not 0 <= req.start <= 0xFFFF:
        raise S7Truncated(f"start out of range: {req.start}")
    if not 1 <= len(req.values) <= MAX_WRITE_VALUES:
        raise S7Truncated(f"value count out of range: {len(req.values)}")
    for v in req.values:
        if not 0 <= v <= 0xFFFF:
            raise S7Truncated(f"value out of range: {v}")
    return (
        _HEAD.pack(MAGIC, MSG_WRITE)
        + _WRITE_FIXED.pack(req.seq, req.area, req.start, len(req.values))
        + struct.pack(">%dH" % len(req.values), *req.values)
    )


def encode_s7_ack(ack: S7WriteAck) -> bytes:
    if not 0 <= ack.seq <= 0xFFFF:
        raise S7Truncated(f"seq out of range: {ack.seq}")
    if not 0 <= ack.result <= 0xFF:
        raise S7Truncated(f"result out of range: {ack.result}")
    return _HEAD.pack(MAGIC, MSG_ACK) + _ACK_FIXED.pack(ack.seq, ack.result)


def decode_s7(data: bytes) -> Union[S7WriteRequest, S7WriteAck]:
    if len(data) < 3:
        raise S7Truncated(f"frame needs at least 3 bytes, got {len(data)}")
    magic, msg_type = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise S7BadMagic(f"bad magic {magic.hex()}")
    body = data[3:]
    if msg_type == MSG_WRITE:
        if len(body) < _WRITE_FIXED.size:
            raise S7Truncated("write header incomplete")
        seq, area, start, count = _WRITE_FIXED.unpack_from(body)
        if not 1 <= count <= MAX_WRITE_VALUES:
            raise S7Truncated(f"value count out of range: {count}")
        expected = _WRITE_FIXED.size + 2 * count
        if len(body) < expected:
            raise S7Truncated(f"write body announced {count} values, frame too short")
        if len(body) > expected:
            raise S7Truncated(f"{len(body) - expected} trailing bytes after write body")
        values = struct.unpack(">%dH" % count, body[_WRITE_FIXED.size:])
        return S7WriteRequest(seq=seq, area=area, start=start, values=values)
    if msg_type == MSG_ACK:
        if len(body) < _ACK_FIXED.size:
            raise S7Truncated("ack body incomplete")
        if len(body) > _ACK_FIXED.size:
            raise S7Truncated(f"{len(body) - _ACK_FIXED.size} trailing bytes after ack")
        seq, result = _ACK_FIXED.unpack_from(body)
        return S7WriteAck(seq=seq, result=result)
    raise S7Truncated(f"unknown message type {msg_type:#04x}")
