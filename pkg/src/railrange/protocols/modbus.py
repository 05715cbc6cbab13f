"""Modbus/TCP codec: MBAP header plus the PDU subset the range's devices speak.

Supported function codes:

    0x01 read coils            0x05 write single coil
    0x03 read holding regs     0x06 write single register
    0x04 read input regs       0x0F write multiple coils
                               0x10 write multiple registers

plus exception responses (function | 0x80, exception codes 0x01 illegal
function, 0x02 illegal data address, 0x03 illegal data value).

All integers are big-endian per the protocol.  Because a few function codes
reuse one code point for differently-shaped request and response bodies
(0x03/0x04 most prominently), decoding takes the caller's role: decode the
bytes as a request or as a response.  0x05/0x06 responses echo the request
byte-for-byte, so the same dataclass represents both directions there.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Union

from ..errors import (
    BadProtocolId,
    InvalidPdu,
    LengthMismatch,
    Truncated,
    UnknownFunction,
)

MODBUS_PORT = 502

REQUEST = "request"
RESPONSE = "response"

FC_READ_COILS = 0x01
FC_READ_HOLDING = 0x03
FC_READ_INPUT = 0x04
FC_WRITE_COIL = 0x05
FC_WRITE_REGISTER = 0x06
FC_WRITE_COILS = 0x0F
FC_WRITE_REGISTERS = 0x10

SUPPORTED_FUNCTIONS = frozenset(
    {
        FC_READ_COILS,
        FC_READ_HOLDING,
        FC_READ_INPUT,
        FC_WRITE_COIL,
        FC_WRITE_REGISTER,
        FC_WRITE_COILS,
        FC_WRITE_REGISTERS,
    }
)

EXC_ILLEGAL_FUNCTION = 0x01
EXC_ILLEGAL_ADDRESS = 0x02
EXC_ILLEGAL_VALUE = 0x03
_EXCEPTION_CODES = frozenset({EXC_ILLEGAL_FUNCTION, EXC_ILLEGAL_ADDRESS, EXC_ILLEGAL_VALUE})

MAX_READ_BITS = 2000
MAX_READ_REGISTERS = 125
MAX_WRITE_BITS = 1968
MAX_WRITE_REGISTERS = 123

_COIL_ON = 0xFF00
_COIL_OFF = 0x0000

_MBAP = struct.Struct(">HHHB")


@dataclass(frozen=True)
class MbapHeader:
    """Transaction and unit identifiers; protocol id and length are derived."""

    txn_id: int
    unit_id: int

    def _check(self) -> None:
        if not 0 <= self.txn_id <= 0xFFFF:
            raise InvalidPdu(f"txn_id out of range: {self.txn_id}")
        if not 0 <= self.unit_id <= 0xFF:
            raise InvalidPdu(f"unit_id out of range: {self.unit_id}")


@dataclass(frozen=True)
class ReadBitsRequest:
    fc: int  # FC_READ_COILS
    addr: int
    qty: int


@dataclass(frozen=True)
class ReadBitsResponse:
    fc: int
    bits: tuple


@dataclass(frozen=True)
class ReadRegistersRequest:
    fc: int  # FC_READ_HOLDING or FC_READ_INPUT
    addr: int
    qty: int


@dataclass(frozen=True)
class ReadRegistersResponse:
    fc: int
    values: tuple


@dataclass(frozen=True)
class WriteSingleCoil:
    """fc 0x05; the response echoes the request, so one type serves both."""

    addr: int
    on: bool

    fc: int = FC_WRITE_COIL


@dataclass(frozen=True)
class WriteSingleRegister:
    """fc 0x06; response echoes the request."""

    addr: int
    value: int

    fc: int = FC_WRITE_REGISTER


@dataclass(frozen=True)
class WriteMultipleCoils:
    addr: int
    bits: tuple

    fc: int = FC_WRITE_COILS


@dataclass(frozen=True)
class WriteMultipleCoilsResponse:
    addr: int
    qty: int

    fc: int = FC_WRITE_COILS


@dataclass(frozen=True)
class WriteMultipleRegisters:
    addr: int
    values: tuple

    fc: int = FC_WRITE_REGISTERS


@dataclass(frozen=True)
class WriteMultipleRegistersResponse:
    addr: int
    qty: int

    fc: int = FC_WRITE_REGISTERS


@dataclass(frozen=True)
class ExceptionResponse:
    """Response with fc | 0x80; `function` is the original function code."""

    function: int
    code: int


Pdu = Union[
    ReadBitsRequest,
    ReadBitsResponse,
    ReadRegistersRequest,
    ReadRegistersResponse,
    WriteSingleCoil,
    WriteSingleRegister,
    WriteMultipleCoils,
    WriteMultipleCoilsResponse,
    WriteMultipleRegisters,
    WriteMultipleRegistersResponse,
    ExceptionResponse,
]


def _check_u16(value: int, what: str) -> None:
    if not 0 <= value <= 0xFFFF:
        raise InvalidPdu(f"{what} out of range: {value}")


def _check_span(addr: int, qty: int, limit: int, what: str) -> None:
    _check_u16(addr, f"{what} address")
    if not 1 <= qty <= limit:
        raise InvalidPdu(f"{what} quantity out of range: {qty}")
    if addr + qty > 0x10000:
        raise InvalidPdu(f"{what} span exceeds address space: {addr}+{qty}")


def _pack_bits(bits) -> bytes:
    out = bytearray((len(bits) + 7) // 8)
    for i, bit in enumerate(bits):
        if bit:
            out[i // 8] |= 1 << (i % 8)
    return bytes(out)


def _unpack_bits(data: bytes, count: int) -> tuple:
    return tuple(bool((data[i // 8] >> (i % 8)) & 1) for i in range(count))


def _encode_pdu(pdu: Pdu) -> bytes:
    if isinstance(pdu, ReadBitsRequest):
        if pdu.fc != FC_READ_COILS:
            raise InvalidPdu(f"bad function for bit read: {pdu.fc:#x}")
        _check_span(pdu.addr, pdu.qty, MAX_READ_BITS, "bit read")
        return struct.pack(">BHH", pdu.fc, pdu.addr, pdu.qty)
    if isinstance(pdu, ReadBitsResponse):
        if pdu.fc != FC_READ_COILS:
            raise InvalidPdu(f"bad function for bit read: {pdu.fc:#x}")
        if not 1 <= len(pdu.bits) <= MAX_READ_BITS:
            raise InvalidPdu(f"bit count out of range: {len(pdu.bits)}")
        if len(pdu.bits) % 8 != 0:
            # The wire format carries only a byte count, so responses must be
            # zero-padded to a byte boundary or they cannot round-trip.
            raise InvalidPdu("bit-read response bits must be padded to a byte boundary")
        packed = _pack_bits(pdu.bits)
        return struct.pack(">BB", pdu.fc, len(packed)) + packed
    if isinstance(pdu, ReadRegistersRequest):
        if pdu.fc not in (FC_READ_HOLDING, FC_READ_INPUT):
            raise InvalidPdu(f"bad function for register read: {pdu.fc:#x}")
        _check_span(pdu.addr, pdu.qty, MAX_READ_REGISTERS, "register read")
        return struct.pack(">BHH", pdu.fc, pdu.addr, pdu.qty)
    if isinstance(pdu, ReadRegistersResponse):
        if pdu.fc not in (FC_READ_HOLDING, FC_READ_INPUT):
            raise InvalidPdu(f"bad function for register read: {pdu.fc:#x}")
        if not 1 <= len(pdu.values) <= MAX_READ_REGISTERS:
            raise InvalidPdu(f"register count out of range: {len(pdu.values)}")
        for v in pdu.values:
            _check_u16(v, "register value")
        body = struct.pack(">%dH" % len(pdu.values), *pdu.values)
        return struct.pack(">BB", pdu.fc, len(body)) + body
    if isinstance(pdu, WriteSingleCoil):
        _check_u16(pdu.addr, "coil address")
        value = _COIL_ON if pdu.on else _COIL_OFF
        return struct.pack(">BHH", FC_WRITE_COIL, pdu.addr, value)
    if isinstance(pdu, WriteSingleRegister):
        _check_u16(pdu.addr, "register address")
        _check_u16(pdu.value, "register value")
        return struct.pack(">BHH", FC_WRITE_REGISTER, pdu.addr, pdu.value)
    if isinstance(pdu, WriteMultipleCoils):
        _check_span(pdu.addr, len(pdu.bits), MAX_WRITE_BITS, "coil write")
        packed = _pack_bits(pdu.bits)
        return (
            struct.pack(">BHHB", FC_WRITE_COILS, pdu.addr, len(pdu.bits), len(packed))
            + packed
        )
    if isinstance(pdu, WriteMultipleCoilsResponse):
        _check_span(pdu.addr, pdu.qty, MAX_WRITE_BITS, "coil write")
        return struct.pack(">BHH", FC_WRITE_COILS, pdu.addr, pdu.qty)
    if isinstance(pdu, WriteMultipleRegisters):
        _check_span(pdu.addr, len(pdu.values), MAX_WRITE_REGISTERS, "register write")
        for v in pdu.values:
            _check_u16(v, "register value")
        body = struct.pack(">%dH" % len(pdu.values), *pdu.values)
        return (
            struct.pack(">BHHB", FC_WRITE_REGISTERS, pdu.addr, len(pdu.values), len(body))
            + body
        )
    if isinstance(pdu, WriteMultipleRegistersResponse):
        _check_span(pdu.addr, pdu.qty, MAX_WRITE_REGISTERS, "register write")
        return struct.pack(">BHH", FC_WRITE_REGISTERS, pdu.addr, pdu.qty)
    if isinstance(pdu, ExceptionResponse):
        if pdu.function not in SUPPORTED_FUNCTIONS:
            raise InvalidPdu(f"exception for unsupported function: {pdu.function:#x}")
        if pdu.code not in _EXCEPTION_CODES:
            raise InvalidPdu(f"unsupported exception code: {pdu.code:#x}")
        return struct.pack(">BB", pdu.function | 0x80, pdu.code)
    raise InvalidPdu(f"unsupported PDU type: {type(pdu).__name__}")


def encode_modbus(header: MbapHeader, pdu: Pdu) -> bytes:
    """Serialize one Modbus/TCP ADU (MBAP header + PDU)."""
    header._check()
    body = _encode_pdu(pdu)
    return _MBAP.pack(header.txn_id, 0, 1 + len(body), header.unit_id) + body


def _decode_request_pdu(fc: int, body: bytes) -> Pdu:
    if fc == FC_READ_COILS:
        if len(body) != 4:
            raise InvalidPdu(f"bit-read request body must be 4 bytes, got {len(body)}")
        addr, qty = struct.unpack(">HH", body)
        _check_span(addr, qty, MAX_READ_BITS, "bit read")
        return ReadBitsRequest(fc=fc, addr=addr, qty=qty)
    if fc in (FC_READ_HOLDING, FC_READ_INPUT):
        if len(body) != 4:
            raise InvalidPdu(f"register-read request body must be 4 bytes, got {len(body)}")
        addr, qty = struct.unpack(">HH", body)
        _check_span(addr, qty, MAX_READ_REGISTERS, "register read")
        return ReadRegistersRequest(fc=fc, addr=addr, qty=qty)
    if fc == FC_WRITE_COIL:
        if len(body) != 4:
            raise InvalidPdu(f"coil-write body must be 4 bytes, got {len(body)}")
        addr, value = struct.unpack(">HH", body)
        if value not in (_COIL_ON, _COIL_OFF):
            raise InvalidPdu(f"coil value must be 0x0000 or 0xFF00, got {value:#06x}")
        return WriteSingleCoil(addr=addr, on=(value == _COIL_ON))
    if fc == FC_WRITE_REGISTER:
        if len(body) != 4:
            raise InvalidPdu(f"register-write body must be 4 bytes, got {len(body)}")
        addr, value = struct.unpack(">HH", body)
        return WriteSingleRegister(addr=addr, value=value)
    if fc == FC_WRITE_COILS:
        if len(body) < 5:
            raise InvalidPdu("multi-coil write body too short")
        addr, qty, count = struct.unpack(">HHB", body[:5])
        _check_span(addr, qty, MAX_WRITE_BITS, "coil write")
        if count != (qty + 7) // 8:
            raise InvalidPdu(f"coil byte count {count} disagrees with quantity {qty}")
        if len(body) != 5 + count:
            raise InvalidPdu("multi-coil write body length mismatch")
        bits = _unpack_bits(body[5:], qty)
        return WriteMultipleCoils(addr=addr, bits=bits)
    if fc == FC_WRITE_REGISTERS:
        if len(body) < 5:
            raise InvalidPdu("multi-register write body too short")
        addr, qty, count = struct.unpack(">HHB", body[:5])
        _check_span(addr, qty, MAX_WRITE_REGISTERS, "register write")
        if count != 2 * qty:
            raise InvalidPdu(f"register byte count {count} disagrees with quantity {qty}")
        if len(body) != 5 + count:
            raise InvalidPdu("multi-register write body length mismatch")
        values = struct.unpack(">%dH" % qty, body[5:])
        return WriteMultipleRegisters(addr=addr, values=values)
    raise UnknownFunction(f"function {fc:#04x}")


def _decode_response_pdu(fc: int, body: bytes) -> Pdu:
    if fc & 0x80:
        base = fc & 0x7F
        if base not in SUPPORTED_FUNCTIONS:
            raise UnknownFunction(f"exception for unknown function {base:#04x}")
        if len(body) != 1:
            raise InvalidPdu(f"exception body must be 1 byte, got {len(body)}")
        code = body[0]
        if code not in _EXCEPTION_CODES:
            raise InvalidPdu(f"unsupported exception code: {code:#x}")
        return ExceptionResponse(function=base, code=code)
    if fc == FC_READ_COILS:
        if len(body) < 1:
            raise InvalidPdu("bit-read response body too short")
        count = body[0]
        if len(body) != 1 + count:
            raise InvalidPdu("bit-read response byte count mismatch")
        if count == 0 or count > (MAX_READ_BITS + 7) // 8:
            raise InvalidPdu(f"bad bit-read response byte count: {count}")
        # The byte count does not carry the exact bit quantity; responses are
        # byte-padded, and callers that know the request trim the tail.
        bits = _unpack_bits(body[1:], count * 8)
        return ReadBitsResponse(fc=fc, bits=bits)
    if fc in (FC_READ_HOLDING, FC_READ_INPUT):
        if len(body) < 1:
            raise InvalidPdu("register-read response body too short")
        count = body[0]
        if count == 0 or count % 2 != 0 or count // 2 > MAX_READ_REGISTERS:
            raise InvalidPdu(f"bad register-read response byte count: {count}")
        if len(body) != 1 + count:
            raise InvalidPdu("register-read response byte count mismatch")
        values = struct.unpack(">%dH" % (count // 2), body[1:])
        return ReadRegistersResponse(fc=fc, values=values)
    if fc == FC_WRITE_COIL:
        if len(body) != 4:
            raise InvalidPdu(f"coil-write echo must be 4 bytes, got {len(body)}")
        addr, value = struct.unpack(">HH", body)
        if value not in (_COIL_ON, _COIL_OFF):
            raise InvalidPdu(f"coil value must be 0x0000 or 0xFF00, got {value:#06x}")
        return WriteSingleCoil(addr=addr, on=(value == _COIL_ON))
    if fc == FC_WRITE_REGISTER:
        if len(body) != 4:
            raise InvalidPdu(f"register-write echo must be 4 bytes, got {len(body)}")
        addr, value = struct.unpack(">HH", body)
        return WriteSingleRegister(addr=addr, value=value)
    if fc == FC_WRITE_COILS:
        if len(body) != 4:
            raise InvalidPdu(f"multi-coil write response must be 4 bytes, got {len(body)}")
        addr, qty = struct.unpack(">HH", body)
        _check_span(addr, qty, MAX_WRITE_BITS, "coil write")
        return WriteMultipleCoilsResponse(addr=addr, qty=qty)
    if fc == FC_WRITE_REGISTERS:
        if len(body) != 4:
            raise InvalidPdu(f"multi-register write response must be 4 bytes, got {len(body)}")
        addr, qty = struct.unpack(">HH", body)
        _check_span(addr, qty, MAX_WRITE_REGISTERS, "register write")
        return WriteMultipleRegistersResponse(addr=addr, qty=qty)
    raise UnknownFunction(f"function {fc:#04x}")


def decode_modbus(data: bytes, role: str = REQUEST):
    """Parse one Modbus/TCP ADU.  Returns (MbapHeader, pdu).

    `role` says whether the bytes are a request or a response; several
    function codes share one code point between differently-shaped bodies.
    """
    if role not in (REQUEST, RESPONSE):
        raise ValueError(f"role must be {REQUEST!r} or {RESPONSE!r}")
    if len(data) < 7:
        raise Truncated(f"MBAP header needs 7 bytes, got {len(data)}")
    txn_id, proto, length, unit_id = _MBAP.unpack_from(data)
    if proto != 0:
        raise BadProtocolId(f"protocol id {proto:#06x}")
    if length < 2:
        raise LengthMismatch(f"MBAP length {length} cannot hold a PDU")
    body_len = len(data) - 7
    announced = length - 1
    if body_len < announced:
        raise Truncated(f"PDU announced {announced} bytes, got {body_len}")
    if body_len > announced:
        raise LengthMismatch(f"{body_len - announced} trailing bytes after PDU")
    fc = data[7]
    if role == REQUEST and fc & 0x80:
        raise UnknownFunction(f"exception function {fc:#04x} in a request")
    body = data[8:]
    if role == REQUEST:
        pdu = _decode_request_pdu(fc, body)
    else:
        pdu = _decode_response_pdu(fc, body)
    return MbapHeader(txn_id=txn_id, unit_id=unit_id), pdu
