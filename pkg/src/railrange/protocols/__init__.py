"""Wire-format codecs: Modbus/TCP, the S7-style write protocol, the C2
envelope grammar and the sealed-session cipher.

Everything here is pure byte/string transformation with no knowledge of the
network fabric or the simulation clock, so the codecs can be exercised and
fuzzed in isolation.
"""

from .modbus import (
    REQUEST,
    RESPONSE,
    MbapHeader,
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
    encode_modbus,
    decode_modbus,
)
from .s7 import (
    S7_PORT,
    S7WriteRequest,
    S7WriteAck,
    encode_s7_write,
    encode_s7_ack,
    decode_s7,
)
from .c2 import (
    encode_c2,
    decode_c2,
    beacon_request,
    result_request,
    task_response,
    parse_c2_request,
    parse_c2_response,
)
from .cipher import (
    KEY_LEN,
    TAG_LEN,
    SessionCipher,
    derive_key,
    format_key_line,
    parse_key_log,
    wrap_sealed,
    peek_key_id,
    open_sealed,
    is_sealed,
)

__all__ = [
    "REQUEST",
    "RESPONSE",
    "MbapHeader",
    "ReadBitsRequest",
    "ReadBitsResponse",
    "ReadRegistersRequest",
    "ReadRegistersResponse",
    "WriteSingleCoil",
    "WriteSingleRegister",
    "WriteMultipleCoils",
    "WriteMultipleCoilsResponse",
    "WriteMultipleRegisters",
    "WriteMultipleRegistersResponse",
    "ExceptionResponse",
    "encode_modbus",
    "decode_modbus",
    "S7_PORT",
    "S7WriteRequest",
    "S7WriteAck",
    "encode_s7_write",
    "encode_s7_ack",
    "decode_s7",
    "encode_c2",
    "decode_c2",
    "beacon_request",
    "result_request",
    "task_response",
    "parse_c2_request",
    "parse_c2_response",
    "KEY_LEN",
    "TAG_LEN",
    "SessionCipher",
    "derive_key",
    "format_key_line",
    "parse_key_log",
    "wrap_sealed",
    "peek_key_id",
    "open_sealed",
    "is_sealed",
]
