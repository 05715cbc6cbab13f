"""Deterministic authenticated session cipher and the sealed-record framing.

Design (SIV-style, built from the standard library's HMAC/SHA-256):

    tag       = HMAC-SHA256(key, "auth" || plaintext)[:16]
    keystream = SHA256(key || tag || counter_be64) blocks, concatenated
    sealed    = tag || (plaintext XOR keystream)

Sealing is deterministic — the same key and plaintext always produce the
same bytes — which is what keeps whole-run evidence byte-reproducible.
Opening verifies the tag in constant time and raises AuthFailure on any
mismatch, so a wrong key can never return plausible plaintext.

Sealed wire records carry the session's key id in the clear:

    "SEAL" || u8 keyid_len || keyid ascii || u32 ct_len || ciphertext

so a capture plus the key-escrow log (lines of "<key_id> <64 hex chars>")
suffices to decrypt a session offline, the way an SSLKEYLOGFILE does for
TLS captures.
"""

from __future__ import annotations

import hashlib
import hmac
import re
import struct
from typing import Dict, Mapping, Tuple

from ..errors import AuthFailure, C2CodecError

KEY_LEN = 32
TAG_LEN = 16

_SEAL_MAGIC = b"SEAL"
_KEY_LINE_RE = re.compile(r"^(?P<key_id>\S+) (?P<hex>[0-9a-f]{64})$")


def _keystream(key: bytes, tag: bytes, length: int) -> bytes:
    out = bytearray()
    counter = 0
    while len(out) < length:
        out += hashlib.sha256(key + tag + struct.pack(">Q", counter)).digest()
        counter += 1
    return bytes(out[:length])


def _xor(data: bytes, stream: bytes) -> bytes:
    return bytes(a ^ b for a, b in zip(data, stream))


class SessionCipher:
    """Authenticated deterministic cipher bound to one 32-byte session key."""

    def __init__(self, key: bytes):
        if not isinstance(key, (bytes, bytearray)) or len(key) != KEY_LEN:
            raise ValueError(f"session key must be {KEY_LEN} bytes")
        self._key = bytes(key)

    def seal(self, plaintext: bytes) -> bytes:
        tag = hmac.new(self._key, b"auth" + plaintext, hashlib.sha256).digest()[:TAG_LEN]
        body = _xor(plaintext, _keystream(self._key, tag, len(plaintext)))
        return tag + body

    def open(self, sealed: bytes) -> bytes:
        if len(sealed) < TAG_LEN:
            raise AuthFailure("sealed record shorter than its tag")
        tag, body = sealed[:TAG_LEN], sealed[TAG_LEN:]
        plaintext = _xor(body, _keystream(self._key, tag, len(body)))
        expect = hmac.new(self._key, b"auth" + plaintext, hashlib.sha256).digest()[:TAG_LEN]
        if not hmac.compare_digest(tag, expect):
            raise AuthFailure("tag mismatch")
        return plaintext


def derive_key(material: str) -> bytes:
    """Deterministically derive a session key from a seed string."""
    return hashlib.sha256(material.encode("utf-8")).digest()


def format_key_line(key_id: str, key: bytes) -> str:
    if not key_id or any(c.isspace() for c in key_id):
        raise ValueError(f"key id must be non-empty and free of whitespace: {key_id!r}")
    if len(key) != KEY_LEN:
        raise ValueError(f"session key must be {KEY_LEN} bytes")
    return f"{key_id} {key.hex()}"


def parse_key_log(text: str) -> Dict[str, bytes]:
    """Parse an escrow log back into {key_id: key}; ignores blank lines."""
    keys: Dict[str, bytes] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        m = _KEY_LINE_RE.match(line)
        if not m:
            raise ValueError(f"bad key log line {lineno}: {line!r}")
        keys[m.group("key_id")] = bytes.fromhex(m.group("hex"))
    return keys


def wrap_sealed(key_id: str, cipher: SessionCipher, plaintext: bytes) -> bytes:
    """Seal a payload and frame it as a wire record carrying the key id."""
    kid = key_id.encode("ascii")
    if not 1 <= len(kid) <= 255:
        raise ValueError("key id must be 1..255 ascii bytes")
    ct = cipher.seal(plaintext)
    return _SEAL_MAGIC + struct.pack(">B", len(kid)) + kid + struct.pack(">I", len(ct)) + ct


def _split_sealed(data: bytes) -> Tuple[str, bytes]:
    if len(data) < 5 or data[:4] != _SEAL_MAGIC:
        raise C2CodecError("not a sealed record")
    kid_len = data[4]
    if len(data) < 5 + kid_len + 4:
        raise C2CodecError("sealed record header incomplete")
    key_id = data[5:5 + kid_len].decode("ascii")
    (ct_len,) = struct.unpack_from(">I", data, 5 + kid_len)
    start = 5 + kid_len + 4
    if len(data) != start + ct_len:
        raise C2CodecError("sealed record length mismatch")
    return key_id, data[start:]


def peek_key_id(data: bytes) -> str:
    """Read the cleartext key id off a sealed record without decrypting."""
    return _split_sealed(data)[0]


def open_sealed(data: bytes, keyring: Mapping[str, bytes]) -> Tuple[str, bytes]:
    """Open a sealed wire record using a {key_id: key} mapping.

    Raises KeyError when the key id is not escrowed and AuthFailure when the
    escrowed key does not authenticate the record.
    """
    key_id, ct = _split_sealed(data)
    cipher = SessionCipher(keyring[key_id])
    return key_id, cipher.open(ct)


def is_sealed(data: bytes) -> bool:
    return data[:4] == _SEAL_MAGIC
