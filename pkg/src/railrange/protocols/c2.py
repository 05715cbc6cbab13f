"""Command-and-control envelope grammar.

The implants speak an HTTP-flavored request/response text protocol inside
their sealed channel.  Task commands ride in the URL as base64, the way the
real traffic family this models does, so a decrypted session (or a memory
capture of one end) exposes strings like:

    /api/task?cmd=Y2F0IGNyZWRlbnRpYWxzLnR4dA==

which decodes to ``cat credentials.txt``.

Message shapes:

    implant poll:    GET /api/task?cmd=<b64 marker-or-last-cmd> HTTP/1.1
    server tasking:  200 TASK <b64 command>        (or: 200 IDLE)
    implant result:  GET /api/result?cmd=<b64 command> HTTP/1.1
                     <b64 payload>
"""

from __future__ import annotations

import base64
import binascii
from typing import Optional, Tuple

from ..errors import C2CodecError

TASK_PATH = "/api/task"
RESULT_PATH = "/api/result"


def _b64(text_or_bytes) -> str:
    if isinstance(text_or_bytes, str):
        text_or_bytes = text_or_bytes.encode("utf-8")
    return base64.b64encode(text_or_bytes).decode("ascii")


def _unb64(blob: str) -> bytes:
    try:
        return base64.b64decode(blob.encode("ascii"), validate=True)
    except (binascii.Error, ValueError, UnicodeEncodeError) as exc:
        raise C2CodecError(f"bad base64 payload: {exc}") from exc


def encode_c2(command: str) -> str:
    """Build the task-URL form of a command: /api/task?cmd=<base64>."""
    return f"{TASK_PATH}?cmd={_b64(command)}"


def decode_c2(path: str) -> str:
    """Recover the command from a task- or result-URL."""
    base, sep, query = path.partition("?cmd=")
    if not sep or base not in (TASK_PATH, RESULT_PATH):
        raise C2CodecError(f"not a c2 task url: {path!r}")
    try:
        return _unb64(query).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise C2CodecError(f"command is not utf-8: {exc}") from exc


def beacon_request(marker: str) -> str:
    """Implant poll for work; `marker` is a hello string or the last command."""
    return f"GET {TASK_PATH}?cmd={_b64(marker)} HTTP/1.1"


def result_request(command: str, payload: bytes) -> str:
    """Implant result upload: command echoed in the URL, payload as b64 body."""
    return f"GET {RESULT_PATH}?cmd={_b64(command)} HTTP/1.1\r\n{_b64(payload)}"


def task_response(command: Optional[str]) -> str:
    """Server reply to a beacon: a task to run, or idle."""
    if command is None:
        return "200 IDLE"
    return f"200 TASK {_b64(command)}"


def parse_c2_request(text: str) -> Tuple[str, str, Optional[bytes]]:
    """Parse an implant request.

    Returns (kind, command, payload) where kind is "task" (a beacon poll)
    or "result"; payload is the decoded result body or None for beacons.
    """
    head, _, body = text.partition("\r\n")
    parts = head.split(" ")
    if len(parts) != 3 or parts[0] != "GET" or parts[2] != "HTTP/1.1":
        raise C2CodecError(f"bad request line: {head!r}")
    path = parts[1]
    base, sep, query = path.partition("?cmd=")
    if not sep:
        raise C2CodecError(f"request url carries no command: {path!r}")
    try:
        command = _unb64(query).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise C2CodecError(f"command is not utf-8: {exc}") from exc
    if base == TASK_PATH:
        if body:
            raise C2CodecError("beacon polls carry no body")
        return "task", command, None
    if base == RESULT_PATH:
        return "result", command, _unb64(body)
    raise C2CodecError(f"unknown c2 path: {base!r}")


def parse_c2_response(text: str) -> Optional[str]:
    """Parse a server reply; returns the tasked command, or None for idle."""
    if text == "200 IDLE":
        return None
    prefix = "200 TASK "
    if not text.startswith(prefix):
        raise C2CodecError(f"bad c2 response: {text!r}")
    try:
        return _unb64(text[len(prefix):]).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise C2CodecError(f"task is not utf-8: {exc}") from exc
