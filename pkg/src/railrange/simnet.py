"""Deterministic discrete-event network fabric.

One integer-microsecond clock drives everything.  Events fire in (timestamp,
insertion ordinal) order, so two runs that schedule the same work produce the
same history bit-for-bit.  The fabric moves application frames between hosts
attached to named segments, applies an ordered first-match firewall policy
between segments, and feeds every submission to tap sinks (the capture
vantages).

Nothing here emulates a real stack: no handshakes, no retransmission, no
fragmentation.  A frame is one application payload with addressing; the pcap
layer later synthesizes plausible Ethernet/IP/TCP dressing around it.
"""

from __future__ import annotations

import heapq
import ipaddress
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Dict, List, Optional, Tuple

from .errors import FabricError, PayloadTooLarge, UnknownHost

# Fits one payload inside a single synthesized TCP segment in a 65535-byte
# IP datagram: 65535 - 20 (IP) - 20 (TCP).
MAX_PAYLOAD = 65495

DEFAULT_HOP_LATENCY_US = 200

DELIVERED = "DELIVERED"
BLOCKED = "BLOCKED"

ALLOW = "ALLOW"
DENY = "DENY"

TCP = "tcp"
UDP = "udp"


def iso8601(epoch: datetime, ts_us: int) -> str:
    """Render a sim timestamp as UTC ISO-8601 with microseconds."""
    from datetime import timedelta

    dt = epoch + timedelta(microseconds=ts_us)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class EventLoop:
    """Integer-microsecond event queue with stable FIFO tie-breaking."""

    def __init__(self, epoch: datetime):
        if epoch.tzinfo is None:
            epoch = epoch.replace(tzinfo=timezone.utc)
        self.epoch = epoch
        self.now: int = 0
        self._heap: List[Tuple[int, int, Callable[[], None]]] = []
        self._ordinal = 0
        self.dispatched = 0

    def schedule_at(self, ts_us: int, fn: Callable[[], None]) -> None:
        if ts_us < self.now:
            raise FabricError(f"cannot schedule into the past: {ts_us} < {self.now}")
        heapq.heappush(self._heap, (ts_us, self._ordinal, fn))
        self._ordinal += 1

    def schedule_in(self, delta_us: int, fn: Callable[[], None]) -> None:
        self.schedule_at(self.now + delta_us, fn)

    def pending(self) -> int:
        return len(self._heap)

    def next_event_ts(self) -> Optional[int]:
        return self._heap[0][0] if self._heap else None

    def step_until(self, ts_limit_us: int) -> None:
        """Run every event with ts <= limit, then advance the clock to it."""
        while self._heap and self._heap[0][0] <= ts_limit_us:
            ts, _, fn = heapq.heappop(self._heap)
            self.now = ts
            self.dispatched += 1
            fn()
        if ts_limit_us > self.now:
            self.now = ts_limit_us

    def iso(self, ts_us: Optional[int] = None) -> str:
        return iso8601(self.epoch, self.now if ts_us is None else ts_us)


@dataclass(frozen=True)
class Segment:
    name: str
    cidr: str

    def contains(self, ip: str) -> bool:
        return ipaddress.ip_address(ip) in ipaddress.ip_network(self.cidr)


@dataclass(frozen=True)
class HostRef:
    name: str
    segment: str
    ip: str


@dataclass(frozen=True)
class FirewallRule:
    """First-match rule for inter-segment traffic ("*" wildcards a side)."""

    action: str  # ALLOW | DENY
    src_segment: str
    dst_segment: str
    dst_port: Optional[int] = None  # None = any port

    def matches(self, src_seg: str, dst_seg: str, dst_port: int) -> bool:
        if self.src_segment not in ("*", src_seg):
            return False
        if self.dst_segment not in ("*", dst_seg):
            return False
        if self.dst_port is not None and self.dst_port != dst_port:
            return False
        return True


@dataclass
class Frame:
    """One application payload in flight."""

    ts: int
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    proto: str  # tcp | udp
    payload: bytes
    origin: str = "benign"  # benign | malicious
    flow_id: int = -1  # assigned by the fabric at submission


@dataclass
class Delivery:
    frame: Frame
    outcome: str
    rule: Optional[FirewallRule] = None


TapSink = Callable[[Frame, str], None]
ServiceHandler = Callable[[Frame], None]


@dataclass
class _Tap:
    vantage: str
    sink: TapSink


class Fabric:
    """Hosts, segments, firewall, taps and frame transport."""

    def __init__(
        self,
        loop: EventLoop,
        router_ip: str = "100.66.119.253",
        hop_latency_us: int = DEFAULT_HOP_LATENCY_US,
    ):
        self.loop = loop
        self.router_ip = router_ip
        self.hop_latency_us = hop_latency_us
        self.segments: Dict[str, Segment] = {}
        self.hosts: Dict[str, HostRef] = {}
        self._by_ip: Dict[str, HostRef] = {}
        self.rules: List[FirewallRule] = []
        self._services: Dict[Tuple[str, int], ServiceHandler] = {}
        self._taps: List[_Tap] = []
        self._next_flow = 0
        self._eph: Dict[str, int] = {}
        self.frame_listeners: List[Callable[[Frame, str], None]] = []
        self.stats = {
            "submitted": 0,
            "delivered": 0,
            "blocked": 0,
            "benign": 0,
            "malicious": 0,
        }

    # -- topology -----------------------------------------------------------

    def add_segment(self, name: str, cidr: str) -> Segment:
        if name in self.segments:
            raise FabricError(f"duplicate segment {name}")
        seg = Segment(name=name, cidr=cidr)
        self.segments[name] = seg
        return seg

    def attach_host(self, name: str, segment: str, ip: str) -> HostRef:
        if name in self.hosts:
            raise FabricError(f"duplicate host {name}")
        if segment not in self.segments:
            raise FabricError(f"unknown segment {segment} for host {name}")
        if ip in self._by_ip:
            raise FabricError(f"duplicate address {ip}")
        if not self.segments[segment].contains(ip):
            raise FabricError(f"{ip} is outside segment {segment}")
        ref = HostRef(name=name, segment=segment, ip=ip)
        self.hosts[name] = ref
        self._by_ip[ip] = ref
        return ref

    def host_by_ip(self, ip: str) -> HostRef:
        try:
            return self._by_ip[ip]
        except KeyError:
            raise UnknownHost(ip) from None

    def add_rule(
        self,
        action: str,
        src_segment: str,
        dst_segment: str,
        dst_port: Optional[int] = None,
    ) -> None:
        if action not in (ALLOW, DENY):
            raise FabricError(f"bad firewall action {action}")
        self.rules.append(FirewallRule(action, src_segment, dst_segment, dst_port))

    # -- services -----------------------------------------------------------

    def bind(self, host_name: str, port: int, handler: ServiceHandler) -> None:
        ref = self.hosts.get(host_name)
        if ref is None:
            raise UnknownHost(host_name)
        key = (ref.ip, port)
        if key in self._services:
            raise FabricError(f"port {port} already bound on {host_name}")
        self._services[key] = handler

    def service_exists(self, ip: str, port: int) -> bool:
        return (ip, port) in self._services

    def ephemeral_port(self, host_name: str) -> int:
        """Deterministic per-host ephemeral port allocator."""
        port = self._eph.get(host_name, 49152)
        self._eph[host_name] = port + 1
        return port

    # -- taps ---------------------------------------------------------------

    def open_tap(self, vantage: str, sink: TapSink) -> None:
        """Attach a capture sink.

        Vantages: "router-all" (every inter-segment submission, delivered or
        blocked) or "segment:<name>" (frames sourced in the segment, plus
        delivered frames addressed into it).
        """
        if vantage != "router-all" and not vantage.startswith("segment:"):
            raise FabricError(f"unknown vantage {vantage!r}")
        if vantage.startswith("segment:") and vantage[8:] not in self.segments:
            raise FabricError(f"unknown segment in vantage {vantage!r}")
        self._taps.append(_Tap(vantage=vantage, sink=sink))

    def _tap_frame(self, frame: Frame, outcome: str, src_seg: str, dst_seg: str) -> None:
        inter = src_seg != dst_seg
        for tap in self._taps:
            if tap.vantage == "router-all":
                if inter:
                    tap.sink(frame, outcome)
                continue
            seg = tap.vantage[8:]
            if seg == src_seg:
                tap.sink(frame, outcome)
            elif seg == dst_seg and outcome == DELIVERED and inter:
                tap.sink(frame, outcome)

    # -- transport ----------------------------------------------------------

    def send(
        self,
        src: str,
        dst: str,
        src_port: int,
        dst_port: int,
        payload: bytes,
        proto: str = TCP,
        origin: str = "benign",
    ) -> Delivery:
        """Build and submit a frame between named hosts."""
        s = self.hosts.get(src)
        d = self.hosts.get(dst)
        if s is None:
            raise UnknownHost(src)
        if d is None:
            raise UnknownHost(dst)
        frame = Frame(
            ts=self.loop.now,
            src_ip=s.ip,
            dst_ip=d.ip,
            src_port=src_port,
            dst_port=dst_port,
            proto=proto,
            payload=payload,
            origin=origin,
        )
        return self.submit(frame)

    def reply(self, request: Frame, payload: bytes, origin: Optional[str] = None) -> Delivery:
        """Submit a response frame with reversed addressing."""
        frame = Frame(
            ts=self.loop.now,
            src_ip=request.dst_ip,
            dst_ip=request.src_ip,
            src_port=request.dst_port,
            dst_port=request.src_port,
            proto=request.proto,
            payload=payload,
            origin=request.origin if origin is None else origin,
        )
        return self.submit(frame)

    def submit(self, frame: Frame) -> Delivery:
        """Police, tap and (if allowed) schedule delivery of one frame."""
        if len(frame.payload) > MAX_PAYLOAD:
            raise PayloadTooLarge(f"{len(frame.payload)} > {MAX_PAYLOAD}")
        if frame.proto not in (TCP, UDP):
            raise FabricError(f"bad protocol {frame.proto!r}")
        if frame.origin not in ("benign", "malicious"):
            raise FabricError(f"bad origin {frame.origin!r}")
        src = self.host_by_ip(frame.src_ip)
        dst = self.host_by_ip(frame.dst_ip)
        frame.ts = self.loop.now
        frame.flow_id = self._next_flow
        self._next_flow += 1

        outcome = DELIVERED
        rule_hit: Optional[FirewallRule] = None
        if src.segment != dst.segment:
            rule_hit = self._match_rule(src.segment, dst.segment, frame.dst_port)
            if rule_hit is None or rule_hit.action == DENY:
                outcome = BLOCKED

        self.stats["submitted"] += 1
        self.stats[frame.origin] += 1
        self._tap_frame(frame, outcome, src.segment, dst.segment)
        for listener in self.frame_listeners:
            listener(frame, outcome)

        if outcome == DELIVERED:
            self.stats["delivered"] += 1
            hops = 1 if src.segment == dst.segment else 2
            handler = self._services.get((dst.ip, frame.dst_port))
            if handler is not None:
                self.loop.schedule_in(hops * self.hop_latency_us, lambda: handler(frame))
        else:
            self.stats["blocked"] += 1
        return Delivery(frame=frame, outcome=outcome, rule=rule_hit)

    def _match_rule(self, src_seg: str, dst_seg: str, dst_port: int) -> Optional[FirewallRule]:
        for rule in self.rules:
            if rule.matches(src_seg, dst_seg, dst_port):
                return rule
        return None
