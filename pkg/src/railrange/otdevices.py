"""OT devices: PLCs, the RTU, the HMI and benign console pollers.

Each server device owns a register image and answers Modbus/TCP on port 502
(the RTU additionally answers the S7-style write protocol on port 102).
Scan cycles run on the shared event loop: refresh inputs from the physical
world, apply command coils to it.  Client devices (HMI, consoles) bind a
fixed local port for responses and correlate by transaction id.

Register maps
-------------

train-control PLC (unit 1)
    coils    100            avoidance enable (1 = protection active)
             101 + i        traction cutoff for train i (1 = feed cut)
             120            third-rail master enable
    disc.in  0..B-1         block occupancy, track-major flattening
    holding  0              scan counter (low word)
             1              cruise target, cm/s
    input    8*i + 0        train i speed, cm/s
             8*i + 1        train i block index
             8*i + 2        train i block offset, dm
             8*i + 3        train i powered (0/1)
             8*i + 4        train i alive (0/1)

grid PLC (unit 1)
    coils    0              breaker close command (1 = closed)
    disc.in  0              breaker closed feedback
    holding  0              scan counter (low word)
    input    0              bus voltage, V
             1              feeder current, A
             2              active power, W/100

RTU (unit 1)
    input    0              bus voltage, V     (refreshed each poll period,
             1              feeder current, A   unless tampered this period)
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .errors import ModbusError, S7Error
from .physics import World
from .protocols import modbus as mb
from .protocols import s7 as s7p
from .protocols.modbus import (
    ExceptionResponse,
    MbapHeader,
    ReadBitsRequest,
    ReadBitsResponse,
    ReadRegistersRequest,
    ReadRegistersResponse,
    WriteMultipleCoils,
    WriteMultipleCoilsResponse,
    WriteMultipleRegisters,
    WriteMultipleRegistersResponse,
    WriteSingleCoil,
    WriteSingleRegister,
    decode_modbus,
    encode_modbus,
)
from .simnet import Fabric, Frame, UDP

MODBUS_PORT = 502
COVER_PORT = 20000

COIL_AVOIDANCE = 100
COIL_CUTOFF_BASE = 101
COIL_THIRD_RAIL = 120

GRID_COIL_BREAKER = 0

DeviceSink = Callable[[str, str, str], None]  # (device, kind, detail)


@dataclass
class DeviceImage:
    coils: List[bool]
    discrete_inputs: List[bool]
    holding_regs: List[int]
    input_regs: List[int]

    @classmethod
    def sized(cls, coils=128, discrete=64, holding=32, input_=128) -> "DeviceImage":
        return cls([False] * coils, [False] * discrete, [0] * holding, [0] * input_)


def _bank_pad(bits: Sequence[bool]) -> Tuple[bool, ...]:
    rem = (-len(bits)) % 8
    return tuple(bits) + (False,) * rem


class ModbusServerDevice:
    """Shared Modbus service plumbing for the PLC/RTU family."""

    unit_id = 1
    # which function groups this device honors
    serves_coil_reads = True
    serves_holding_reads = True
    serves_input_reads = True
    serves_coil_writes = True
    serves_holding_writes = True

    def __init__(
        self,
        name: str,
        host_name: str,
        fabric: Fabric,
        loop,
        world: World,
        sink: Optional[DeviceSink] = None,
        scan_period_us: int = 100_000,
        image: Optional[DeviceImage] = None,
    ):
        self.name = name
        self.host_name = host_name
        self.fabric = fabric
        self.loop = loop
        self.world = world
        self.sink = sink or (lambda d, k, det: None)
        self.scan_period_us = scan_period_us
        self.image = image or DeviceImage.sized()

    # -- service ------------------------------------------------------------

    def start(self) -> None:
        self.fabric.bind(self.host_name, MODBUS_PORT, self._on_frame)
        self.loop.schedule_at(self.loop.now, self._scan_tick)

    def _scan_tick(self) -> None:
        self.scan_cycle()
        self.loop.schedule_in(self.scan_period_us, self._scan_tick)

    def scan_cycle(self) -> None:  # overridden by concrete devices
        pass

    def _on_frame(self, frame: Frame) -> None:
        try:
            reply = self.serve_modbus(frame.payload)
        except ModbusError as exc:
            self.sink(self.name, "modbus_reject", str(exc))
            return
        self.fabric.reply(frame, reply)

    # -- request handling (pure bytes -> bytes, independently testable) -----

    def serve_modbus(self, payload: bytes) -> bytes:
        header, pdu = decode_modbus(payload, mb.REQUEST)

        def exc(code: int) -> bytes:
            return encode_modbus(header, ExceptionResponse(function=pdu.fc, code=code))

        img = self.image
        if isinstance(pdu, ReadBitsRequest):
            if not self.serves_coil_reads:
                return exc(mb.EXC_ILLEGAL_FUNCTION)
            if pdu.addr + pdu.qty > len(img.coils):
                return exc(mb.EXC_ILLEGAL_ADDRESS)
            bits = _bank_pad(img.coils[pdu.addr:pdu.addr + pdu.qty])
            return encode_modbus(header, ReadBitsResponse(fc=pdu.fc, bits=bits))
        if isinstance(pdu, ReadRegistersRequest):
            if pdu.fc == mb.FC_READ_HOLDING:
                if not self.serves_holding_reads:
                    return exc(mb.EXC_ILLEGAL_FUNCTION)
                bank = img.holding_regs
            else:
                if not self.serves_input_reads:
                    return exc(mb.EXC_ILLEGAL_FUNCTION)
                bank = img.input_regs
            if pdu.addr + pdu.qty > len(bank):
                return exc(mb.EXC_ILLEGAL_ADDRESS)
            values = tuple(bank[pdu.addr:pdu.addr + pdu.qty])
            return encode_modbus(header, ReadRegistersResponse(fc=pdu.fc, values=values))
        if isinstance(pdu, WriteSingleCoil):
            if not self.serves_coil_writes:
                return exc(mb.EXC_ILLEGAL_FUNCTION)
            if pdu.addr >= len(img.coils):
                return exc(mb.EXC_ILLEGAL_ADDRESS)
            img.coils[pdu.addr] = pdu.on
            self.on_coils_written([pdu.addr])
            return encode_modbus(header, pdu)
        if isinstance(pdu, WriteSingleRegister):
            if not self.serves_holding_writes:
                return exc(mb.EXC_ILLEGAL_FUNCTION)
            if pdu.addr >= len(img.holding_regs):
                return exc(mb.EXC_ILLEGAL_ADDRESS)
            img.holding_regs[pdu.addr] = pdu.value
            self.on_holding_written([pdu.addr])
            return encode_modbus(header, pdu)
        if isinstance(pdu, WriteMultipleCoils):
            if not self.serves_coil_writes:
                return exc(mb.EXC_ILLEGAL_FUNCTION)
            if pdu.addr + len(pdu.bits) > len(img.coils):
                return exc(mb.EXC_ILLEGAL_ADDRESS)
            for i, bit in enumerate(pdu.bits):
                img.coils[pdu.addr + i] = bit
            self.on_coils_written(list(range(pdu.addr, pdu.addr + len(pdu.bits))))
            return encode_modbus(
                header, WriteMultipleCoilsResponse(addr=pdu.addr, qty=len(pdu.bits))
            )
        if isinstance(pdu, WriteMultipleRegisters):
            if not self.serves_holding_writes:
                return exc(mb.EXC_ILLEGAL_FUNCTION)
            if pdu.addr + len(pdu.values) > len(img.holding_regs):
                return exc(mb.EXC_ILLEGAL_ADDRESS)
            for i, value in enumerate(pdu.values):
                img.holding_regs[pdu.addr + i] = value
            self.on_holding_written(list(range(pdu.addr, pdu.addr + len(pdu.values))))
            return encode_modbus(
                header, WriteMultipleRegistersResponse(addr=pdu.addr, qty=len(pdu.values))
            )
        return encode_modbus(header, ExceptionResponse(function=pdu.fc, code=mb.EXC_ILLEGAL_FUNCTION))

    def on_coils_written(self, addrs: List[int]) -> None:
        pass

    def on_holding_written(self, addrs: List[int]) -> None:
        pass


class TrainControlPlc(ModbusServerDevice):
    """Railway avoidance + traction-cutoff controller."""

    def __init__(self, *args, train_ids: Sequence[str] = (), **kwargs):
        super().__init__(*args, **kwargs)
        self.train_ids = list(train_ids)
        self.image.coils[COIL_AVOIDANCE] = True
        self.image.coils[COIL_THIRD_RAIL] = True
        self._avoid_reported = True
        # track-major block flattening for discrete inputs
        self._blocks: List[Tuple[str, int]] = []
        for track in self.world.layout.tracks:
            for b in range(track.blocks):
                self._blocks.append((track.id, b))

    def scan_cycle(self) -> None:
        img = self.image
        img.holding_regs[0] = (img.holding_regs[0] + 1) & 0xFFFF
        img.holding_regs[1] = int(self.world.cruise * 100)
        for i, (track, block) in enumerate(self._blocks):
            if i < len(img.discrete_inputs):
                img.discrete_inputs[i] = self.world.occupied(track, block)
        tele = self.world.telemetry()
        for i, train_id in enumerate(self.train_ids):
            base = 8 * i
            t = tele[train_id]
            img.input_regs[base + 0] = t["speed_cms"]
            img.input_regs[base + 1] = t["block"]
            img.input_regs[base + 2] = t["offset_dm"] & 0xFFFF
            img.input_regs[base + 3] = t["powered"]
            img.input_regs[base + 4] = t["alive"]
        # command side: traction cutoffs then avoidance braking
        avoid = img.coils[COIL_AVOIDANCE]
        if avoid != self._avoid_reported:
            self._avoid_reported = avoid
            self.sink(self.name, "avoidance_enable" if avoid else "avoidance_disable", "")
        for i, train_id in enumerate(self.train_ids):
            cut = img.coils[COIL_CUTOFF_BASE + i] or not img.coils[COIL_THIRD_RAIL]
            self.world.set_traction_power(train_id, not cut)
        for train_id in self.train_ids:
            t = self.world.train(train_id)
            brake = avoid and self.world.signal_red(t.track, t.block)
            self.world.set_brake_command(train_id, brake)


class StationPlc(ModbusServerDevice):
    """Mirrors station occupancy and dwell state; no actuation."""

    serves_coil_writes = True  # door-control coils exist but drive nothing

    def scan_cycle(self) -> None:
        img = self.image
        img.holding_regs[0] = (img.holding_regs[0] + 1) & 0xFFFF
        for i, station in enumerate(self.world.layout.stations):
            if i >= len(img.discrete_inputs):
                break
            img.discrete_inputs[i] = self.world.occupied(station.track, station.block)
            dwell = 0
            for t in self.world.trains.values():
                if t.track == station.track and t.block == station.block and t.docked:
                    dwell = int(t.dwell_remaining_s * 10)
            if i < len(img.input_regs):
                img.input_regs[i] = dwell


class JunctionPlc(ModbusServerDevice):
    """Mirrors junction interlock state; no actuation."""

    def scan_cycle(self) -> None:
        img = self.image
        img.holding_regs[0] = (img.holding_regs[0] + 1) & 0xFFFF
        for i, j in enumerate(self.world.layout.junctions):
            if i >= len(img.discrete_inputs):
                break
            a_track, a_block = j.a.rsplit("-B", 1)
            b_track, b_block = j.b.rsplit("-B", 1)
            locked = self.world.occupied(a_track, int(a_block)) or self.world.occupied(
                b_track, int(b_block)
            )
            img.discrete_inputs[i] = locked


class GridPlc(ModbusServerDevice):
    """Substation breaker controller."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.image.coils[GRID_COIL_BREAKER] = True

    def scan_cycle(self) -> None:
        img = self.image
        img.holding_regs[0] = (img.holding_regs[0] + 1) & 0xFFFF
        want_closed = img.coils[GRID_COIL_BREAKER]
        if want_closed != self.world.grid.breaker_closed:
            self.world.breaker_set(want_closed)
            self.sink(
                self.name,
                "breaker_applied",
                f"closed={want_closed}",
            )
        volts, amps = self.world.meter_read()
        img.discrete_inputs[0] = self.world.grid.breaker_closed
        img.input_regs[0] = volts
        img.input_regs[1] = amps
        img.input_regs[2] = self.world.grid.power_w // 100

    def on_coils_written(self, addrs: List[int]) -> None:
        if GRID_COIL_BREAKER in addrs:
            self.sink(
                self.name,
                "breaker_cmd",
                f"closed={self.image.coils[GRID_COIL_BREAKER]}",
            )


class Rtu(ModbusServerDevice):
    """Telemetry RTU: Modbus-readable input registers, S7-writable surface.

    The poll cycle refreshes input registers from the meter unless an S7
    write landed within the elapsed poll period; a sustained write flood
    therefore holds the registers at the attacker's values, while a slow
    drip alternates between false and true readings.
    """

    serves_coil_reads = False
    serves_holding_reads = False
    serves_coil_writes = False
    serves_holding_writes = False

    def __init__(self, *args, poll_period_us: int = 1_000_000, **kwargs):
        kwargs.setdefault("image", DeviceImage.sized(coils=8, discrete=8, holding=8, input_=8))
        super().__init__(*args, **kwargs)
        self.poll_period_us = poll_period_us
        self._last_s7_write_us: Optional[int] = None
        self.scan_period_us = poll_period_us  # the scan IS the poll

    def start(self) -> None:
        super().start()
        self.fabric.bind(self.host_name, s7p.S7_PORT, self._on_s7_frame)

    def scan_cycle(self) -> None:
        self.rtu_poll()

    def rtu_poll(self) -> None:
        now = self.loop.now
        tampered = (
            self._last_s7_write_us is not None
            and self._last_s7_write_us > now - self.poll_period_us
        )
        if tampered:
            self.sink(self.name, "poll_held", "tampered within period")
            return
        volts, amps = self.world.meter_read()
        self.image.input_regs[0] = volts
        self.image.input_regs[1] = amps

    def _on_s7_frame(self, frame: Frame) -> None:
        try:
            reply = self.serve_s7(frame.payload)
        except S7Error as exc:
            self.sink(self.name, "s7_reject", str(exc))
            return
        self.fabric.reply(frame, reply)

    def serve_s7(self, payload: bytes) -> bytes:
        msg = s7p.decode_s7(payload)
        if not isinstance(msg, s7p.S7WriteRequest):
            raise S7Error("only write requests are served")
        if msg.area != s7p.AREA_INPUT_REGS:
            return s7p.encode_s7_ack(s7p.S7WriteAck(seq=msg.seq, result=1))
        if msg.start + len(msg.values) > len(self.image.input_regs):
            return s7p.encode_s7_ack(s7p.S7WriteAck(seq=msg.seq, result=2))
        for i, value in enumerate(msg.values):
            self.image.input_regs[msg.start + i] = value
        self._last_s7_write_us = self.loop.now
        self.sink(self.name, "s7_write", f"start={msg.start} values={list(msg.values)}")
        return s7p.encode_s7_ack(s7p.S7WriteAck(seq=msg.seq, result=0))


# ---------------------------------------------------------------------------
# Client-side devices
# ---------------------------------------------------------------------------


class ModbusClientDevice:
    """Shared client plumbing: fixed local port, txn correlation."""

    def __init__(
        self,
        name: str,
        host_name: str,
        client_port: int,
        fabric: Fabric,
        loop,
        sink: Optional[DeviceSink] = None,
    ):
        self.name = name
        self.host_name = host_name
        self.client_port = client_port
        self.fabric = fabric
        self.loop = loop
        self.sink = sink or (lambda d, k, det: None)
        self._txn = 0
        self._pending: Dict[int, Tuple[object, object]] = {}

    def start(self) -> None:
        self.fabric.bind(self.host_name, self.client_port, self._on_response_frame)

    def request(self, target_host: str, pdu, context=None, origin: str = "benign") -> None:
        self._txn = (self._txn + 1) & 0xFFFF
        header = MbapHeader(txn_id=self._txn, unit_id=1)
        payload = encode_modbus(header, pdu)
        self._pending[self._txn] = (context, pdu)
        self.fabric.send(
            self.host_name, target_host, self.client_port, MODBUS_PORT, payload, origin=origin
        )

    def _on_response_frame(self, frame: Frame) -> None:
        try:
            header, pdu = decode_modbus(frame.payload, mb.RESPONSE)
        except ModbusError as exc:
            self.sink(self.name, "bad_response", str(exc))
            return
        context, request_pdu = self._pending.pop(header.txn_id, (None, None))
        self.on_response(context, request_pdu, pdu)

    def on_response(self, context, request_pdu, response_pdu) -> None:
        pass


class ConsolePoller(ModbusClientDevice):
    """Benign operator console: round-robins read requests at a period."""

    def __init__(
        self,
        *args,
        target_host: str,
        reads: Sequence[object],
        period_us: int = 5_000_000,
        start_offset_us: int = 0,
        jitter_us: int = 0,
        seed: int = 42,
        **kwargs,
    ):
        super().__init__(*args, **kwargs)
        self.target_host = target_host
        self.reads = list(reads)
        self.period_us = period_us
        self.start_offset_us = start_offset_us
        self.jitter_us = jitter_us
        self._rng = random.Random(f"{seed}:console:{self.name}")
        self._idx = 0

    def start(self) -> None:
        super().start()
        self.loop.schedule_at(self.loop.now + self.start_offset_us, self._tick)

    def _tick(self) -> None:
        pdu = self.reads[self._idx % len(self.reads)]
        self._idx += 1
        self.request(self.target_host, pdu)
        delay = self.period_us
        if self.jitter_us:
            delay += self._rng.randint(-self.jitter_us, self.jitter_us)
        self.loop.schedule_in(max(delay, 1000), self._tick)


@dataclass
class HmiAlert:
    ts_us: int
    voltage: int
    current: int
    acked: bool = False
    ack_ts_us: Optional[int] = None


class Hmi(ModbusClientDevice):
    """Operator HMI: polls the RTU, guards thresholds, trips the breaker.

    Threshold logic: a reading outside [600, 900] V or [320, 480] A while
    NORMAL raises ALERT; entering ALERT halts automatic control (once per
    episode) and fires a single breaker-open command at the grid PLC.
    Acknowledging returns the mode to NORMAL; automatic control stays off
    until explicitly resumed.
    """

    def __init__(
        self,
        *args,
        rtu_host: str,
        grid_plc_host: str,
        poll_period_us: int = 1_000_000,
        start_offset_us: int = 100_000,
        v_low: int = 600,
        v_high: int = 900,
        a_low: int = 320,
        a_high: int = 480,
        **kwargs,
    ):
        super().__init__(*args, **kwargs)
        self.rtu_host = rtu_host
        self.grid_plc_host = grid_plc_host
        self.poll_period_us = poll_period_us
        self.start_offset_us = start_offset_us
        self.v_low, self.v_high = v_low, v_high
        self.a_low, self.a_high = a_low, a_high
        self.mode = "NORMAL"
        self.auto_control = True
        self.last_reading: Tuple[int, int] = (0, 0)
        self.last_reading_ts: int = 0
        self.alerts: List[HmiAlert] = []
        self.readings_log: List[Tuple[int, int, int]] = []

    def start(self) -> None:
        super().start()
        self.loop.schedule_at(self.loop.now + self.start_offset_us, self._poll)

    def _poll(self) -> None:
        self.request(self.rtu_host, ReadRegistersRequest(fc=mb.FC_READ_INPUT, addr=0, qty=2))
        self.loop.schedule_in(self.poll_period_us, self._poll)

    def on_response(self, context, request_pdu, response_pdu) -> None:
        if isinstance(response_pdu, ReadRegistersResponse) and len(response_pdu.values) >= 2:
            self.hmi_evaluate(response_pdu.values[0], response_pdu.values[1])

    def in_thresholds(self, voltage: int, current: int) -> bool:
        return self.v_low <= voltage <= self.v_high and self.a_low <= current <= self.a_high

    def hmi_evaluate(self, voltage: int, current: int) -> None:
        self.last_reading = (voltage, current)
        self.last_reading_ts = self.loop.now
        self.readings_log.append((self.loop.now, voltage, current))
        if self.in_thresholds(voltage, current):
            return
        if self.mode != "NORMAL":
            return
        self.mode = "ALERT"
        self.alerts.append(HmiAlert(ts_us=self.loop.now, voltage=voltage, current=current))
        self.sink(self.name, "alert_raised", f"voltage={voltage} current={current}")
        if self.auto_control:
            self.auto_control = False
            self.sink(self.name, "auto_halted", "")
            self.request(
                self.grid_plc_host,
                WriteSingleCoil(addr=GRID_COIL_BREAKER, on=False),
            )
            self.sink(self.name, "breaker_open_cmd", "")

    # -- operator surface ----------------------------------------------------

    def ack_alert(self) -> bool:
        if self.mode != "ALERT":
            return False
        self.mode = "NORMAL"
        for alert in self.alerts:
            if not alert.acked:
                alert.acked = True
                alert.ack_ts_us = self.loop.now
        self.sink(self.name, "alert_acked", "")
        return True

    def resume_auto(self) -> bool:
        if self.auto_control:
            return False
        self.auto_control = True
        self.sink(self.name, "auto_resumed", "")
        return True

    def operator_breaker(self, closed: bool) -> None:
        self.request(
            self.grid_plc_host, WriteSingleCoil(addr=GRID_COIL_BREAKER, on=closed)
        )
        self.sink(self.name, "operator_breaker_cmd", f"closed={closed}")

    def to_state(self) -> dict:
        return {
            "mode": self.mode,
            "auto_control": self.auto_control,
            "last_reading": {
                "voltage": self.last_reading[0],
                "current": self.last_reading[1],
                "ts_us": self.last_reading_ts,
            },
            "thresholds": {
                "voltage": [self.v_low, self.v_high],
                "current": [self.a_low, self.a_high],
            },
            "alerts": [
                {
                    "ts_us": a.ts_us,
                    "voltage": a.voltage,
                    "current": a.current,
                    "acked": a.acked,
                }
                for a in self.alerts
            ],
        }


class CoverEmitter:
    """Physical-side host broadcasting plaintext telemetry over UDP."""

    def __init__(
        self,
        name: str,
        host_name: str,
        target_host: str,
        fabric: Fabric,
        loop,
        world: World,
        kind: str = "grid",
        period_us: int = 5_000_000,
        start_offset_us: int = 0,
    ):
        self.name = name
        self.host_name = host_name
        self.target_host = target_host
        self.fabric = fabric
        self.loop = loop
        self.world = world
        self.kind = kind
        self.period_us = period_us
        self.start_offset_us = start_offset_us

    def start(self) -> None:
        self.loop.schedule_at(self.loop.now + self.start_offset_us, self._tick)

    def _payload(self) -> bytes:
        if self.kind == "grid":
            v, a = self.world.meter_read()
            brk = 1 if self.world.grid.breaker_closed else 0
            return f"GRID V={v} A={a} BRK={brk}".encode()
        moving = sum(1 for t in self.world.trains.values() if t.speed > 0.5 and t.alive)
        alive = sum(1 for t in self.world.trains.values() if t.alive)
        return f"RAIL trains={len(self.world.trains)} alive={alive} moving={moving}".encode()

    def _tick(self) -> None:
        self.fabric.send(
            self.host_name,
            self.target_host,
            COVER_PORT,
            COVER_PORT,
            self._payload(),
            proto=UDP,
        )
        self.loop.schedule_in(self.period_us, self._tick)
