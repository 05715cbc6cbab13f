"""Physical world: light-rail loops with fixed-block signaling plus the
traction power grid.

The model is deliberately small but honest about the couplings the scenarios
need:

  * trains follow first-order kinematics
        speed' = clamp(speed + (throttle*ACCEL - brake*BRAKE - DRAG*speed)*dt,
                       0, MAX_SPEED)
    and advance along circular tracks divided into fixed blocks;
  * a block's entry signal is RED iff the next block is occupied or a
    junction interlock holds it; collision avoidance (wherever it runs —
    inside this module or in an external controller) brakes a train whose
    current block faces a RED signal;
  * drivers only cruise and dock at stations; they are blind to signals, so
    removing the avoidance layer removes all protection;
  * traction power: one substation breaker feeds the third rail; a train is
    powered iff the breaker is closed and its individual traction feed is
    not cut off.  An unpowered train loses throttle and brakes to a stop;
  * the grid is integer-valued (750 V, 400 A, 300 kW nominal) so
    power == voltage * current holds exactly at every tick.

Every state change of forensic interest is emitted as a PhysicsEvent through
the sink callback; the orchestrator turns those into the state-timeline log.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

ACCEL = 1.0      # m/s^2 at full throttle
BRAKE = 1.5      # m/s^2 at full brake
DRAG = 0.01      # 1/s
MAX_SPEED = 22.0  # m/s

STATION_BRAKE = 0.6
COLLISION_EPS_M = 0.2

NOMINAL_VOLTAGE = 750
NOMINAL_CURRENT = 400


@dataclass(frozen=True)
class TrackSpec:
    id: str
    blocks: int
    block_m: float = 200.0


@dataclass(frozen=True)
class StationSpec:
    track: str
    block: int
    dwell_s: float = 20.0


@dataclass(frozen=True)
class JunctionSpec:
    """Two blocks (possibly on different tracks) that interlock each other."""

    a: str  # block id, e.g. "T1-B06"
    b: str


@dataclass(frozen=True)
class LayoutSpec:
    tracks: Tuple[TrackSpec, ...]
    stations: Tuple[StationSpec, ...] = ()
    junctions: Tuple[JunctionSpec, ...] = ()


@dataclass(frozen=True)
class TrainSpec:
    id: str
    track: str
    block: int
    offset_m: float = 0.0


@dataclass
class TrainState:
    id: str
    track: str
    block: int
    offset_m: float
    speed: float = 0.0
    throttle: float = 0.0
    brake: float = 0.0
    cutoff: bool = False          # per-train traction feed cut
    powered: bool = True
    alive: bool = True            # False once wrecked
    dwell_remaining_s: float = 0.0
    station_done: bool = False    # already served the station in this block
    ext_brake: bool = False       # avoidance command (external mode)

    @property
    def docked(self) -> bool:
        return self.dwell_remaining_s > 0.0


@dataclass
class GridState:
    breaker_closed: bool = True
    nominal_voltage: int = NOMINAL_VOLTAGE
    nominal_current: int = NOMINAL_CURRENT

    @property
    def voltage(self) -> int:
        return self.nominal_voltage if self.breaker_closed else 0

    @property
    def current(self) -> int:
        return self.nominal_current if self.breaker_closed else 0

    @property
    def power_w(self) -> int:
        return self.voltage * self.current


@dataclass(frozen=True)
class PhysicsEvent:
    ts_us: int
    kind: str
    subject: str
    detail: str = ""


def block_id(track: str, idx: int) -> str:
    return f"{track}-B{idx:02d}"


class World:
    """The physical plant.  Mutated only through its public operations."""

    def __init__(
        self,
        layout: LayoutSpec,
        trains: Tuple[TrainSpec, ...],
        cruise_mps: float = 14.0,
        avoidance: str = "internal",
        clock: Optional[Callable[[], int]] = None,
        sink: Optional[Callable[[PhysicsEvent], None]] = None,
    ):
        if avoidance not in ("internal", "external"):
            raise ValueError(f"avoidance must be internal or external: {avoidance!r}")
        self.layout = layout
        self.cruise = cruise_mps
        self.avoidance_mode = avoidance
        self.avoidance_enabled = True
        self._clock = clock or (lambda: 0)
        self._sink = sink or (lambda ev: None)
        self._tracks: Dict[str, TrackSpec] = {t.id: t for t in layout.tracks}
        self._stations: Dict[Tuple[str, int], StationSpec] = {
            (s.track, s.block): s for s in layout.stations
        }
        self._junction_partner: Dict[str, str] = {}
        for j in layout.junctions:
            self._junction_partner[j.a] = j.b
            self._junction_partner[j.b] = j.a
        self.grid = GridState()
        self.trains: Dict[str, TrainState] = {}
        order: Dict[str, List[str]] = {t.id: [] for t in layout.tracks}
        for spec in trains:
            if spec.track not in self._tracks:
                raise ValueError(f"train {spec.id} on unknown track {spec.track}")
            tr = self._tracks[spec.track]
            if not 0 <= spec.block < tr.blocks:
                raise ValueError(f"train {spec.id} starts in bad block {spec.block}")
            st = TrainState(
                id=spec.id, track=spec.track, block=spec.block, offset_m=spec.offset_m
            )
            self.trains[spec.id] = st
            order[spec.track].append(spec.id)
        # Fixed circular follower->leader pairing per track (no overtaking).
        self._pairs: List[Tuple[str, str]] = []
        for track_id, ids in order.items():
            if len(ids) < 2:
                continue
            ids_sorted = sorted(ids, key=lambda i: self._abs_pos(self.trains[i]))
            n = len(ids_sorted)
            for k, follower in enumerate(ids_sorted):
                leader = ids_sorted[(k + 1) % n]
                self._pairs.append((follower, leader))
        self.collisions: List[Tuple[str, str]] = []
        self.ticks = 0

    # -- helpers ------------------------------------------------------------

    def _abs_pos(self, t: TrainState) -> float:
        return t.block * self._tracks[t.track].block_m + t.offset_m

    def _track_len(self, track: str) -> float:
        tr = self._tracks[track]
        return tr.blocks * tr.block_m

    def _emit(self, kind: str, subject: str, detail: str = "") -> None:
        self._sink(PhysicsEvent(ts_us=self._clock(), kind=kind, subject=subject, detail=detail))

    def train(self, train_id: str) -> TrainState:
        return self.trains[train_id]

    def occupied(self, track: str, block: int) -> bool:
        for t in self.trains.values():
            if t.track == track and t.block == block:
                return True
        return False

    def signal_red(self, track: str, block: int) -> bool:
        """Signal governing exit of `block` into the next block."""
        nxt = (block + 1) % self._tracks[track].blocks
        if self.occupied(track, nxt):
            return True
        partner = self._junction_partner.get(block_id(track, nxt))
        if partner is not None:
            p_track, p_block = partner.rsplit("-B", 1)
            if self.occupied(p_track, int(p_block)):
                return True
        return False

    # -- external control surface ------------------------------------------

    def set_brake_command(self, train_id: str, brake: bool) -> None:
        """Avoidance braking commanded by an external controller."""
        self.trains[train_id].ext_brake = brake

    def set_avoidance(self, enabled: bool) -> None:
        if enabled != self.avoidance_enabled:
            self.avoidance_enabled = enabled
            self._emit("AVOIDANCE_ON" if enabled else "AVOIDANCE_OFF", "railway")

    def set_traction_power(self, train_id: str, on: bool) -> TrainState:
        t = self.trains[train_id]
        cutoff = not on
        if t.cutoff != cutoff:
            t.cutoff = cutoff
            self._emit("TRACTION_CUT" if cutoff else "TRACTION_RESTORED", train_id)
            self._refresh_power(t)
        return t

    def breaker_set(self, closed: bool) -> GridState:
        if self.grid.breaker_closed != closed:
            self.grid.breaker_closed = closed
            self._emit(
                "BREAKER_CLOSED" if closed else "BREAKER_OPENED",
                "substation",
                f"voltage={self.grid.voltage} current={self.grid.current} power_w={self.grid.power_w}",
            )
            for t in self.trains.values():
                self._refresh_power(t)
        return self.grid

    def meter_read(self) -> Tuple[int, int]:
        return self.grid.voltage, self.grid.current

    def _refresh_power(self, t: TrainState) -> None:
        powered = self.grid.breaker_closed and not t.cutoff
        if powered != t.powered:
            t.powered = powered
            if t.alive:
                self._emit("POWER_LOST" if not powered else "POWER_RESTORED", t.id)

    # -- dynamics -----------------------------------------------------------

    def step(self, dt_s: float) -> None:
        """Advance the world one tick."""
        self.ticks += 1
        moved: Dict[str, float] = {}
        gaps_before: Dict[Tuple[str, str], float] = {}
        for follower, leader in self._pairs:
            f, l = self.trains[follower], self.trains[leader]
            track_len = self._track_len(f.track)
            gaps_before[(follower, leader)] = (
                self._abs_pos(l) - self._abs_pos(f)
            ) % track_len

        for t in self.trains.values():
            if not t.alive:
                moved[t.id] = 0.0
                continue
            self._drive(t, dt_s)
            accel = t.throttle * ACCEL - t.brake * BRAKE - DRAG * t.speed
            t.speed = min(max(t.speed + accel * dt_s, 0.0), MAX_SPEED)
            dist = t.speed * dt_s
            moved[t.id] = dist
            if dist > 0.0:
                tr = self._tracks[t.track]
                t.offset_m += dist
                while t.offset_m >= tr.block_m:
                    t.offset_m -= tr.block_m
                    t.block = (t.block + 1) % tr.blocks
                    t.station_done = False
                    self._emit("BLOCK_ENTERED", t.id, block_id(t.track, t.block))

        # collision sweep: a follower that closed its gap to <= 0 has hit
        for follower, leader in self._pairs:
            f, l = self.trains[follower], self.trains[leader]
            if not (f.alive and l.alive):
                continue
            closure = moved[follower] - moved[leader]
            if closure <= 0:
                continue
            if gaps_before[(follower, leader)] - closure <= COLLISION_EPS_M:
                self._collide(f, l)

    def _collide(self, follower: TrainState, leader: TrainState) -> None:
        track_len = self._track_len(follower.track)
        follower.block = leader.block
        follower.offset_m = max(leader.offset_m - 0.01, 0.0)
        for t in (follower, leader):
            t.alive = False
            t.speed = 0.0
            t.throttle = 0.0
            t.brake = 1.0
        self.collisions.append((follower.id, leader.id))
        self._emit(
            "COLLISION",
            follower.id,
            f"into={leader.id} block={block_id(follower.track, follower.block)}",
        )

    def _drive(self, t: TrainState, dt_s: float) -> None:
        """Driver + avoidance control for one train, setting throttle/brake."""
        # avoidance layer
        if self.avoidance_mode == "internal":
            avoid_brake = self.avoidance_enabled and self.signal_red(t.track, t.block)
        else:
            avoid_brake = t.ext_brake
        # power layer
        if not t.powered:
            t.throttle = 0.0
            t.brake = 1.0
            return
        if avoid_brake:
            t.throttle = 0.0
            t.brake = 1.0
            return
        # station dwell
        if t.dwell_remaining_s > 0.0:
            t.dwell_remaining_s = max(t.dwell_remaining_s - dt_s, 0.0)
            t.throttle = 0.0
            t.brake = 1.0
            if t.dwell_remaining_s == 0.0:
                self._emit("STATION_DEPARTED", t.id, block_id(t.track, t.block))
            return
        station = self._stations.get((t.track, t.block))
        if station is not None and not t.station_done:
            if t.speed <= 0.05:
                t.station_done = True
                t.dwell_remaining_s = station.dwell_s
                t.speed = 0.0
                t.throttle = 0.0
                t.brake = 1.0
                self._emit("STATION_DOCKED", t.id, block_id(t.track, t.block))
            else:
                t.throttle = 0.0
                t.brake = STATION_BRAKE
            return
        # cruise control
        err = self.cruise - t.speed
        t.throttle = min(max(err * 0.5 + DRAG * self.cruise / ACCEL, 0.0), 1.0)
        t.brake = 0.0 if err > -0.5 else 0.3

    # -- views --------------------------------------------------------------

    def telemetry(self) -> Dict[str, Dict[str, float]]:
        """Per-train telemetry snapshot (what PLC input registers mirror)."""
        out = {}
        for t in self.trains.values():
            out[t.id] = {
                "speed_cms": int(round(t.speed * 100)),
                "block": t.block,
                "offset_dm": int(round(t.offset_m * 10)),
                "powered": int(t.powered),
                "alive": int(t.alive),
            }
        return out

    def to_state(self) -> dict:
        return {
            "trains": [
                {
                    "id": t.id,
                    "track": t.track,
                    "block": t.block,
                    "block_id": block_id(t.track, t.block),
                    "offset_m": round(t.offset_m, 2),
                    "speed_mps": round(t.speed, 2),
                    "powered": t.powered,
                    "alive": t.alive,
                    "docked": t.docked,
                }
                for t in self.trains.values()
            ],
            "grid": {
                "voltage": self.grid.voltage,
                "current": self.grid.current,
                "power_w": self.grid.power_w,
                "breaker_closed": self.grid.breaker_closed,
            },
            "collisions": [list(pair) for pair in self.collisions],
        }
