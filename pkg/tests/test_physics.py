"""Physical-world behavior: kinematics, signaling, collisions, grid."""

import pytest

from railrange.physics import (
    BRAKE,
    DRAG,
    JunctionSpec,
    LayoutSpec,
    StationSpec,
    TrackSpec,
    TrainSpec,
    World,
    block_id,
)


def make_world(trains, stations=(), junctions=(), avoidance="internal", blocks=8):
    layout = LayoutSpec(
        tracks=(TrackSpec(id="T1", blocks=blocks, block_m=200.0),),
        stations=tuple(stations),
        junctions=tuple(junctions),
    )
    events = []
    clock = {"t": 0}
    world = World(
        layout,
        tuple(trains),
        avoidance=avoidance,
        clock=lambda: clock["t"],
        sink=events.append,
    )
    return world, events, clock


def run(world, clock, seconds, dt=1.0):
    for _ in range(int(seconds / dt)):
        clock["t"] += int(dt * 1_000_000)
        world.step(dt)


def test_braking_formula_exact():
    # one unpowered tick recomputed by hand:
    # speed' = speed + (0*ACCEL - 1*BRAKE - DRAG*speed)*dt
    world, _, clock = make_world([TrainSpec("w1", "T1", 0)])
    t = world.train("w1")
    t.speed = 10.0
    world.breaker_set(False)
    world.step(1.0)
    assert t.speed == pytest.approx(10.0 + (-BRAKE - DRAG * 10.0) * 1.0, abs=1e-12)
    assert t.speed == pytest.approx(8.4, abs=1e-12)


def test_speed_clamps_at_zero():
    # braking can never produce negative speed
    world, _, clock = make_world([TrainSpec("w1", "T1", 0)])
    t = world.train("w1")
    t.speed = 0.5
    world.breaker_set(False)
    run(world, clock, 5)
    assert t.speed == 0.0


def test_cruise_convergence():
    # the cruise controller settles at the 14 m/s target
    world, _, clock = make_world([TrainSpec("w1", "T1", 0)])
    run(world, clock, 120)
    assert world.train("w1").speed == pytest.approx(14.0, abs=0.3)


def test_station_dock_dwell_depart():
    world, events, clock = make_world(
        [TrainSpec("w1", "T1", 0)], stations=[StationSpec("T1", 1, dwell_s=20.0)]
    )
    run(world, clock, 300)
    kinds = [(e.kind, e.detail) for e in events if e.subject == "w1"]
    docked = [e for e in events if e.kind == "STATION_DOCKED"]
    departed = [e for e in events if e.kind == "STATION_DEPARTED"]
    assert ("BLOCK_ENTERED", "T1-B01") in kinds
    assert docked and departed
    # dwell is 20 s between dock and departure
    assert departed[0].ts_us - docked[0].ts_us == 20 * 1_000_000
    # train moves on after dwell
    assert ("BLOCK_ENTERED", "T1-B02") in kinds


def test_signal_red_iff_next_block_occupied():
    world, _, clock = make_world(
        [TrainSpec("w1", "T1", 0), TrainSpec("w2", "T1", 1)]
    )
    # fixed-block rule
    assert world.signal_red("T1", 0) is True     # next block holds w2
    assert world.signal_red("T1", 1) is False
    assert world.signal_red("T1", 7) is True     # wraps to block 0 (w1)


def test_junction_interlock_forces_red():
    layout = LayoutSpec(
        tracks=(
            TrackSpec(id="T1", blocks=8, block_m=200.0),
            TrackSpec(id="T2", blocks=8, block_m=200.0),
        ),
        junctions=(JunctionSpec(a="T1-B02", b="T2-B02"),),
    )
    world = World(layout, (TrainSpec("a", "T1", 0), TrainSpec("b", "T2", 2)))
    # entry into T1-B02 is barred while the partner block is held
    assert world.signal_red("T1", 1) is True
    assert world.signal_red("T1", 0) is False


def test_avoidance_prevents_collision_behind_dwelling_train():
    world, events, clock = make_world(
        [TrainSpec("lead", "T1", 2), TrainSpec("chase", "T1", 0)],
        stations=[StationSpec("T1", 4, dwell_s=60.0)],
    )
    run(world, clock, 900)
    # benign exclusion: no collisions, both alive, never same block
    assert world.collisions == []
    assert world.train("lead").alive and world.train("chase").alive


def test_no_collision_benign_long_run_three_trains():
    world, events, clock = make_world(
        [TrainSpec("a", "T1", 0), TrainSpec("b", "T1", 3), TrainSpec("c", "T1", 6)],
        stations=[StationSpec("T1", 2), StationSpec("T1", 5)],
    )
    run(world, clock, 3600)
    assert world.collisions == []


def test_cutoff_without_avoidance_causes_rear_end_collision():
    world, events, clock = make_world(
        [TrainSpec("victim", "T1", 4), TrainSpec("follower", "T1", 0)]
    )
    run(world, clock, 60)  # get both up to speed
    # the attack: disable avoidance, cut the victim's traction feed
    world.set_avoidance(False)
    world.set_traction_power("victim", False)
    run(world, clock, 600)
    # the follower rams the stopped victim
    assert any("victim" in pair for pair in world.collisions)
    coll = [e for e in events if e.kind == "COLLISION"]
    assert len(coll) >= 1
    assert coll[0].subject == "follower"
    assert "into=victim" in coll[0].detail
    assert not world.train("victim").alive
    assert not world.train("follower").alive


def test_external_avoidance_mode_obeys_brake_commands():
    world, events, clock = make_world(
        [TrainSpec("lead", "T1", 1), TrainSpec("chase", "T1", 0)],
        avoidance="external",
    )
    # external controller runs the fixed-block rule each tick
    for _ in range(900):
        for tid, t in world.trains.items():
            world.set_brake_command(tid, world.signal_red(t.track, t.block))
        clock["t"] += 1_000_000
        world.step(1.0)
    assert world.collisions == []
    # without the controller refresh, protection is gone
    world.set_brake_command("chase", False)
    world.set_traction_power("lead", False)
    run(world, clock, 600)
    assert world.collisions != []


def test_grid_nominal_values_and_power_identity():
    world, events, clock = make_world([TrainSpec("w1", "T1", 0)])
    # 750 V / 400 A nominal supply
    assert world.meter_read() == (750, 400)
    # power == V*I exactly, in integers
    assert world.grid.power_w == 750 * 400 == 300_000
    world.breaker_set(False)
    assert world.meter_read() == (0, 0)
    assert world.grid.power_w == 0
    world.breaker_set(True)
    assert world.grid.power_w == 300_000


def test_breaker_open_unpowers_and_stops_all_trains():
    world, events, clock = make_world(
        [TrainSpec("a", "T1", 0), TrainSpec("b", "T1", 4)]
    )
    run(world, clock, 60)
    assert world.train("a").speed > 10
    world.breaker_set(False)
    lost = [e for e in events if e.kind == "POWER_LOST"]
    assert {e.subject for e in lost} == {"a", "b"}
    run(world, clock, 30)
    # full service brake from 14 m/s stops within ~10 s
    assert world.train("a").speed == 0.0
    assert world.train("b").speed == 0.0
    assert world.collisions == []  # uniform braking preserves separation
    opened = [e for e in events if e.kind == "BREAKER_OPENED"]
    assert opened and "power_w=0" in opened[0].detail


def test_traction_cut_is_per_train():
    world, events, clock = make_world([TrainSpec("a", "T1", 0), TrainSpec("b", "T1", 4)])
    run(world, clock, 60)
    world.set_traction_power("a", False)
    run(world, clock, 30)
    assert world.train("a").speed == 0.0
    assert world.train("b").speed > 10
    world.set_traction_power("a", True)
    run(world, clock, 60)
    assert world.train("a").speed > 10


def test_determinism_identical_histories():
    # same construction -> identical event log and final state
    def one():
        world, events, clock = make_world(
            [TrainSpec("a", "T1", 0), TrainSpec("b", "T1", 3)],
            stations=[StationSpec("T1", 2)],
        )
        run(world, clock, 1200)
        return [(e.ts_us, e.kind, e.subject, e.detail) for e in events], world.to_state()
    assert one() == one()


def test_telemetry_integer_scaling():
    world, _, clock = make_world([TrainSpec("a", "T1", 0)])
    run(world, clock, 60)
    tele = world.telemetry()["a"]
    # registers are integer-scaled views of float truth
    assert tele["speed_cms"] == int(round(world.train("a").speed * 100))
    assert 0 <= tele["speed_cms"] <= 2200
    assert tele["alive"] == 1 and tele["powered"] == 1
