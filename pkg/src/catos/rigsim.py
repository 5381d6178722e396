"""Simulated microcontroller board, feeder, cage environment, and animal.

The board answers the wire protocol exactly as the firmware would: it owns
the far end of the byte channel, decodes host commands, runs the feeder
physics (Archimedes screw, occasional dispense failures, piezo
confirmation), enforces the fan/light hysteresis rules, and emits sensor
and button events.  The host side only ever sees bytes.

The animal agent lives here too, so the trainer side stays honest: it
learns about the animal exclusively through wire events and camera frames.
"""

import heapq
import math
from dataclasses import dataclass
from typing import Optional

from . import hwlink
from .rng import SplitMix64


@dataclass
class RigParams:
    p_dispense: float = 0.8
    piezo_delay_ms: int = 150
    motor_ms: int = 300
    hopper_pieces: int = 500
    dispense_degrees: int = 45
    max_retries: int = 3
    confirm_window_ms: int = 500
    ambient_c: float = 22.0
    heat_load_c: float = 10.0
    fan_cooling_c: float = 12.0
    temp_tau_ms: float = 600000.0
    t_hi_c: float = 30.0
    t_hysteresis_c: float = 2.0
    l_lo: int = 200
    l_hysteresis: int = 50
    env_tick_ms: int = 1000
    initial_temp_c: float = 22.0
    day_curve_knots: tuple = ((0, 600),)


@dataclass
class RigState:
    temp_c: float
    photo_level: int
    fans_on: bool = False
    light_on: bool = False
    screw_position_deg: float = 0.0
    hopper_pieces: int = 0


class DayCurve:
    """Piecewise-linear ambient light level over simulated time."""

    def __init__(self, knots):
        self.knots = sorted((int(t), float(v)) for t, v in knots)
        if not self.knots:
            raise ValueError("day curve needs at least one knot")

    def level(self, t_ms) -> int:
        ks = self.knots
        if t_ms <= ks[0][0]:
            return int(round(ks[0][1]))
        if t_ms >= ks[-1][0]:
            return int(round(ks[-1][1]))
        for (t0, v0), (t1, v1) in zip(ks, ks[1:]):
            if t0 <= t_ms <= t1:
                f = (t_ms - t0) / (t1 - t0)
                return int(round(v0 + f * (v1 - v0)))
        return int(round(ks[-1][1]))


def step_env(state: RigState, params: RigParams, dt_ms, day_curve, t_ms):
    """One environment tick: first-order temperature response plus the
    autonomous fan/light rules with hysteresis."""
    if dt_ms <= 0:
        raise ValueError("dt_ms must be positive")
    target = params.ambient_c + params.heat_load_c
    if state.fans_on:
        target -= params.fan_cooling_c
    k = 1.0 - math.exp(-dt_ms / params.temp_tau_ms)
    state.temp_c += (target - state.temp_c) * k
    state.photo_level = day_curve.level(t_ms)

    if state.temp_c >= params.t_hi_c:
        state.fans_on = True
    elif state.temp_c <= params.t_hi_c - params.t_hysteresis_c:
        state.fans_on = False

    if state.photo_level < params.l_lo:
        state.light_on = True
    elif state.photo_level >= params.l_lo + params.l_hysteresis:
        state.light_on = False
    return state


class RigBoard:
    """Firmware emulation: wire in, wire out, everything else internal."""

    def __init__(self, params: RigParams, seed: int, endpoint: hwlink.Endpoint):
        self.params = params
        self.endpoint = endpoint
        self.rng = SplitMix64(seed)
        self.day_curve = DayCurve(params.day_curve_knots)
        self.state = RigState(
            temp_c=params.initial_temp_c,
            photo_level=self.day_curve.level(0),
            hopper_pieces=params.hopper_pieces,
        )
        self.decoder = hwlink.FrameDecoder()
        self.ignored_messages = 0
        self.piezo_hits = 0
        self._pending = []  # (t, seq, WireMessage)
        self._seq = 0
        self._env_t = 0

    # -- ingest ------------------------------------------------------------

    def receive(self, t_ms):
        """Consume any bytes the host has written, handling each command."""
        self._advance_env(t_ms)
        for msg in self.decoder.feed(self.endpoint.read()):
            self.handle_host_msg(msg, t_ms)

    def handle_host_msg(self, msg: hwlink.WireMessage, t_ms):
        st = self.state
        if msg.msg_type == hwlink.DISPENSE:
            degrees = msg.payload[0]
            st.screw_position_deg = (st.screw_position_deg + degrees) % 360.0
            if st.hopper_pieces > 0 and self.rng.random() < self.params.p_dispense:
                self._schedule(t_ms + self.params.piezo_delay_ms, "drop")
            self._schedule(t_ms + self.params.motor_ms,
                           hwlink.dispense_done())
        elif msg.msg_type == hwlink.QUERY_SENSORS:
            self._schedule(t_ms, hwlink.sensors(st.temp_c, st.photo_level))
        elif msg.msg_type == hwlink.SET_LIGHT:
            st.light_on = bool(msg.payload[0])
        elif msg.msg_type == hwlink.SET_FANS:
            st.fans_on = bool(msg.payload[0])
        else:
            self.ignored_messages += 1

    def press_button(self, button_id, t_ms):
        """Animal pressed a physical button; emit the wire event."""
        self._schedule(t_ms, hwlink.button(button_id))

    # -- time --------------------------------------------------------------

    def _schedule(self, t_ms, item):
        self._seq += 1
        heapq.heappush(self._pending, (t_ms, self._seq, item))

    def next_emission_time(self) -> Optional[int]:
        return self._pending[0][0] if self._pending else None

    def flush_due(self, t_ms):
        """Write every scheduled emission with time <= t_ms to the wire."""
        self._advance_env(t_ms)
        while self._pending and self._pending[0][0] <= t_ms:
            et, _, item = heapq.heappop(self._pending)
            if item == "drop":
                # the piece actually falls now; piezo confirms it
                self.state.hopper_pieces -= 1
                self.piezo_hits += 1
                self.endpoint.write(hwlink.encode_msg(hwlink.piezo_hit()))
            else:
                self.endpoint.write(hwlink.encode_msg(item))

    def _advance_env(self, t_ms):
        tick = self.params.env_tick_ms
        while self._env_t + tick <= t_ms:
            self._env_t += tick
            step_env(self.state, self.params, tick, self.day_curve, self._env_t)


class RigHarness:
    """Host-side view of a board over the byte channel.

    Implements the link contract used by hwlink.dispense_confirmed and by
    tests: simulated clock, send, advance, timestamped event polling.
    """

    def __init__(self, params: RigParams = None, seed: int = 0):
        host_end, rig_end = hwlink.duplex_pipe()
        self.host_end = host_end
        self.board = RigBoard(params or RigParams(), seed, rig_end)
        self.decoder = hwlink.FrameDecoder()
        self._t = 0
        self._events = []
        self.closed = False

    def now(self):
        return self._t

    def send(self, msg):
        if self.closed:
            raise hwlink.WireError("link closed")
        self.host_end.write(hwlink.encode_msg(msg))
        self.board.receive(self._t)

    def advance_until(self, target_ms):
        while True:
            tn = self.board.next_emission_time()
            if tn is None or tn > target_ms:
                break
            self.board.flush_due(tn)
            self._t = tn
            self._drain(tn)
        self.board.flush_due(target_ms)
        self._t = target_ms
        self._drain(target_ms)

    def _drain(self, t_ms):
        for msg in self.decoder.feed(self.host_end.read()):
            self._events.append((t_ms, msg))

    def poll_events(self):
        out = self._events
        self._events = []
        return out

    def close(self):
        self.closed = True


@dataclass
class AgentPolicy:
    accuracy: float = 0.7
    approach_latency_ms: int = 1500
    trial_appetite: float = 20.0  # expected feeder visits per hour
    dwell_ms: int = 15000
    blob_radius: float = 4.0
    blob_intensity: int = 190
    orbit_radius: float = 8.0
    speed_px_s: float = 15.0

    def validate(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        if self.trial_appetite < 0:
            raise ValueError("trial_appetite must be >= 0")
        return self


def choose_button(policy: AgentPolicy, stimulus_button: int, rng: SplitMix64) -> int:
    """Correct button with probability = accuracy; the two wrong buttons
    split the remainder evenly."""
    u = rng.random()
    if u < policy.accuracy:
        return stimulus_button
    wrong = [b for b in (0, 1, 2) if b != stimulus_button]
    return wrong[0] if u < policy.accuracy + (1.0 - policy.accuracy) / 2.0 else wrong[1]


def plan_visits(policy: AgentPolicy, duration_ms: int, rng: SplitMix64):
    """Poisson feeder visits: exponential gaps at trial_appetite per hour,
    each visit lasting dwell_ms.  Returns [(enter_ms, leave_ms), ...]."""
    if policy.trial_appetite <= 0:
        return []
    rate_per_ms = policy.trial_appetite / 3600000.0
    visits = []
    t = 0.0
    while True:
        t += rng.expovariate(rate_per_ms)
        enter = int(round(t))
        if enter >= duration_ms:
            break
        leave = min(enter + policy.dwell_ms, duration_ms)
        visits.append((enter, leave))
        t = leave
    return visits


def orbit_path(visit_id, enter_ms, leave_ms, center, orbit_radius,
               blob_radius, intensity, speed_px_s=15.0, segments_per_rev=8):
    """Motion script for one feeder visit: the blob circles slowly inside
    the trigger zone so no background pixel sees it long enough to absorb
    it into the background model.

    Returns script entries (blob_id, t0, t1, (x0, y0), (x1, y1), radius,
    intensity) for the synthetic camera.
    """
    cx, cy = center
    if leave_ms <= enter_ms:
        return []
    omega = speed_px_s / orbit_radius  # rad/s
    seg_ms = max(1, int(round((2 * math.pi / omega) * 1000 / segments_per_rev)))
    entries = []
    t = enter_ms
    k = 0
    while t < leave_ms:
        t1 = min(t + seg_ms, leave_ms)
        a0 = omega * (t - enter_ms) / 1000.0
        a1 = omega * (t1 - enter_ms) / 1000.0
        p0 = (cx + orbit_radius * math.cos(a0), cy + orbit_radius * math.sin(a0))
        p1 = (cx + orbit_radius * math.cos(a1), cy + orbit_radius * math.sin(a1))
        entries.append((visit_id, t, t1, p0, p1, blob_radius, intensity))
        t = t1
        k += 1
    return entries
