"""Host side of the serial link: framing codec and the
dispense-with-confirmation procedure.

Frame layout, byte-exact:

    0xAA | msg_type | length | payload... | checksum

where checksum = XOR over (msg_type, length, payload bytes).  Single XOR
byte rather than a CRC; sufficient for the simulated link and cheap on a
hobby microcontroller.  Upgrade point if the link ever gets noisy.

Message types and payload schemas:

    0x01 DISPENSE       1 byte   servo rotation, degrees
    0x02 SET_LIGHT      1 byte   0 / 1
    0x03 SET_FANS       1 byte   0 / 1
    0x04 QUERY_SENSORS  0 bytes
    0x81 BUTTON         1 byte   button id 0..2
    0x82 PIEZO_HIT      0 bytes
    0x83 SENSORS        4 bytes  temp centi-degC int16 BE, photo uint16 BE
    0x84 DISPENSE_DONE  0 bytes

Multi-byte sensor fields are big-endian.
"""

import struct
from dataclasses import dataclass, field
from typing import Optional

SYNC = 0xAA

DISPENSE = 0x01
SET_LIGHT = 0x02
SET_FANS = 0x03
QUERY_SENSORS = 0x04
BUTTON = 0x81
PIEZO_HIT = 0x82
SENSORS = 0x83
DISPENSE_DONE = 0x84

# msg_type -> required payload length
PAYLOAD_SCHEMA = {
    DISPENSE: 1,
    SET_LIGHT: 1,
    SET_FANS: 1,
    QUERY_SENSORS: 0,
    BUTTON: 1,
    PIEZO_HIT: 0,
    SENSORS: 4,
    DISPENSE_DONE: 0,
}

TYPE_NAMES = {
    DISPENSE: "DISPENSE",
    SET_LIGHT: "SET_LIGHT",
    SET_FANS: "SET_FANS",
    QUERY_SENSORS: "QUERY_SENSORS",
    BUTTON: "BUTTON",
    PIEZO_HIT: "PIEZO_HIT",
    SENSORS: "SENSORS",
    DISPENSE_DONE: "DISPENSE_DONE",
}


class WireError(Exception):
    pass


class LinkClosedError(WireError):
    def __init__(self, attempts):
        super().__init__(f"link closed after {attempts} attempt(s)")
        self.attempts = attempts


@dataclass(frozen=True)
class WireMessage:
    msg_type: int
    payload: bytes = b""

    def validate(self):
        if not 0 <= self.msg_type <= 0xFF:
            raise WireError(f"msg_type {self.msg_type:#x} out of range")
        if len(self.payload) > 255:
            raise WireError(f"payload too long: {len(self.payload)} bytes")
        want = PAYLOAD_SCHEMA.get(self.msg_type)
        if want is not None and len(self.payload) != want:
            raise WireError(
                f"{TYPE_NAMES[self.msg_type]} payload must be {want} bytes, "
                f"got {len(self.payload)}")
        if self.msg_type == BUTTON and self.payload[0] > 2:
            raise WireError(f"button id {self.payload[0]} > 2")
        if self.msg_type in (SET_LIGHT, SET_FANS) and self.payload[0] > 1:
            raise WireError("SET_* payload must be 0 or 1")
        return self

    @property
    def type_name(self):
        return TYPE_NAMES.get(self.msg_type, f"0x{self.msg_type:02X}")


def dispense(degrees):
    if not 0 <= degrees <= 255:
        raise WireError(f"rotation {degrees} out of byte range")
    return WireMessage(DISPENSE, bytes([degrees]))


def set_light(on):
    return WireMessage(SET_LIGHT, bytes([1 if on else 0]))


def set_fans(on):
    return WireMessage(SET_FANS, bytes([1 if on else 0]))


def query_sensors():
    return WireMessage(QUERY_SENSORS)


def button(button_id):
    if not 0 <= button_id <= 2:
        raise WireError(f"button id {button_id} out of range")
    return WireMessage(BUTTON, bytes([button_id]))


def piezo_hit():
    return WireMessage(PIEZO_HIT)


def sensors(temp_c, photo_level):
    centi = int(round(temp_c * 100))
    return WireMessage(SENSORS, struct.pack(">hH", centi, photo_level))


def dispense_done():
    return WireMessage(DISPENSE_DONE)


def sensor_values(msg):
    """(temp_c, photo_level) from a SENSORS message."""
    if msg.msg_type != SENSORS:
        raise WireError(f"not a SENSORS message: {msg.type_name}")
    centi, photo = struct.unpack(">hH", msg.payload)
    return centi / 100.0, photo


def _xor(msg_type, payload):
    c = msg_type ^ len(payload)
    for b in payload:
        c ^= b
    return c


def encode_msg(msg: WireMessage) -> bytes:
    msg.validate()
    return bytes([SYNC, msg.msg_type, len(msg.payload)]) + msg.payload + \
        bytes([_xor(msg.msg_type, msg.payload)])


@dataclass
class DecoderDiagnostics:
    bad_checksum: int = 0
    bad_schema: int = 0
    resync_count: int = 0
    bytes_discarded: int = 0


class FrameDecoder:
    """Incremental frame parser; accepts arbitrary chunk boundaries.

    Never raises on wire garbage: resynchronizes on the next 0xAA and
    accounts for everything it throws away in the diagnostics counters.
    """

    def __init__(self):
        self._buf = bytearray()
        self.diagnostics = DecoderDiagnostics()

    def feed(self, chunk) -> list[WireMessage]:
        self._buf.extend(chunk)
        out = []
        buf = self._buf
        pos = 0
        while True:
            i = buf.find(SYNC, pos)
            if i < 0:
                self.diagnostics.bytes_discarded += len(buf) - pos
                pos = len(buf)
                break
            if i > pos:
                self.diagnostics.bytes_discarded += i - pos
                self.diagnostics.resync_count += 1
                pos = i
            if len(buf) - i < 3:
                break  # header not complete yet
            msg_type = buf[i + 1]
            length = buf[i + 2]
            end = i + 3 + length + 1
            if len(buf) < end:
                break  # frame not complete yet
            payload = bytes(buf[i + 3:i + 3 + length])
            if buf[end - 1] != _xor(msg_type, payload):
                self.diagnostics.bad_checksum += 1
                self.diagnostics.bytes_discarded += 1
                pos = i + 1  # rescan from the byte after the sync
                continue
            want = PAYLOAD_SCHEMA.get(msg_type)
            if want is not None and want != length:
                self.diagnostics.bad_schema += 1
                self.diagnostics.bytes_discarded += 1
                pos = i + 1
                continue
            out.append(WireMessage(msg_type, payload))
            pos = end
        del buf[:pos]
        return out


class Endpoint:
    """One side of an in-memory duplex byte channel."""

    def __init__(self):
        self._inbox = bytearray()
        self.peer: Optional["Endpoint"] = None
        self.closed = False

    def write(self, data):
        if self.closed or self.peer is None or self.peer.closed:
            raise WireError("channel closed")
        self.peer._inbox.extend(data)

    def read(self) -> bytes:
        data = bytes(self._inbox)
        self._inbox.clear()
        return data

    def close(self):
        self.closed = True


def duplex_pipe():
    a, b = Endpoint(), Endpoint()
    a.peer, b.peer = b, a
    return a, b


@dataclass
class DispenseOutcome:
    confirmed: bool
    attempts: int
    t_confirm_ms: Optional[int] = None


class DispenseProcedure:
    """Send DISPENSE, await PIEZO_HIT within a window, retry on miss.

    Pure state machine over simulated time so the same logic serves both
    the synchronous driver below and the event-driven session runner.
    """

    def __init__(self, degrees, max_retries=3, confirm_window_ms=500):
        self.degrees = degrees
        self.max_retries = max_retries
        self.confirm_window_ms = confirm_window_ms
        self.attempts = 0
        self.outcome: Optional[DispenseOutcome] = None

    def start(self, t_ms, send):
        """Issue the first attempt; returns the confirmation deadline."""
        return self._attempt(t_ms, send)

    def _attempt(self, t_ms, send):
        self.attempts += 1
        send(dispense(self.degrees))
        return t_ms + self.confirm_window_ms

    def on_event(self, t_ms, msg) -> bool:
        """Feed a hw event; returns True once the procedure is resolved."""
        if self.outcome is not None:
            return True
        if msg.msg_type == PIEZO_HIT:
            self.outcome = DispenseOutcome(True, self.attempts, t_ms)
            return True
        return False

    def on_deadline(self, t_ms, send):
        """Confirmation window elapsed; returns the next deadline or None
        when the procedure gave up."""
        if self.outcome is not None:
            return None
        if self.attempts <= self.max_retries:
            return self._attempt(t_ms, send)
        self.outcome = DispenseOutcome(False, self.attempts, None)
        return None


def dispense_confirmed(link, degrees, max_retries=3, confirm_window_ms=500):
    """Run the dispense procedure to completion against a link.

    The link must expose now() -> t_ms, send(WireMessage), advance_until(t_ms)
    driving the far side, poll_events() -> list[(t_ms, WireMessage)], and a
    `closed` attribute.  Raises LinkClosedError mid-procedure with the
    attempt count so far.
    """
    proc = DispenseProcedure(degrees, max_retries, confirm_window_ms)
    if link.closed:
        raise LinkClosedError(proc.attempts)
    deadline = proc.start(link.now(), link.send)
    while True:
        link.advance_until(deadline)
        if link.closed:
            raise LinkClosedError(proc.attempts)
        for t_ev, msg in link.poll_events():
            if proc.on_event(t_ev, msg):
                break
        if proc.outcome is not None:
            return proc.outcome
        deadline = proc.on_deadline(link.now(), link.send)
        if deadline is None:
            return proc.outcome
