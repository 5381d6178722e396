"""Per-camera pipeline: synthetic frame source, motion blob detection
against a running background model, movement-record persistence, and the
gate that decides which stretches of the stream are worth storing.

Clips are persisted as directories of binary PGM frames plus a JSON
manifest; codec-free, so every byte is testable.
"""

import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels


class VisionError(Exception):
    pass


@dataclass(frozen=True)
class Frame:
    camera_id: int
    t_sim_ms: int
    width: int
    height: int
    pixels: np.ndarray  # uint8, shape (height, width), row-major

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise VisionError(f"frame dims {self.width}x{self.height} below 8x8")
        if self.pixels.shape != (self.height, self.width):
            raise VisionError(
                f"pixel buffer {self.pixels.shape} != (h={self.height}, w={self.width})")


@dataclass(frozen=True)
class Blob:
    centroid_x: float
    centroid_y: float
    area: int
    bbox: tuple  # (min_x, min_y, max_x, max_y), inclusive


@dataclass(frozen=True)
class MovementRecordRow:
    t_ms: int
    blob: int
    cx: float
    cy: float
    area: int


@dataclass
class VisionParams:
    diff_threshold: float = 30.0
    min_blob_area: int = 20
    bg_alpha: float = 0.02
    pre_roll_ms: int = 2000
    hangover_ms: int = 3000


# ---------------------------------------------------------------------------
# synthetic frame source
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScriptEntry:
    """One scripted blob path segment: a disk of the given radius and
    intensity moving linearly from p0 to p1 over [t0_ms, t1_ms)."""
    blob_id: int
    t0_ms: int
    t1_ms: int
    p0: tuple
    p1: tuple
    radius: float
    intensity: int

    def position(self, t_ms):
        if self.t1_ms == self.t0_ms:
            return self.p0
        f = (t_ms - self.t0_ms) / (self.t1_ms - self.t0_ms)
        return (self.p0[0] + f * (self.p1[0] - self.p0[0]),
                self.p0[1] + f * (self.p1[1] - self.p0[1]))


def frame_times(fps, duration_ms):
    """Frame grid: t = round(i * 1000/fps) for i = 0.. while t <= duration."""
    if fps <= 0:
        raise VisionError("fps must be positive")
    n = int(math.floor(duration_ms * fps / 1000.0)) + 1
    return [int(round(i * 1000.0 / fps)) for i in range(n)]


class SyntheticCamera:
    """Deterministic test double for a camera.

    Same (seed, script) produces bit-identical frames.  The background is a
    static seeded texture; per-frame noise is keyed on (seed, t) so frames
    can be generated in any order.  Script entries may be appended while
    the stream runs, as long as they do not overlap an existing entry for
    the same blob id.
    """

    def __init__(self, camera_id, width, height, fps, duration_ms, seed,
                 noise_amp=3, bg_base=70, bg_texture_amp=10, script=()):
        if fps <= 0:
            raise VisionError("fps must be positive")
        self.camera_id = camera_id
        self.width = width
        self.height = height
        self.fps = fps
        self.duration_ms = duration_ms
        self.seed = seed
        self.noise_amp = int(noise_amp)
        self.entries = []
        self._buckets = {}  # t_ms // 1000 -> entries active in that second
        tex_rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((seed, 0xBE))))
        texture = bg_base + tex_rng.integers(
            -bg_texture_amp, bg_texture_amp + 1, size=(height, width))
        self.texture = np.clip(texture, 0, 255).astype(np.uint8)
        self.add_entries(script)

    def _bucket_range(self, e):
        return range(e.t0_ms // 1000, max(e.t0_ms, e.t1_ms - 1) // 1000 + 1)

    def add_entries(self, entries):
        for e in entries:
            e = ScriptEntry(*e) if not isinstance(e, ScriptEntry) else e
            seen = set()
            for b in self._bucket_range(e):
                for old in self._buckets.get(b, ()):
                    if id(old) in seen:
                        continue
                    seen.add(id(old))
                    if old.blob_id == e.blob_id and \
                            e.t0_ms < old.t1_ms and e.t1_ms > old.t0_ms:
                        raise VisionError(
                            f"script entries for blob {e.blob_id} overlap: "
                            f"[{old.t0_ms},{old.t1_ms}) vs [{e.t0_ms},{e.t1_ms})")
            self.entries.append(e)
            for b in self._bucket_range(e):
                self._buckets.setdefault(b, []).append(e)

    def frame_times(self):
        return frame_times(self.fps, self.duration_ms)

    def frame_at(self, t_ms) -> Frame:
        px = self.texture.copy()
        if self.noise_amp > 0:
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence((self.seed, t_ms))))
            noise = rng.integers(-self.noise_amp, self.noise_amp + 1,
                                 size=px.shape)
            px = np.clip(px.astype(np.int16) + noise, 0, 255).astype(np.uint8)
        active = sorted((e for e in self._buckets.get(t_ms // 1000, ())
                         if e.t0_ms <= t_ms < e.t1_ms),
                        key=lambda e: e.blob_id)
        if active:
            pos = [e.position(t_ms) for e in active]
            kernels.render_disks(
                px,
                [p[0] for p in pos], [p[1] for p in pos],
                [e.radius for e in active], [e.intensity for e in active])
        return Frame(self.camera_id, t_ms, self.width, self.height, px)

    def frames(self):
        for t in self.frame_times():
            yield self.frame_at(t)


# ---------------------------------------------------------------------------
# motion detection
# ---------------------------------------------------------------------------

def init_background(frame: Frame):
    return frame.pixels.astype(np.float64)


def detect_motion_blobs(frame: Frame, bg, params: VisionParams):
    """Threshold |frame - bg|, label 8-connected components, then update the
    background as an exponential running average.

    Returns (blobs ordered by (min_x, min_y), updated bg).
    """
    if bg.shape != frame.pixels.shape:
        raise VisionError(f"background {bg.shape} != frame {frame.pixels.shape}")
    fpx = frame.pixels.astype(np.float64)
    mask = np.abs(fpx - bg) > params.diff_threshold
    blobs = []
    if mask.any():
        stats = kernels.connected_components(mask, params.min_blob_area)
        for area, min_x, min_y, max_x, max_y, cx, cy in stats:
            blobs.append(Blob(
                centroid_x=float(cx), centroid_y=float(cy), area=int(area),
                bbox=(int(min_x), int(min_y), int(max_x), int(max_y))))
    new_bg = (1.0 - params.bg_alpha) * bg + params.bg_alpha * fpx
    return blobs, new_bg


def blobs_to_rows(t_ms, blobs):
    return [MovementRecordRow(t_ms=t_ms, blob=i, cx=b.centroid_x,
                              cy=b.centroid_y, area=b.area)
            for i, b in enumerate(blobs)]


# ---------------------------------------------------------------------------
# movement-record CSV
# ---------------------------------------------------------------------------

MOVEMENT_HEADER = "t_ms,blob,cx,cy,area"


def format_movement_row(row: MovementRecordRow) -> str:
    return f"{row.t_ms},{row.blob},{row.cx:.2f},{row.cy:.2f},{row.area}"


def parse_movement_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != MOVEMENT_HEADER:
            raise VisionError(f"bad movement CSV header: {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise VisionError(f"line {lineno}: expected 5 fields")
            rows.append(MovementRecordRow(
                t_ms=int(parts[0]), blob=int(parts[1]),
                cx=float(parts[2]), cy=float(parts[3]), area=int(parts[4])))
    return rows


class MovementRecordWriter:
    """Appends movement rows, one flush per frame."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "a", encoding="utf-8", newline="")
        if self._fh.tell() == 0:
            self._fh.write(MOVEMENT_HEADER + "\n")
            self._fh.flush()

    def append(self, rows):
        for row in rows:
            self._fh.write(format_movement_row(row) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()


# ---------------------------------------------------------------------------
# record gate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GateOpen:
    t_start_ms: int


@dataclass(frozen=True)
class GateFrame:
    frame: Frame


@dataclass(frozen=True)
class GateClose:
    t_end_ms: int


class RecordGate:
    """Motion-gated recording state machine.

    A clip covers [first_motion - pre_roll, last_motion + hangover], merged
    with the next clip whenever that one's pre-roll would reach back into
    this one's hangover; the resulting clip set equals the merged union of
    per-motion intervals, clamped to the stream bounds.  Frames whose fate
    is still undecided sit in the pre-roll ring until they are either
    committed to a clip or age out.
    """

    def __init__(self, pre_roll_ms, hangover_ms, stream_start_ms=0):
        self.pre = pre_roll_ms
        self.hang = hangover_ms
        self.stream_start = stream_start_ms
        self.ring = deque()  # uncommitted (t, frame)
        self.open = False
        self.clip_start = None
        self.last_motion = None

    def step(self, t_ms, motion_present, frame=None):
        events = []
        if self.open and not motion_present and \
                t_ms - self.last_motion >= self.hang + self.pre:
            events.append(GateClose(self.last_motion + self.hang))
            self.open = False
        if motion_present:
            if self.open and t_ms - self.last_motion > self.hang + self.pre:
                events.append(GateClose(self.last_motion + self.hang))
                self.open = False
            if not self.open:
                self.clip_start = max(self.stream_start, t_ms - self.pre)
                events.append(GateOpen(self.clip_start))
                self.open = True
            while self.ring and self.ring[0][0] < self.clip_start:
                self.ring.popleft()
            while self.ring and self.ring[0][0] <= t_ms:
                events.append(GateFrame(self.ring.popleft()[1]))
            if frame is not None:
                events.append(GateFrame(frame))
            self.last_motion = t_ms
        else:
            if self.open and t_ms <= self.last_motion + self.hang:
                if frame is not None:
                    events.append(GateFrame(frame))
            elif frame is not None:
                self.ring.append((t_ms, frame))
            if not self.open:
                while self.ring and self.ring[0][0] < t_ms - self.pre:
                    self.ring.popleft()
        return events

    def finish(self, t_end_ms):
        """Stream over; close any open clip, clamped to the stream end."""
        events = []
        if self.open:
            events.append(GateClose(min(self.last_motion + self.hang, t_end_ms)))
            self.open = False
        self.ring.clear()
        return events


def gate_intervals_oracle(motion_times, pre_roll_ms, hangover_ms,
                          stream_start_ms, stream_end_ms):
    """Reference clip set: union of [t-pre, t+hang] per motion time, merged,
    clamped to [stream_start, stream_end]."""
    out = []
    for t in sorted(motion_times):
        a = max(stream_start_ms, t - pre_roll_ms)
        b = min(stream_end_ms, t + hangover_ms)
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


@dataclass(frozen=True)
class ClipSegment:
    camera_id: int
    start_ms: int
    end_ms: int
    fps: float
    frame_times_ms: tuple

    def __post_init__(self):
        if self.start_ms >= self.end_ms:
            raise VisionError(f"empty clip [{self.start_ms}, {self.end_ms}]")
        for t in self.frame_times_ms:
            if not self.start_ms <= t <= self.end_ms:
                raise VisionError(f"frame t={t} outside clip "
                                  f"[{self.start_ms}, {self.end_ms}]")


# ---------------------------------------------------------------------------
# PGM + clip container
# ---------------------------------------------------------------------------

def pgm_bytes(pixels) -> bytes:
    h, w = pixels.shape
    return b"P5\n%d %d\n255\n" % (w, h) + pixels.astype(np.uint8).tobytes()


def write_pgm(path, pixels):
    Path(path).write_bytes(pgm_bytes(pixels))


def read_pgm(path):
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise VisionError(f"{path}: not a binary PGM")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos] in b" \t\r\n":
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in b" \t\r\n":
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise VisionError(f"{path}: unsupported maxval {maxval}")
    px = np.frombuffer(data[pos:pos + w * h], dtype=np.uint8)
    if px.size != w * h:
        raise VisionError(f"{path}: truncated pixel data")
    return px.reshape(h, w).copy()


class ClipWriter:
    """Writes one clip as a directory of f%06d.pgm frames + manifest.json."""

    def __init__(self, root, clip_id, camera_id, fps, start_ms):
        self.dir = Path(root) / clip_id
        self.dir.mkdir(parents=True, exist_ok=False)
        self.clip_id = clip_id
        self.camera_id = camera_id
        self.fps = fps
        self.start_ms = start_ms
        self.frame_times = []

    def add_frame(self, frame: Frame):
        self.frame_times.append(frame.t_sim_ms)
        write_pgm(self.dir / f"f{len(self.frame_times):06d}.pgm", frame.pixels)

    def close(self, end_ms):
        manifest = {
            "clip_id": self.clip_id,
            "camera_id": self.camera_id,
            "start_ms": self.start_ms,
            "end_ms": end_ms,
            "fps": self.fps,
            "frame_count": len(self.frame_times),
            "frame_times_ms": self.frame_times,
        }
        with open(self.dir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return ClipSegment(self.camera_id, self.start_ms, end_ms, self.fps,
                           tuple(self.frame_times))


def read_clip_manifest(clip_dir):
    with open(Path(clip_dir) / "manifest.json", "r", encoding="utf-8") as fh:
        return json.load(fh)
