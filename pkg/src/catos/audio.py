"""Audio out (tone stimulus synthesis, WAV persistence) and audio in
(onset detection + template classification on a simulated mic stream).

Stimuli are pure tones rather than speech: the trial logic only needs
three reliably distinct classes.  Classification is single-bin tone power
(kernels.tone_power) at each template's fundamental over a short window
after the detected onset.
"""

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels

FULL_SCALE = 32767


class AudioError(Exception):
    pass


class WavFormatError(AudioError):
    """Malformed RIFF/WAVE header."""


class WavUnsupportedError(AudioError):
    """Valid WAV, but not PCM mono 16-bit."""


class WavTruncatedError(AudioError):
    """Data chunk shorter than its declared size."""


@dataclass(frozen=True)
class AudioBuffer:
    sample_rate: int
    samples: np.ndarray  # int16
    t_start_ms: int = 0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise AudioError(f"sample_rate {self.sample_rate} must be positive")
        if self.samples.dtype != np.int16:
            raise AudioError(f"samples must be int16, got {self.samples.dtype}")

    @property
    def duration_ms(self):
        return self.samples.size * 1000.0 / self.sample_rate


@dataclass(frozen=True)
class StimulusSpec:
    stimulus_id: int
    tone_hz: float
    duration_ms: int


DEFAULT_STIMULI = (
    StimulusSpec(0, 440.0, 500),
    StimulusSpec(1, 660.0, 500),
    StimulusSpec(2, 880.0, 500),
)


def validate_stimuli(specs):
    ids = [s.stimulus_id for s in specs]
    tones = [s.tone_hz for s in specs]
    if len(set(ids)) != len(ids):
        raise AudioError("stimulus ids must be unique")
    if len(set(tones)) != len(tones):
        raise AudioError("stimulus tones must be distinct")
    return tuple(sorted(specs, key=lambda s: s.stimulus_id))


@dataclass
class AudioParams:
    sample_rate: int = 16000
    rms_window_ms: int = 10
    rms_threshold_dbfs: float = -30.0
    classify_window_ms: int = 300
    amplitude: float = 0.5
    fade_ms: int = 10
    mic_noise_amp: int = 0

    @property
    def rms_threshold(self):
        return 10.0 ** (self.rms_threshold_dbfs / 20.0) * FULL_SCALE


def synth_stimulus(spec: StimulusSpec, sample_rate=16000, amplitude=0.5,
                   fade_ms=10, t_start_ms=0) -> AudioBuffer:
    """Sine tone with linear fade-in/out; deterministic."""
    if spec.duration_ms <= 0:
        raise AudioError(f"duration {spec.duration_ms} ms must be positive")
    if spec.tone_hz >= sample_rate / 2:
        raise AudioError(
            f"tone {spec.tone_hz} Hz aliases at {sample_rate} Hz sampling")
    n = int(round(spec.duration_ms * sample_rate / 1000.0))
    t = np.arange(n) / sample_rate
    wave = (amplitude * FULL_SCALE) * np.sin(2.0 * math.pi * spec.tone_hz * t)
    k = int(round(fade_ms * sample_rate / 1000.0))
    if k > 0 and n >= 2 * k:
        env = np.ones(n)
        env[:k] = np.arange(k) / k
        env[n - k:] = np.arange(k, 0, -1) / k
        wave = wave * env
    samples = np.clip(np.round(wave), -32768, 32767).astype(np.int16)
    return AudioBuffer(sample_rate, samples, t_start_ms)


# ---------------------------------------------------------------------------
# WAV I/O: canonical 44-byte-header RIFF/WAVE, PCM, mono, 16-bit LE
# ---------------------------------------------------------------------------

def wav_write(buf: AudioBuffer, path):
    data = buf.samples.astype("<i2").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(data), b"WAVE",
        b"fmt ", 16, 1, 1, buf.sample_rate, buf.sample_rate * 2, 2, 16,
        b"data", len(data))
    Path(path).write_bytes(header + data)


def wav_read(path, t_start_ms=0) -> AudioBuffer:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: missing RIFF/WAVE magic")
    pos = 12
    fmt = None
    while pos + 8 <= len(raw):
        cid, size = struct.unpack("<4sI", raw[pos:pos + 8])
        body = raw[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if size < 16:
                raise WavFormatError(f"{path}: fmt chunk too short")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            if fmt is None:
                raise WavFormatError(f"{path}: data chunk before fmt")
            audio_format, channels, rate, _, _, bits = fmt
            if audio_format != 1:
                raise WavUnsupportedError(
                    f"{path}: audio format {audio_format} is not PCM")
            if channels != 1 or bits != 16:
                raise WavUnsupportedError(
                    f"{path}: expected mono 16-bit, got {channels}ch {bits}-bit")
            if len(body) < size:
                raise WavTruncatedError(
                    f"{path}: data chunk declares {size} bytes, "
                    f"{len(body)} present")
            samples = np.frombuffer(body[:size], dtype="<i2").astype(np.int16)
            return AudioBuffer(rate, samples, t_start_ms)
        pos += 8 + size + (size & 1)
    raise WavFormatError(f"{path}: no data chunk")


# ---------------------------------------------------------------------------
# onset detection + classification
# ---------------------------------------------------------------------------

def _window_rms(x: np.ndarray, win: int) -> np.ndarray:
    nwin = x.size // win
    if nwin == 0:
        return np.empty(0)
    blocks = x[:nwin * win].astype(np.float64).reshape(nwin, win)
    return np.sqrt((blocks * blocks).mean(axis=1))


@dataclass(frozen=True)
class OnsetResult:
    stimulus_id: int
    t_onset_ms: int
    confidence: float
    capture: AudioBuffer


class OnsetStream:
    """Incremental onset detector/classifier over a block-wise sample feed.

    One detection per loud burst: after firing, it re-arms only once the
    window RMS falls back below threshold.
    """

    def __init__(self, params: AudioParams, templates):
        self.params = params
        self.templates = validate_stimuli(templates)
        if not self.templates:
            raise AudioError("need at least one template")
        self.win = int(round(params.rms_window_ms * params.sample_rate / 1000.0))
        self.cls_len = int(round(
            params.classify_window_ms * params.sample_rate / 1000.0))
        self._carry = np.empty(0, np.int16)
        self._carry_t0 = 0
        self._scanned = 0  # windows consumed from carry start
        self._armed = True
        self._pending: Optional[int] = None  # onset sample index into carry

    def feed(self, samples: np.ndarray, t_start_ms=None, flush=False):
        if samples.size:
            if self._carry.size == 0 and t_start_ms is not None:
                self._carry_t0 = t_start_ms
            self._carry = np.concatenate((self._carry, samples))
        results = []
        thr = self.params.rms_threshold
        loud = None  # precomputed rms > thr for whole windows not yet scanned
        loud_base = self._scanned
        while True:
            if self._pending is not None:
                have = self._carry.size - self._pending
                if have < self.cls_len and not flush:
                    break
                if have <= 0:
                    break
                results.append(self._classify(self._pending))
                self._pending = None
                continue
            lo = self._scanned * self.win
            if lo + self.win > self._carry.size:
                break
            if loud is None:
                rms = _window_rms(self._carry[loud_base * self.win:], self.win)
                loud = rms > thr
            if loud[self._scanned - loud_base]:
                if self._armed:
                    self._pending = lo
                    self._armed = False
            else:
                self._armed = True
            self._scanned += 1
        if self._pending is None:
            drop = self._scanned * self.win
            if drop:
                self._carry = self._carry[drop:]
                self._carry_t0 += int(round(drop * 1000.0 / self.params.sample_rate))
                self._scanned = 0
        return results

    def _classify(self, onset_idx):
        seg = self._carry[onset_idx:onset_idx + self.cls_len]
        energies = [kernels.tone_power(seg, self.params.sample_rate, tpl.tone_hz)
                    for tpl in self.templates]
        total = sum(energies)
        best = int(np.argmax(energies))
        confidence = energies[best] / total if total > 0 else 0.0
        t_onset = self._carry_t0 + int(round(
            onset_idx * 1000.0 / self.params.sample_rate))
        capture = AudioBuffer(self.params.sample_rate, seg.copy(), t_onset)
        return OnsetResult(self.templates[best].stimulus_id, t_onset,
                           confidence, capture)


def classify_onset(buf: AudioBuffer, templates, params: AudioParams = None):
    """First onset in the buffer, or None.

    Returns (stimulus_id, t_onset_ms, confidence).
    """
    params = params or AudioParams(sample_rate=buf.sample_rate)
    if params.sample_rate != buf.sample_rate:
        raise AudioError("params.sample_rate != buffer sample_rate")
    stream = OnsetStream(params, templates)
    results = stream.feed(buf.samples, t_start_ms=buf.t_start_ms, flush=True)
    if not results:
        return None
    r = results[0]
    return (r.stimulus_id, r.t_onset_ms, r.confidence)


class MicMixdown:
    """Simulated microphone: sums registered playbacks over silence plus
    optional bounded uniform noise, rendered block by block."""

    def __init__(self, params: AudioParams, seed=0):
        self.params = params
        self.seed = seed
        self._playbacks = []  # (start_ms, AudioBuffer)

    def add_playback(self, start_ms, buf: AudioBuffer):
        if buf.sample_rate != self.params.sample_rate:
            raise AudioError("playback sample rate mismatch")
        self._playbacks.append((start_ms, buf))

    def block(self, t0_ms, t1_ms) -> np.ndarray:
        rate = self.params.sample_rate
        i0 = t0_ms * rate // 1000
        i1 = t1_ms * rate // 1000
        n = i1 - i0
        acc = np.zeros(n, np.int32)
        for start_ms, buf in self._playbacks:
            s0 = start_ms * rate // 1000
            s1 = s0 + buf.samples.size
            a, b = max(i0, s0), min(i1, s1)
            if a < b:
                acc[a - i0:b - i0] += buf.samples[a - s0:b - s0]
        amp = self.params.mic_noise_amp
        if amp > 0:
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence((self.seed, t0_ms))))
            acc += rng.integers(-amp, amp + 1, size=n)
        # finished playbacks can be forgotten
        self._playbacks = [(s, b) for s, b in self._playbacks
                           if s * rate // 1000 + b.samples.size > i1]
        return np.clip(acc, -32768, 32767).astype(np.int16)
