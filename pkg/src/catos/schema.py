"""Trial logic: animal-initiated trials, stimulus choice, response-window
evaluation, reward via the dispense procedure, and result persistence.

State machine:

    IDLE --(blob in trigger zone, ITI elapsed)--> STIMULUS
    STIMULUS --(playback ends)--> AWAIT_RESPONSE
    STIMULUS/AWAIT_RESPONSE --(button, within window)--> evaluate
        correct (or shaping mode) -> REWARD (dispense w/ confirmation)
        wrong -> finalize, ITI
    AWAIT_RESPONSE --(window elapses)--> timeout trial, ITI
    REWARD --(dispense resolved)--> finalize, ITI

ITI is enforced as an earliest-next-trial timestamp; buttons outside a
trial are logged and ignored (no free rewards).
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .rng import SplitMix64

IDLE = "IDLE"
STIMULUS = "STIMULUS"
AWAIT_RESPONSE = "AWAIT_RESPONSE"
REWARD = "REWARD"

RESULT_HEADER = "trial,t_start_ms,stim,button,correct,reward,latency_ms"


class SchemaError(Exception):
    pass


@dataclass
class SchemaConfig:
    stimulus_to_button: dict = field(default_factory=lambda: {0: 0, 1: 1, 2: 2})
    response_window_ms: int = 5000
    inter_trial_interval_ms: int = 10000
    stimulus_order: str = "random_no_repeat"  # or "cycle"
    trigger_zone: tuple = (22, 24, 44, 46)  # x0, y0, x1, y1 inclusive
    reward_any_press: bool = False  # shaping mode: any press is rewarded

    def validate(self):
        m = self.stimulus_to_button
        if sorted(m.keys()) != [0, 1, 2] or sorted(m.values()) != [0, 1, 2]:
            raise SchemaError(
                f"stimulus_to_button must be a bijection on {{0,1,2}}, got {m}")
        if self.response_window_ms <= 0:
            raise SchemaError("response_window_ms must be positive")
        if self.inter_trial_interval_ms < 0:
            raise SchemaError("inter_trial_interval_ms must be >= 0")
        if self.stimulus_order not in ("random_no_repeat", "cycle"):
            raise SchemaError(f"unknown stimulus_order {self.stimulus_order!r}")
        x0, y0, x1, y1 = self.trigger_zone
        if not (x0 < x1 and y0 < y1):
            raise SchemaError(f"degenerate trigger_zone {self.trigger_zone}")
        return self

    def in_zone(self, x, y):
        x0, y0, x1, y1 = self.trigger_zone
        return x0 <= x <= x1 and y0 <= y <= y1


@dataclass(frozen=True)
class TrialResult:
    trial_id: int
    t_start_ms: int
    stimulus_id: int
    response_button: Optional[int]  # None on timeout
    correct: bool
    reward_confirmed: bool
    latency_ms: Optional[int]

    def validate(self, mapping, allow_reward_incorrect=False):
        expected = self.response_button == mapping[self.stimulus_id] \
            if self.response_button is not None else False
        if self.correct != expected:
            raise SchemaError(f"trial {self.trial_id}: correct flag "
                              f"inconsistent with mapping")
        if self.response_button is None and self.latency_ms is not None:
            raise SchemaError(f"trial {self.trial_id}: timeout with latency")
        if self.response_button is not None and self.latency_ms is None:
            raise SchemaError(f"trial {self.trial_id}: press without latency")
        if self.reward_confirmed and not self.correct \
                and not allow_reward_incorrect:
            raise SchemaError(f"trial {self.trial_id}: reward on incorrect")
        return self


def format_result_row(r: TrialResult) -> str:
    button = "NONE" if r.response_button is None else str(r.response_button)
    latency = "" if r.latency_ms is None else str(r.latency_ms)
    return (f"{r.trial_id},{r.t_start_ms},{r.stimulus_id},{button},"
            f"{int(r.correct)},{int(r.reward_confirmed)},{latency}")


def parse_result_csv(path):
    """Returns (results, summary dict or None)."""
    results = []
    summary = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != RESULT_HEADER:
            raise SchemaError(f"bad result CSV header: {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# summary,"):
                parts = line.split(",")[1:]
                if len(parts) != 7:
                    raise SchemaError(f"line {lineno}: bad summary line")
                keys = ("trials", "correct", "incorrect", "b0", "b1", "b2",
                        "rewards")
                summary = dict(zip(keys, (int(p) for p in parts)))
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise SchemaError(f"line {lineno}: expected 7 fields")
            results.append(TrialResult(
                trial_id=int(parts[0]), t_start_ms=int(parts[1]),
                stimulus_id=int(parts[2]),
                response_button=None if parts[3] == "NONE" else int(parts[3]),
                correct=bool(int(parts[4])),
                reward_confirmed=bool(int(parts[5])),
                latency_ms=None if parts[6] == "" else int(parts[6])))
    return results, summary


class ResultWriter:
    def __init__(self, path, mapping, allow_reward_incorrect=False):
        self.path = Path(path)
        self.mapping = mapping
        self.allow_reward_incorrect = allow_reward_incorrect
        self._fh = open(self.path, "a", encoding="utf-8", newline="")
        if self._fh.tell() == 0:
            self._fh.write(RESULT_HEADER + "\n")
            self._fh.flush()
        self.closed = False

    def append(self, result: TrialResult):
        if self.closed:
            raise SchemaError("result file already closed")
        result.validate(self.mapping, self.allow_reward_incorrect)
        self._fh.write(format_result_row(result) + "\n")
        self._fh.flush()

    def write_summary(self, summary):
        if self.closed:
            raise SchemaError("session already closed")
        self._fh.write("# summary,{trials},{correct},{incorrect},"
                       "{b0},{b1},{b2},{rewards}\n".format(**summary))
        self._fh.flush()
        self._fh.close()
        self.closed = True


# actions the machine hands back to its driver
@dataclass(frozen=True)
class PlayStimulus:
    stimulus_id: int
    t_ms: int


@dataclass(frozen=True)
class StartDispense:
    t_ms: int


@dataclass(frozen=True)
class LogNote:
    t_ms: int
    text: str


class TrialMachine:
    """Single-owner trial state machine; the driver feeds events with
    non-decreasing timestamps and executes the returned actions."""

    def __init__(self, config: SchemaConfig, stimuli, seed, writer):
        self.config = config.validate()
        self.stimuli = stimuli
        self.writer = writer
        self.rng = SplitMix64(seed)
        self.phase = IDLE
        self.iti_until = 0
        self.trial_id = 0
        self.last_stimulus = None
        self.closed = False
        self.summary = {"trials": 0, "correct": 0, "incorrect": 0,
                        "b0": 0, "b1": 0, "b2": 0, "rewards": 0}
        # open-trial scratch
        self._stim = None
        self._t_start = None
        self._response = None

    def _next_stimulus(self):
        ids = sorted(s.stimulus_id for s in self.stimuli)
        if self.config.stimulus_order == "cycle":
            if self.last_stimulus is None:
                choice = ids[0]
            else:
                choice = ids[(ids.index(self.last_stimulus) + 1) % len(ids)]
        else:
            pool = ids if self.last_stimulus is None else \
                [s for s in ids if s != self.last_stimulus]
            choice = pool[self.rng.randrange(len(pool))]
        self.last_stimulus = choice
        return choice

    # -- events --------------------------------------------------------------

    def on_blobs(self, t_ms, blobs):
        """Vision event; may start a trial when a blob is in the zone."""
        if self.closed or self.phase != IDLE or t_ms < self.iti_until:
            return []
        if not any(self.config.in_zone(b.centroid_x, b.centroid_y)
                   for b in blobs):
            return []
        self.trial_id += 1
        self._stim = self._next_stimulus()
        self._t_start = t_ms
        self.phase = STIMULUS
        return [PlayStimulus(self._stim, t_ms),
                LogNote(t_ms, f"trial {self.trial_id} start stim={self._stim}")]

    def on_stimulus_end(self, t_ms):
        if self.phase == STIMULUS:
            self.phase = AWAIT_RESPONSE
        return []

    def on_button(self, t_ms, button_id):
        if self.closed or self.phase not in (STIMULUS, AWAIT_RESPONSE):
            return [LogNote(t_ms, f"button {button_id} ignored in {self.phase}")]
        if t_ms > self._t_start + self.config.response_window_ms:
            return [LogNote(t_ms, f"button {button_id} after window, ignored")]
        latency = t_ms - self._t_start
        correct = button_id == self.config.stimulus_to_button[self._stim]
        self._response = (button_id, correct, latency)
        if correct or self.config.reward_any_press:
            self.phase = REWARD
            return [StartDispense(t_ms)]
        return self._finalize(t_ms, button_id, correct, False, latency)

    def on_response_timeout(self, t_ms):
        if self.closed or self.phase not in (STIMULUS, AWAIT_RESPONSE):
            return []
        return self._finalize(t_ms, None, False, False, None)

    def on_dispense_resolved(self, t_ms, outcome):
        if self.phase != REWARD:
            return []
        button_id, correct, latency = self._response
        return self._finalize(t_ms, button_id, correct, outcome.confirmed,
                              latency)

    # -- bookkeeping -----------------------------------------------------------

    def _finalize(self, t_ms, button_id, correct, rewarded, latency):
        result = TrialResult(
            trial_id=self.trial_id, t_start_ms=self._t_start,
            stimulus_id=self._stim, response_button=button_id,
            correct=correct, reward_confirmed=rewarded, latency_ms=latency)
        self.writer.append(result)
        s = self.summary
        s["trials"] += 1
        s["correct" if correct else "incorrect"] += 1
        if button_id is not None:
            s[f"b{button_id}"] += 1
        if rewarded:
            s["rewards"] += 1
        self.phase = IDLE
        self.iti_until = t_ms + self.config.inter_trial_interval_ms
        return [LogNote(t_ms, f"trial {self.trial_id} done "
                              f"correct={int(correct)} reward={int(rewarded)}")]

    def close_session(self, t_ms):
        """Finalize any open trial as a timeout, write the summary line."""
        if self.closed:
            raise SchemaError("session already closed")
        if self.phase in (STIMULUS, AWAIT_RESPONSE):
            self._finalize(t_ms, None, False, False, None)
        elif self.phase == REWARD:
            button_id, correct, latency = self._response
            self._finalize(t_ms, button_id, correct, False, latency)
        self.writer.write_summary(self.summary)
        self.closed = True
        return dict(self.summary)
