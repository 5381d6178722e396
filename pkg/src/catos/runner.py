"""Deterministic end-to-end session: one event loop composing the camera
pipelines, audio in/out, the trial machine, the host<->rig byte link, and
the animal agent.

All time is simulated milliseconds; nothing reads the wall clock.  Events
at equal timestamps run in scheduling order, so a (seed, config) pair
fixes every output byte.
"""

import heapq
import json
from pathlib import Path

import numpy as np

from . import audio as audiolib
from . import hwlink, rigsim
from . import schema as schemalib
from . import vision as visionlib
from .bus import MessageBoard, Publisher
from .config import RunConfig
from .rng import SplitMix64, derive_seed

AUDIO_BLOCK_MS = 1000
SENSOR_POLL_MS = 60000


class RunnerError(Exception):
    pass


class _CameraPipeline:
    def __init__(self, cam_cfg, vision_params, seed, duration_ms, out_dir):
        self.cfg = cam_cfg
        self.params = vision_params
        self.camera = visionlib.SyntheticCamera(
            cam_cfg.camera_id, cam_cfg.width, cam_cfg.height, cam_cfg.fps,
            duration_ms, seed, noise_amp=cam_cfg.noise_amp,
            bg_base=cam_cfg.bg_base, bg_texture_amp=cam_cfg.bg_texture_amp)
        self.bg = None
        self.gate = visionlib.RecordGate(
            vision_params.pre_roll_ms, vision_params.hangover_ms)
        self.movement = visionlib.MovementRecordWriter(
            Path(out_dir) / f"movement_cam{cam_cfg.camera_id}.csv")
        self.out_dir = Path(out_dir)
        self.clip_writer = None
        self.clip_count = 0
        self.clips = []

    def gate_events(self, events):
        for ev in events:
            if isinstance(ev, visionlib.GateOpen):
                self.clip_count += 1
                clip_id = f"clip_cam{self.cfg.camera_id}_{self.clip_count:04d}"
                self.clip_writer = visionlib.ClipWriter(
                    self.out_dir, clip_id, self.cfg.camera_id, self.cfg.fps,
                    ev.t_start_ms)
            elif isinstance(ev, visionlib.GateFrame):
                self.clip_writer.add_frame(ev.frame)
            elif isinstance(ev, visionlib.GateClose):
                self.clips.append(self.clip_writer.close(ev.t_end_ms))
                self.clip_writer = None


class SessionRunner:
    def __init__(self, config: RunConfig, out_dir):
        self.config = config
        self.out = Path(out_dir)
        self.duration = config.duration_ms
        self.stimuli = config.stimuli or audiolib.validate_stimuli(
            audiolib.DEFAULT_STIMULI)
        if config.audio.sample_rate <= 2 * max(s.tone_hz for s in self.stimuli):
            raise RunnerError("sample rate too low for configured stimuli")

        self.board = MessageBoard()
        self.pub_vision = Publisher(self.board, "vision")
        self.pub_audio_out = Publisher(self.board, "audioout")
        self.pub_audio_in = Publisher(self.board, "audioin")
        self.pub_hw = Publisher(self.board, "hwhost")
        self.pub_schema = Publisher(self.board, "schema")

        self.sub_vision = self.board.subscribe("schema-ctx", "vision")
        self.sub_schema = self.board.subscribe("audioout-ctx", "schema")
        self.sub_audio = self.board.subscribe("agent-ctx", "audio")
        self.sub_hw = self.board.subscribe("controller-ctx", "hw")
        self.sub_log = self.board.subscribe("logger-ctx", "log")

        seed = config.seed
        self.cameras = [
            _CameraPipeline(cam, config.vision,
                            derive_seed(seed, f"camera{cam.camera_id}"),
                            self.duration, self.out)
            for cam in config.cameras]

        # rig + host link
        host_end, rig_end = hwlink.duplex_pipe()
        self.host_end = host_end
        self.rig = rigsim.RigBoard(config.rig,
                                   derive_seed(seed, "rig"), rig_end)
        self.host_decoder = hwlink.FrameDecoder()

        # trial machine
        self.result_writer = schemalib.ResultWriter(
            self.out / "results.csv", config.schema.stimulus_to_button,
            allow_reward_incorrect=config.schema.reward_any_press)
        self.machine = schemalib.TrialMachine(
            config.schema, self.stimuli, derive_seed(seed, "schema"),
            self.result_writer)
        self.dispense_proc = None

        # audio in/out
        self.mixdown = audiolib.MicMixdown(config.audio,
                                           derive_seed(seed, "mic"))
        self.onsets = audiolib.OnsetStream(config.audio, self.stimuli)

        # animal agent
        self.agent = config.agent
        self.agent_rng = SplitMix64(derive_seed(seed, "agent"))
        self.visits = rigsim.plan_visits(self.agent, self.duration,
                                         self.agent_rng)
        zone = config.schema.trigger_zone
        center = ((zone[0] + zone[2]) / 2.0, (zone[1] + zone[3]) / 2.0)
        for vid, (enter, leave) in enumerate(self.visits):
            self.cameras[0].camera.add_entries(rigsim.orbit_path(
                vid, enter, leave, center, self.agent.orbit_radius,
                self.agent.blob_radius, self.agent.blob_intensity,
                self.agent.speed_px_s))

        self.log_fh = open(self.out / "session.log", "w", encoding="utf-8",
                           newline="")
        self._heap = []
        self._seq = 0
        self._now = 0
        self._rig_pumps = set()
        self._stim_durations = {s.stimulus_id: s.duration_ms
                                for s in self.stimuli}

    # -- scheduling ----------------------------------------------------------

    def _schedule(self, t, fn):
        self._seq += 1
        heapq.heappush(self._heap, (t, self._seq, fn))

    def _schedule_rig_pump(self):
        tn = self.rig.next_emission_time()
        if tn is not None and tn <= self.duration and tn not in self._rig_pumps:
            self._rig_pumps.add(tn)
            self._schedule(tn, self._rig_pump)

    def _rig_pump(self, t):
        self._rig_pumps.discard(t)
        self.rig.flush_due(t)

    # -- main loop -------------------------------------------------------------

    def run(self):
        for pipe in self.cameras:
            self._schedule(0, lambda t, p=pipe: self._frame_event(t, p, 0))
        self._schedule(AUDIO_BLOCK_MS, self._audio_block)
        self._schedule(SENSOR_POLL_MS, self._sensor_poll)
        self._log(0, "runner", f"session {self.config.session_id} start "
                               f"seed={self.config.seed}")

        while self._heap:
            t, _, fn = heapq.heappop(self._heap)
            if t > self.duration:
                break
            self._now = t
            fn(t)
            self._drain(t)
        return self._finish()

    def _drain(self, t):
        while True:
            moved = False
            tn = self.rig.next_emission_time()
            if tn is not None and tn <= t:
                self.rig.flush_due(t)
            data = self.host_end.read()
            if data:
                for msg in self.host_decoder.feed(data):
                    self.pub_hw.publish("hw", t, msg)
                moved = True
            for m in self.sub_hw.poll():
                self._on_hw(m.t_sim_ms, m.payload)
                moved = True
            for m in self.sub_vision.poll():
                acts = self.machine.on_blobs(m.t_sim_ms, m.payload["blobs"])
                self._schema_actions(m.t_sim_ms, acts)
                moved = True
            for m in self.sub_schema.poll():
                self._on_schema_msg(m.t_sim_ms, m.payload)
                moved = True
            for m in self.sub_audio.poll():
                self._agent_hears(m.t_sim_ms, m.payload)
                moved = True
            for m in self.sub_log.poll():
                self._write_log(m)
            if not moved:
                break
        self._schedule_rig_pump()

    # -- vision ----------------------------------------------------------------

    def _frame_event(self, t, pipe, index):
        frame = pipe.camera.frame_at(t)
        if pipe.bg is None:
            pipe.bg = visionlib.init_background(frame)
        blobs, pipe.bg = visionlib.detect_motion_blobs(frame, pipe.bg,
                                                       pipe.params)
        try:
            pipe.movement.append(visionlib.blobs_to_rows(t, blobs))
        except OSError as exc:
            self.pub_vision.publish("log", t, f"movement record write "
                                              f"failed: {exc}")
            raise
        self.pub_vision.publish("vision", t, {
            "camera_id": pipe.cfg.camera_id, "blobs": blobs})
        pipe.gate_events(pipe.gate.step(t, bool(blobs), frame))
        next_t = int(round((index + 1) * 1000.0 / pipe.cfg.fps))
        if next_t <= self.duration:
            self._schedule(next_t,
                           lambda tt, p=pipe, i=index + 1:
                           self._frame_event(tt, p, i))

    # -- audio -------------------------------------------------------------------

    def _audio_block(self, t):
        samples = self.mixdown.block(t - AUDIO_BLOCK_MS, t)
        for res in self.onsets.feed(samples, t_start_ms=t - AUDIO_BLOCK_MS):
            self._onset_result(t, res)
        if t + AUDIO_BLOCK_MS <= self.duration:
            self._schedule(t + AUDIO_BLOCK_MS, self._audio_block)

    def _onset_result(self, t_detect, res):
        # stamped at detection time so topic delivery stays time-ordered;
        # the payload carries the precise onset
        audiolib.wav_write(res.capture,
                           self.out / f"mic_{res.t_onset_ms}.wav")
        self.pub_audio_in.publish("audio", t_detect, {
            "kind": "onset", "stimulus_id": res.stimulus_id,
            "t_onset_ms": res.t_onset_ms,
            "confidence": round(res.confidence, 6)})
        self._log(res.t_onset_ms, "audioin",
                  f"onset stim={res.stimulus_id} "
                  f"confidence={res.confidence:.3f}")

    def _on_schema_msg(self, t, payload):
        # audio-out context: play the requested stimulus, let the world hear it
        if payload.get("kind") != "play_stimulus":
            return
        sid = payload["stimulus_id"]
        spec = next(s for s in self.stimuli if s.stimulus_id == sid)
        buf = audiolib.synth_stimulus(
            spec, self.config.audio.sample_rate, self.config.audio.amplitude,
            self.config.audio.fade_ms, t_start_ms=t)
        audiolib.wav_write(buf, self.out / f"stim{sid}_{t}.wav")
        self.mixdown.add_playback(t, buf)
        self.pub_audio_out.publish("audio", t, {
            "kind": "playback", "stimulus_id": sid, "t_onset_ms": t})

    # -- schema ----------------------------------------------------------------

    def _schema_actions(self, t, actions):
        for act in actions:
            if isinstance(act, schemalib.PlayStimulus):
                self.pub_schema.publish("schema", t, {
                    "kind": "play_stimulus",
                    "stimulus_id": act.stimulus_id})
                dur = self._stim_durations[act.stimulus_id]
                self._schedule(t + dur, self._stim_end)
                tid = self.machine.trial_id
                self._schedule(t + self.config.schema.response_window_ms,
                               lambda tt, k=tid: self._response_timeout(tt, k))
            elif isinstance(act, schemalib.StartDispense):
                self._start_dispense(t)
            elif isinstance(act, schemalib.LogNote):
                self._log(act.t_ms, "schema", act.text)

    def _stim_end(self, t):
        self._schema_actions(t, self.machine.on_stimulus_end(t))

    def _response_timeout(self, t, trial_id):
        if self.machine.trial_id != trial_id:
            return
        self._schema_actions(t, self.machine.on_response_timeout(t))

    def _start_dispense(self, t):
        rig_cfg = self.config.rig
        proc = hwlink.DispenseProcedure(
            rig_cfg.dispense_degrees, rig_cfg.max_retries,
            rig_cfg.confirm_window_ms)
        self.dispense_proc = proc
        deadline = proc.start(t, self._host_send)
        self._schedule(deadline,
                       lambda tt, p=proc: self._dispense_deadline(tt, p))

    def _dispense_deadline(self, t, proc):
        if proc is not self.dispense_proc or proc.outcome is not None:
            return
        deadline = proc.on_deadline(t, self._host_send)
        if deadline is not None:
            self._schedule(deadline,
                           lambda tt, p=proc: self._dispense_deadline(tt, p))
        else:
            self._dispense_resolved(t, proc)

    def _dispense_resolved(self, t, proc):
        outcome = proc.outcome
        self.dispense_proc = None
        self._log(t, "hw", f"dispense confirmed={int(outcome.confirmed)} "
                           f"attempts={outcome.attempts}")
        self._schema_actions(t, self.machine.on_dispense_resolved(t, outcome))

    # -- hardware ----------------------------------------------------------------

    def _host_send(self, msg):
        self.host_end.write(hwlink.encode_msg(msg))
        self.rig.receive(self._now)
        self._schedule_rig_pump()

    def _on_hw(self, t, msg):
        if msg.msg_type == hwlink.BUTTON:
            self._schema_actions(t, self.machine.on_button(t, msg.payload[0]))
        elif msg.msg_type == hwlink.PIEZO_HIT:
            if self.dispense_proc is not None and \
                    self.dispense_proc.on_event(t, msg):
                self._dispense_resolved(t, self.dispense_proc)
        elif msg.msg_type == hwlink.SENSORS:
            temp, photo = hwlink.sensor_values(msg)
            self._log(t, "hw", f"sensors temp={temp:.2f} photo={photo}")

    def _sensor_poll(self, t):
        self._host_send(hwlink.query_sensors())
        if t + SENSOR_POLL_MS <= self.duration:
            self._schedule(t + SENSOR_POLL_MS, self._sensor_poll)

    # -- agent --------------------------------------------------------------------

    def _agent_hears(self, t, payload):
        if payload.get("kind") != "playback":
            return
        press_t = t + self.agent.approach_latency_ms
        if not any(enter <= t and press_t <= leave
                   for enter, leave in self.visits):
            return  # wandered off before pressing
        sid = payload["stimulus_id"]
        target = self.config.schema.stimulus_to_button[sid]
        btn = rigsim.choose_button(self.agent, target, self.agent_rng)
        self.rig.press_button(btn, press_t)
        self._schedule_rig_pump()

    # -- logging --------------------------------------------------------------------

    def _log(self, t, source, text):
        self.log_fh.write(f"{t}\t{source}\t{text}\n")

    def _write_log(self, msg):
        payload = msg.payload
        if hasattr(payload, "dropped_total"):
            text = (f"bus dropped {payload.dropped_now} on {payload.topic} "
                    f"for {payload.subscriber} (total {payload.dropped_total})")
        else:
            text = str(payload)
        self._log(msg.t_sim_ms, msg.publisher, text)

    # -- teardown -------------------------------------------------------------------

    def _finish(self):
        t_end = self.duration
        summary = self.machine.close_session(t_end)
        for pipe in self.cameras:
            pipe.gate_events(pipe.gate.finish(t_end))
            pipe.movement.close()
        tail_start = (self.duration // AUDIO_BLOCK_MS) * AUDIO_BLOCK_MS
        if self.duration % AUDIO_BLOCK_MS:
            tail = self.mixdown.block(tail_start, self.duration)
        else:
            tail = np.empty(0, np.int16)
        for res in self.onsets.feed(tail, t_start_ms=tail_start, flush=True):
            self._onset_result(t_end, res)
        for m in self.sub_log.poll():
            self._write_log(m)
        recorded_ms = sum(c.end_ms - c.start_ms
                          for p in self.cameras for c in p.clips)
        info = {
            "session_id": self.config.session_id,
            "seed": self.config.seed,
            "duration_ms": self.duration,
            "observed_s": self.duration / 1000.0,
            "cameras": [{"camera_id": p.cfg.camera_id, "fps": p.cfg.fps,
                         "width": p.cfg.width, "height": p.cfg.height}
                        for p in self.cameras],
            "visits_ms": [list(v) for v in self.visits],
            "pre_roll_ms": self.config.vision.pre_roll_ms,
            "hangover_ms": self.config.vision.hangover_ms,
            "response_window_ms": self.config.schema.response_window_ms,
            "stimulus_duration_ms": {str(k): v for k, v in
                                     sorted(self._stim_durations.items())},
            "trials": summary["trials"],
            "correct": summary["correct"],
            "rewards": summary["rewards"],
            "clip_count": sum(p.clip_count for p in self.cameras),
            "recorded_ms": recorded_ms,
            "hopper_left": self.rig.state.hopper_pieces,
            "piezo_hits": self.rig.piezo_hits,
        }
        with open(self.out / "session.json", "w", encoding="utf-8") as fh:
            json.dump(info, fh, indent=1, sort_keys=True)
            fh.write("\n")
        self._log(t_end, "runner",
                  f"session end trials={summary['trials']} "
                  f"correct={summary['correct']} clips={info['clip_count']}")
        self.log_fh.close()
        return info


def run_session(config: RunConfig, out_dir=None):
    """Run a full simulated session into out_dir (must be empty or absent)."""
    out = Path(out_dir if out_dir is not None else config.output_dir)
    if out.exists() and any(out.iterdir()):
        raise RunnerError(f"output dir {out} is not empty")
    out.mkdir(parents=True, exist_ok=True)
    runner = SessionRunner(config, out)
    return runner.run()
