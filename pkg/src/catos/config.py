"""Run configuration: JSON in, validated dataclass tree out.

Unknown keys are errors (typos in experiment setup must not pass
silently), and validation reports every problem at once rather than
stopping at the first.
"""

import json
from dataclasses import dataclass, field, fields

from .audio import AudioParams, StimulusSpec, validate_stimuli
from .rigsim import AgentPolicy, RigParams
from .schema import SchemaConfig
from .vision import VisionParams


class ConfigError(Exception):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class CameraConfig:
    camera_id: int = 0
    fps: float = 7.5
    width: int = 64
    height: int = 48
    noise_amp: int = 3
    bg_base: int = 70
    bg_texture_amp: int = 10


@dataclass
class RunConfig:
    seed: int
    duration_ms: int
    output_dir: str
    session_id: str = "20240101_080000"
    archive_root: str = ""
    cameras: list = field(default_factory=lambda: [CameraConfig()])
    vision: VisionParams = field(default_factory=VisionParams)
    audio: AudioParams = field(default_factory=AudioParams)
    stimuli: tuple = None
    schema: SchemaConfig = field(default_factory=SchemaConfig)
    rig: RigParams = field(default_factory=RigParams)
    agent: AgentPolicy = field(default_factory=AgentPolicy)


def _fill(cls, data, path, errors, converters=None):
    """Build a dataclass from a dict, flagging unknown keys and letting the
    remaining fields keep their defaults."""
    converters = converters or {}
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            errors.append(f"{path}: unknown key {key!r}")
            continue
        conv = converters.get(key)
        if conv is not None:
            try:
                value = conv(value)
            except Exception as exc:
                errors.append(f"{path}.{key}: {exc}")
                continue
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except Exception as exc:
        errors.append(f"{path}: {exc}")
        return cls()


def _stimuli_from_json(items):
    return validate_stimuli(tuple(
        StimulusSpec(int(s["stimulus_id"]), float(s["tone_hz"]),
                     int(s["duration_ms"]))
        for s in items))


def _mapping_from_json(m):
    return {int(k): int(v) for k, v in m.items()}


def config_from_dict(data) -> RunConfig:
    errors = []
    if not isinstance(data, dict):
        raise ConfigError(["config root must be a JSON object"])
    data = dict(data)

    top_known = {"seed", "duration_ms", "output_dir", "session_id",
                 "archive_root", "cameras", "vision", "audio", "schema",
                 "rig", "agent"}
    for key in data:
        if key not in top_known:
            errors.append(f"config: unknown key {key!r}")

    seed = data.get("seed")
    if seed is None:
        errors.append("config: 'seed' is required (no wall-clock entropy)")
        seed = 0
    duration = data.get("duration_ms")
    if duration is None or int(duration) <= 0:
        errors.append("config: 'duration_ms' must be a positive integer")
        duration = 1
    output_dir = data.get("output_dir", "output")

    session_id = str(data.get("session_id", "20240101_080000"))
    if len(session_id) != 15 or session_id[8] != "_" or \
            not (session_id[:8] + session_id[9:]).isdigit():
        errors.append(f"config: session_id {session_id!r} must look like "
                      "YYYYMMDD_HHMMSS")

    cameras = []
    cam_list = data.get("cameras", [{}])
    if not isinstance(cam_list, list) or not cam_list:
        errors.append("config.cameras: must be a non-empty list")
        cam_list = [{}]
    for i, cam in enumerate(cam_list):
        cameras.append(_fill(CameraConfig, cam, f"config.cameras[{i}]", errors))
    ids = [c.camera_id for c in cameras]
    if len(set(ids)) != len(ids):
        errors.append("config.cameras: duplicate camera_id")
    for c in cameras:
        if c.width < 8 or c.height < 8:
            errors.append(f"config.cameras[{c.camera_id}]: dims below 8x8")
        if c.fps <= 0:
            errors.append(f"config.cameras[{c.camera_id}]: fps must be positive")

    vision = _fill(VisionParams, data.get("vision", {}), "config.vision", errors)

    audio_raw = dict(data.get("audio", {}))
    stimuli_raw = audio_raw.pop("stimuli", None)
    audio = _fill(AudioParams, audio_raw, "config.audio", errors)
    try:
        stimuli = _stimuli_from_json(stimuli_raw) if stimuli_raw is not None \
            else None
    except Exception as exc:
        errors.append(f"config.audio.stimuli: {exc}")
        stimuli = None

    schema_cfg = _fill(
        SchemaConfig, data.get("schema", {}), "config.schema", errors,
        converters={"stimulus_to_button": _mapping_from_json,
                    "trigger_zone": tuple})
    try:
        schema_cfg.validate()
    except Exception as exc:
        errors.append(f"config.schema: {exc}")

    rig = _fill(RigParams, data.get("rig", {}), "config.rig", errors,
                converters={"day_curve_knots": lambda v: tuple(
                    (int(t), float(lv)) for t, lv in v)})
    if not 0.0 <= rig.p_dispense <= 1.0:
        errors.append("config.rig: p_dispense must be in [0, 1]")

    agent = _fill(AgentPolicy, data.get("agent", {}), "config.agent", errors)
    try:
        agent.validate()
    except Exception as exc:
        errors.append(f"config.agent: {exc}")

    if cameras:
        cam0 = cameras[0]
        x0, y0, x1, y1 = schema_cfg.trigger_zone
        if not (0 <= x0 and x1 < cam0.width and 0 <= y0 and y1 < cam0.height):
            errors.append(
                f"config.schema: trigger_zone {schema_cfg.trigger_zone} "
                f"outside camera 0 frame {cam0.width}x{cam0.height}")

    if errors:
        raise ConfigError(errors)
    return RunConfig(
        seed=int(seed), duration_ms=int(duration), output_dir=str(output_dir),
        session_id=session_id, archive_root=str(data.get("archive_root", "")),
        cameras=cameras, vision=vision, audio=audio, stimuli=stimuli,
        schema=schema_cfg, rig=rig, agent=agent)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: invalid JSON: {exc}"])
    return config_from_dict(data)
