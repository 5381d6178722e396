"""End-of-session archiving: move the output folder's artifacts into a
timestamped archive tree with categorized subfolders, render per-clip
movement-trace images, label sound files by trial, and write a
machine-readable index that can always be rebuilt from disk alone.

Archive layout:

    <archive_root>/<session_id>/
        index.json
        session.json
        clips/clip_cam0_0001/{f000001.pgm.., manifest.json}
        movement/movement_cam0.csv, clip_cam0_0001.pgm (trace image)
        sounds/t3_stim1_401000.wav, ambient_mic_....wav
        results/results.csv
        logs/session.log
"""

import json
import math
import shutil
from pathlib import Path

import numpy as np

from . import kernels
from .audio import wav_read
from .schema import parse_result_csv
from .vision import parse_movement_csv, pgm_bytes, read_clip_manifest

FOLDERS = ("clips", "sounds", "movement", "results", "logs")
TRACE_BACKGROUND = 180  # mid-gray: both black (start) and white (end) show


class ArchiveError(Exception):
    pass


# ---------------------------------------------------------------------------
# movement-trace image
# ---------------------------------------------------------------------------

def _time_intensity(t, t_first, t_last):
    if t_last == t_first:
        return 0
    return int(round(255.0 * (t - t_first) / (t_last - t_first)))


def _draw_line(canvas, x0, y0, x1, y1, value):
    # Bresenham on rounded endpoints
    x0, y0, x1, y1 = (int(round(v)) for v in (x0, y0, x1, y1))
    h, w = canvas.shape
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        if 0 <= x0 < w and 0 <= y0 < h:
            canvas[y0, x0] = value
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def render_movement_image(rows, frame_dims) -> bytes:
    """Trace of one clip's movement rows as PGM bytes.

    Circle intensity encodes normalized time (0 at the first row's
    timestamp, 255 at the last); blobs sharing a timestamp are joined by
    line segments.  Later rows overwrite earlier pixels.
    """
    if not rows:
        raise ArchiveError("no movement rows to render")
    width, height = frame_dims
    times = [r.t_ms for r in rows]
    if times != sorted(times):
        raise ArchiveError("movement rows must be sorted by t_ms")
    t_first, t_last = times[0], times[-1]
    canvas = np.full((height, width), TRACE_BACKGROUND, np.uint8)
    by_time = {}
    for r in rows:
        by_time.setdefault(r.t_ms, []).append(r)
    for t in sorted(by_time):
        group = sorted(by_time[t], key=lambda r: r.blob)
        value = _time_intensity(t, t_first, t_last)
        for a, b in zip(group, group[1:]):
            _draw_line(canvas, a.cx, a.cy, b.cx, b.cy, value)
        for r in group:
            radius = max(2, int(round(math.sqrt(r.area / math.pi))))
            kernels.render_disks(canvas, [r.cx], [r.cy], [radius], [value])
    return pgm_bytes(canvas)


# ---------------------------------------------------------------------------
# archiving
# ---------------------------------------------------------------------------

def _load_session_meta(directory):
    path = Path(directory) / "session.json"
    if not path.exists():
        raise ArchiveError(f"missing {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _trial_spans(results, meta):
    window = meta.get("response_window_ms", 5000)
    durations = meta.get("stimulus_duration_ms", {})
    spans = []
    for r in results:
        dur = int(durations.get(str(r.stimulus_id), 500))
        spans.append((r.trial_id, r.t_start_ms, r.t_start_ms + dur + window))
    return spans


def _sound_label(name, sound_t0, sound_t1, spans):
    for trial_id, a, b in spans:
        if sound_t0 <= b and sound_t1 >= a:
            return f"t{trial_id}_{name}"
    return f"ambient_{name}"


def archive_session(output_dir, archive_root, session_id=None):
    """Move a completed session out of output_dir; returns the index dict."""
    out = Path(output_dir)
    meta = _load_session_meta(out)
    session_id = session_id or meta["session_id"]

    results_src = out / "results.csv"
    if not results_src.exists():
        raise ArchiveError(f"missing {results_src}")
    results, summary = parse_result_csv(results_src)
    if summary is None:
        raise ArchiveError("session not closed: result CSV has no summary line")

    dest = Path(archive_root) / session_id
    if dest.exists():
        raise ArchiveError(f"archive {dest} already exists")
    dest.mkdir(parents=True)
    for sub in FOLDERS:
        (dest / sub).mkdir()

    problems = []

    def move(src, dst):
        try:
            shutil.move(str(src), str(dst))
        except OSError as exc:
            problems.append(f"{src}: {exc}")

    spans = _trial_spans(results, meta)
    for wav in sorted(out.glob("*.wav")):
        stem = wav.stem
        t0 = int(stem.rsplit("_", 1)[1])
        t1 = t0 + int(round(wav_read(wav).duration_ms))
        move(wav, dest / "sounds" / _sound_label(wav.name, t0, t1, spans))

    clip_dirs = sorted(p for p in out.iterdir()
                       if p.is_dir() and (p / "manifest.json").exists())
    for clip_dir in clip_dirs:
        move(clip_dir, dest / "clips" / clip_dir.name)

    for csv in sorted(out.glob("movement_cam*.csv")):
        move(csv, dest / "movement" / csv.name)
    move(results_src, dest / "results" / "results.csv")
    if (out / "session.log").exists():
        move(out / "session.log", dest / "logs" / "session.log")
    move(out / "session.json", dest / "session.json")

    if problems:
        raise ArchiveError("archive incomplete: " + "; ".join(problems))

    _render_trace_images(dest, meta)
    index = build_index(dest)
    with open(dest / "index.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return index


def _render_trace_images(session_dir, meta):
    dims = {c["camera_id"]: (c["width"], c["height"])
            for c in meta.get("cameras", [])}
    rows_by_cam = {}
    for csv in sorted((session_dir / "movement").glob("movement_cam*.csv")):
        cam = int(csv.stem.replace("movement_cam", ""))
        rows_by_cam[cam] = parse_movement_csv(csv)
    for clip_dir in sorted((session_dir / "clips").iterdir()):
        manifest = read_clip_manifest(clip_dir)
        cam = manifest["camera_id"]
        rows = [r for r in rows_by_cam.get(cam, ())
                if manifest["start_ms"] <= r.t_ms <= manifest["end_ms"]]
        if not rows:
            continue
        image = render_movement_image(rows, dims.get(cam, (64, 48)))
        (session_dir / "movement" / f"{clip_dir.name}.pgm").write_bytes(image)


# ---------------------------------------------------------------------------
# index
# ---------------------------------------------------------------------------

def build_index(session_dir):
    """Reconstruct the session index purely from files on disk."""
    root = Path(session_dir)
    session_id = root.name
    meta = _load_session_meta(root)

    results_path = root / "results" / "results.csv"
    if not results_path.exists():
        raise ArchiveError(f"missing {results_path}")
    _, summary = parse_result_csv(results_path)
    if summary is None:
        raise ArchiveError(f"{results_path}: no summary line")

    clips = []
    clips_dir = root / "clips"
    for clip_dir in sorted(clips_dir.iterdir()) if clips_dir.exists() else []:
        manifest_path = clip_dir / "manifest.json"
        if not manifest_path.exists():
            raise ArchiveError(f"missing {manifest_path}")
        manifest = read_clip_manifest(clip_dir)
        for i in range(1, manifest["frame_count"] + 1):
            fpath = clip_dir / f"f{i:06d}.pgm"
            if not fpath.exists():
                raise ArchiveError(f"missing {fpath}")
        trace = root / "movement" / f"{clip_dir.name}.pgm"
        if not trace.exists():
            raise ArchiveError(f"missing {trace}")
        clips.append({
            "clip_id": manifest["clip_id"],
            "camera_id": manifest["camera_id"],
            "start_ms": manifest["start_ms"],
            "end_ms": manifest["end_ms"],
            "frame_count": manifest["frame_count"],
            "manifest": f"clips/{clip_dir.name}/manifest.json",
            "movement_image": f"movement/{clip_dir.name}.pgm",
        })
    clips.sort(key=lambda c: (c["camera_id"], c["start_ms"]))

    by_cam = {}
    for c in clips:
        by_cam.setdefault(c["camera_id"], []).append(c)
    for cam, cam_clips in by_cam.items():
        for a, b in zip(cam_clips, cam_clips[1:]):
            if b["start_ms"] < a["end_ms"]:
                raise ArchiveError(
                    f"camera {cam}: clips {a['clip_id']} and {b['clip_id']} overlap")

    observed_s = float(meta["observed_s"])
    recorded_s = sum((c["end_ms"] - c["start_ms"]) / 1000.0 for c in clips)
    duty = recorded_s / observed_s if observed_s > 0 else 0.0
    if not 0.0 <= duty <= 1.0:
        raise ArchiveError(f"duty cycle {duty} outside [0, 1]")

    sounds = sorted(p.name for p in (root / "sounds").glob("*.wav")) \
        if (root / "sounds").exists() else []
    movement_csvs = sorted(
        f"movement/{p.name}"
        for p in (root / "movement").glob("movement_cam*.csv"))

    log_path = root / "logs" / "session.log"
    return {
        "session_id": session_id,
        "folders": {name: name for name in FOLDERS},
        "clips": clips,
        "sounds": [f"sounds/{n}" for n in sounds],
        "movement_csv": movement_csvs,
        "results_csv": "results/results.csv",
        "log": "logs/session.log" if log_path.exists() else None,
        "stats": {
            "trials": summary["trials"],
            "correct": summary["correct"],
            "duty_cycle": duty,
            "observed_s": observed_s,
            "recorded_s": recorded_s,
        },
    }


def load_index(session_dir):
    path = Path(session_dir) / "index.json"
    if not path.exists():
        raise ArchiveError(f"missing {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
