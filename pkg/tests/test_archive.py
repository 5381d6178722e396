import hashlib
import json
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from catos.archive import (ArchiveError, archive_session, build_index,
                           load_index, render_movement_image, _sound_label)
from catos.vision import MovementRecordRow, read_pgm

GOLDEN = Path(__file__).parent / "data" / "trace_golden.pgm"


def row(t, blob, cx, cy, area=50):
    return MovementRecordRow(t_ms=t, blob=blob, cx=cx, cy=cy, area=area)


# -- movement-trace rendering -------------------------------------------------

def load_image(data):
    # parse PGM bytes without touching disk
    assert data.startswith(b"P5\n")
    header, rest = data.split(b"\n255\n", 1)
    w, h = map(int, header.split(b"\n")[1].split())
    return np.frombuffer(rest, np.uint8).reshape(h, w)


def test_trace_single_row_black_circle_on_gray():
    img = load_image(render_movement_image([row(1000, 0, 20.0, 15.0)],
                                           (64, 48)))
    assert img.shape == (48, 64)
    assert img[15, 20] == 0          # first (and only) sample: intensity 0
    assert img[0, 0] == 180          # canvas background


def test_trace_time_maps_black_to_white():
    rows = [row(0, 0, 10.0, 10.0), row(1000, 0, 40.0, 30.0)]
    img = load_image(render_movement_image(rows, (64, 48)))
    assert img[10, 10] == 0
    assert img[30, 40] == 255


def test_trace_intensity_monotone_in_time():
    # circles spaced so none overwrites its neighbours (area 13 -> radius 2)
    xs = [5 + 6 * k for k in range(9)]
    rows = [row(250 * k, 0, float(x), 20.0, area=13)
            for k, x in enumerate(xs)]
    img = load_image(render_movement_image(rows, (64, 48)))
    values = [int(img[20, x]) for x in xs]
    assert values == sorted(values)
    assert values[0] == 0 and values[-1] == 255


def test_trace_same_timestamp_blobs_joined_by_line():
    rows = [row(0, 0, 10.0, 10.0), row(0, 1, 40.0, 10.0),
            row(500, 0, 25.0, 40.0)]
    img = load_image(render_movement_image(rows, (64, 48)))
    # the segment between the two t=0 blobs is drawn at intensity 0
    assert all(img[10, x] == 0 for x in range(10, 41))


def test_trace_circle_radius_follows_area():
    img_small = load_image(render_movement_image(
        [row(0, 0, 20.0, 20.0, area=13)], (64, 48)))
    img_big = load_image(render_movement_image(
        [row(0, 0, 20.0, 20.0, area=315)], (64, 48)))
    assert (img_small == 0).sum() < (img_big == 0).sum()
    assert img_big[20, 30] == 0    # on the radius-10 rim
    assert img_big[20, 31] == 180  # just outside


def test_trace_rejects_empty_and_unsorted():
    with pytest.raises(ArchiveError):
        render_movement_image([], (64, 48))
    with pytest.raises(ArchiveError):
        render_movement_image([row(1000, 0, 1, 1), row(0, 0, 2, 2)], (64, 48))


def test_trace_golden_file():
    rows = [
        row(0, 0, 12.0, 10.0, 80),
        row(400, 0, 20.5, 18.25, 120),
        row(400, 1, 40.0, 12.0, 40),
        row(800, 0, 30.0, 30.0, 200),
        row(1200, 0, 45.0, 38.5, 60),
    ]
    data = render_movement_image(rows, (64, 48))
    assert data == GOLDEN.read_bytes()


# -- sound labeling ------------------------------------------------------------

def test_sound_label_overlapping_trial():
    spans = [(1, 10000, 15500), (2, 30000, 35500)]
    assert _sound_label("stim0_30100.wav", 30100, 30600, spans) == \
        "t2_stim0_30100.wav"
    assert _sound_label("mic_20000.wav", 20000, 20300, spans) == \
        "ambient_mic_20000.wav"


# -- archiving ------------------------------------------------------------------

def digest_multiset(paths):
    return Counter(hashlib.sha256(p.read_bytes()).hexdigest() for p in paths)


def test_archive_session_layout_and_conservation(session_factory, tmp_path):
    out, info = session_factory(seed=55)
    before = digest_multiset(p for p in out.rglob("*") if p.is_file())

    index = archive_session(out, tmp_path / "arch")
    dest = tmp_path / "arch" / info["session_id"]

    for sub in ("clips", "sounds", "movement", "results", "logs"):
        assert (dest / sub).is_dir()
    assert (dest / "index.json").exists()
    assert (dest / "session.json").exists()
    assert (dest / "results" / "results.csv").exists()
    assert (dest / "logs" / "session.log").exists()

    # moved, not copied: output drained
    assert list(out.iterdir()) == []

    # conservation: every original byte stream is still present, with the
    # only additions being the index and the rendered trace images
    generated = {dest / "index.json"} | set((dest / "movement").glob("*.pgm"))
    after = digest_multiset(p for p in dest.rglob("*")
                            if p.is_file() and p not in generated)
    assert after == before

    # index claims match reality, and every clip has its trace image
    assert len(index["clips"]) == info["clip_count"]
    for clip in index["clips"]:
        assert (dest / clip["movement_image"]).exists()
        assert (dest / clip["manifest"]).exists()
    assert index["stats"]["trials"] == info["trials"]
    assert index["stats"]["recorded_s"] == pytest.approx(
        info["recorded_ms"] / 1000.0)

    # labeling: every playback wav carries its trial prefix
    sound_names = [Path(s).name for s in index["sounds"]]
    n_labeled = sum(1 for n in sound_names if n.startswith("t"))
    assert n_labeled == 2 * info["trials"]  # stim + mic per trial


def test_archive_requires_closed_session(tmp_path, session_factory):
    out, _ = session_factory(seed=56)
    text = (out / "results.csv").read_text()
    body = "".join(line for line in text.splitlines(keepends=True)
                   if not line.startswith("# summary"))
    (out / "results.csv").write_text(body)
    with pytest.raises(ArchiveError) as err:
        archive_session(out, tmp_path / "arch")
    assert "not closed" in str(err.value)


def test_archive_twice_rejected(session_factory, tmp_path):
    out, info = session_factory(seed=57)
    archive_session(out, tmp_path / "arch")
    with pytest.raises(ArchiveError):
        archive_session(out, tmp_path / "arch", info["session_id"])


def test_build_index_equals_written_index(session_factory, tmp_path):
    out, info = session_factory(seed=58)
    index = archive_session(out, tmp_path / "arch")
    dest = tmp_path / "arch" / info["session_id"]
    assert build_index(dest) == index
    assert load_index(dest) == index


def test_build_index_names_missing_file(session_factory, tmp_path):
    out, info = session_factory(seed=59)
    archive_session(out, tmp_path / "arch")
    dest = tmp_path / "arch" / info["session_id"]
    victim = sorted((dest / "clips").iterdir())[0] / "manifest.json"
    victim.unlink()
    with pytest.raises(ArchiveError) as err:
        build_index(dest)
    assert "manifest.json" in str(err.value)


def test_archived_trace_images_match_csv(session_factory, tmp_path):
    out, info = session_factory(seed=60)
    index = archive_session(out, tmp_path / "arch")
    dest = tmp_path / "arch" / info["session_id"]
    clip = index["clips"][0]
    img = read_pgm(dest / clip["movement_image"])
    assert img.shape == (48, 64)
    assert (img != 180).any()  # something was drawn
