import copy
import itertools

import pytest

from catos.archive import archive_session
from catos.config import config_from_dict
from catos.runner import run_session

# small but fully featured: two feeder visits, a handful of trials, clips
SMALL_SESSION = {
    "seed": 42,
    "duration_ms": 120000,
    "output_dir": "ignored",
    "agent": {"trial_appetite": 120.0, "dwell_ms": 20000},
    "schema": {"inter_trial_interval_ms": 5000},
}


def merge(base, overrides):
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = value
    return out


@pytest.fixture(scope="session")
def session_factory(tmp_path_factory):
    counter = itertools.count()

    def make(**overrides):
        cfg_dict = merge(SMALL_SESSION, overrides)
        cfg = config_from_dict(cfg_dict)
        out = tmp_path_factory.mktemp(f"sess{next(counter)}") / "out"
        info = run_session(cfg, out)
        return out, info

    return make


@pytest.fixture(scope="session")
def small_archive(tmp_path_factory, session_factory):
    """Three archived sessions with rising agent accuracy."""
    root = tmp_path_factory.mktemp("archive_root")
    sessions = [
        ("20240101_080000", 0.1, 301),
        ("20240102_080000", 0.55, 302),
        ("20240103_080000", 0.95, 303),
    ]
    ids = []
    for sid, acc, seed in sessions:
        out, _ = session_factory(
            session_id=sid, seed=seed, duration_ms=300000,
            agent={"trial_appetite": 120.0, "dwell_ms": 20000,
                   "accuracy": acc})
        archive_session(out, root, sid)
        ids.append(sid)
    return root, ids
