"""Read-mostly HTTP JSON API over an archive root, plus the one mutation
the experimenter needs: editing the schema config for the next session.

    GET /api/sessions                     session summaries, by timestamp
    GET /api/sessions/{id}                full stats + index for one session
    GET /api/sessions/{id}/trials         trial rows
    GET /api/sessions/{id}/movement/{clip}  movement rows for one clip
    GET /api/performance?ids=a,b,c        performance series
    GET /api/schema-config                {"version": n, "config": {...}}
    PUT /api/schema-config                optimistic-concurrency update

Optionally serves a static frontend directory at /.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import analytics
from .archive import load_index
from .schema import SchemaConfig, parse_result_csv
from .vision import parse_movement_csv

DEFAULT_SCHEMA_CONFIG = {
    "stimulus_to_button": {"0": 0, "1": 1, "2": 2},
    "response_window_ms": 5000,
    "inter_trial_interval_ms": 10000,
    "stimulus_order": "random_no_repeat",
    "trigger_zone": [22, 24, 44, 46],
    "reward_any_press": False,
}

MIME = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json; charset=utf-8",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


def validate_schema_config(data):
    """Returns a list of violation strings; empty when valid."""
    errors = []
    if not isinstance(data, dict):
        return ["config must be a JSON object"]
    known = set(DEFAULT_SCHEMA_CONFIG)
    for key in data:
        if key not in known:
            errors.append(f"unknown key {key!r}")
    merged = {**DEFAULT_SCHEMA_CONFIG, **{k: v for k, v in data.items()
                                          if k in known}}
    try:
        mapping = {int(k): int(v)
                   for k, v in merged["stimulus_to_button"].items()}
        SchemaConfig(
            stimulus_to_button=mapping,
            response_window_ms=int(merged["response_window_ms"]),
            inter_trial_interval_ms=int(merged["inter_trial_interval_ms"]),
            stimulus_order=str(merged["stimulus_order"]),
            trigger_zone=tuple(merged["trigger_zone"]),
            reward_any_press=bool(merged["reward_any_press"]),
        ).validate()
    except Exception as exc:
        errors.append(str(exc))
    return errors


class ArchiveAPI:
    """State shared by request handlers."""

    def __init__(self, archive_root, static_dir=None):
        self.root = Path(archive_root)
        self.static_dir = Path(static_dir) if static_dir else None
        self.lock = threading.Lock()
        self.config_path = self.root / "schema_config.json"

    def session_ids(self):
        return sorted(p.name for p in self.root.iterdir()
                      if p.is_dir() and (p / "index.json").exists())

    def schema_config(self):
        if self.config_path.exists():
            with open(self.config_path, "r", encoding="utf-8") as fh:
                return json.load(fh)
        return {"version": 0, "config": dict(DEFAULT_SCHEMA_CONFIG)}

    def put_schema_config(self, body):
        """Returns (status, payload)."""
        if not isinstance(body, dict) or "config" not in body:
            return 400, {"errors": ["body must be {version, config}"]}
        errors = validate_schema_config(body["config"])
        if errors:
            return 400, {"errors": errors}
        with self.lock:
            current = self.schema_config()
            if body.get("version") != current["version"]:
                return 409, {"errors": [
                    f"version conflict: expected {current['version']}, "
                    f"got {body.get('version')}"],
                    "version": current["version"]}
            doc = {"version": current["version"] + 1, "config": body["config"]}
            with open(self.config_path, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=1, sort_keys=True)
                fh.write("\n")
            return 200, doc


class _Handler(BaseHTTPRequestHandler):
    api: ArchiveAPI = None  # set by make_server

    def log_message(self, *args):  # quiet
        pass

    def _json(self, status, payload):
        body = (json.dumps(payload, indent=1, sort_keys=True) + "\n").encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status, message):
        self._json(status, {"error": message})

    # -- GET -----------------------------------------------------------------

    def do_GET(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts[:1] == ["api"]:
                self._api_get(parts[1:], parse_qs(url.query))
            else:
                self._static(url.path)
        except BrokenPipeError:
            pass
        except Exception as exc:
            self._error(500, str(exc))

    def _api_get(self, parts, query):
        api = self.api
        if parts == ["sessions"]:
            out = []
            for sid in api.session_ids():
                stats = analytics.session_stats(api.root / sid)
                out.append({
                    "session_id": sid,
                    "n_trials": stats["n_trials"],
                    "n_correct": stats["n_correct"],
                    "overall_accuracy": stats["overall_accuracy"],
                    "overall_p_value": stats["overall_p_value"],
                    "duty_cycle": stats["duty_cycle"],
                })
            return self._json(200, out)
        if len(parts) >= 2 and parts[0] == "sessions":
            sid = parts[1]
            session_dir = api.root / sid
            if not (session_dir / "index.json").exists():
                return self._error(404, f"unknown session {sid!r}")
            if len(parts) == 2:
                return self._json(200, {
                    "stats": analytics.session_stats(session_dir),
                    "index": load_index(session_dir)})
            if parts[2] == "trials" and len(parts) == 3:
                results, summary = parse_result_csv(
                    session_dir / "results" / "results.csv")
                return self._json(200, {
                    "summary": summary,
                    "trials": [{
                        "trial": r.trial_id, "t_start_ms": r.t_start_ms,
                        "stim": r.stimulus_id, "button": r.response_button,
                        "correct": r.correct, "reward": r.reward_confirmed,
                        "latency_ms": r.latency_ms} for r in results]})
            if parts[2] == "movement" and len(parts) == 4:
                return self._movement(session_dir, parts[3])
        if parts == ["performance"]:
            ids = [s for s in query.get("ids", [""])[0].split(",") if s]
            if not ids:
                return self._error(400, "missing ids query parameter")
            try:
                series = analytics.performance_series(api.root, ids)
            except analytics.AnalyticsError as exc:
                return self._error(404, str(exc))
            return self._json(200, series)
        if parts == ["schema-config"]:
            return self._json(200, api.schema_config())
        return self._error(404, f"no such endpoint /{'/'.join(parts)}")

    def _movement(self, session_dir, clip_id):
        index = load_index(session_dir)
        entry = next((c for c in index["clips"] if c["clip_id"] == clip_id),
                     None)
        if entry is None:
            return self._error(404, f"unknown clip {clip_id!r}")
        csv_path = (session_dir / "movement" /
                    f"movement_cam{entry['camera_id']}.csv")
        rows = [r for r in parse_movement_csv(csv_path)
                if entry["start_ms"] <= r.t_ms <= entry["end_ms"]]
        return self._json(200, {
            "clip_id": clip_id,
            "start_ms": entry["start_ms"],
            "end_ms": entry["end_ms"],
            "rows": [{"t_ms": r.t_ms, "blob": r.blob, "cx": r.cx,
                      "cy": r.cy, "area": r.area} for r in rows]})

    def _static(self, path):
        base = self.api.static_dir
        if base is None:
            return self._error(404, "no static frontend configured")
        rel = path.lstrip("/") or "index.html"
        target = (base / rel).resolve()
        if not str(target).startswith(str(base.resolve())) or \
                not target.is_file():
            return self._error(404, f"not found: {path}")
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type",
                         MIME.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    # -- PUT -----------------------------------------------------------------

    def do_PUT(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        if parts != ["api", "schema-config"]:
            return self._error(404, "PUT is only supported on /api/schema-config")
        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError as exc:
            return self._error(400, f"invalid JSON body: {exc}")
        status, payload = self.api.put_schema_config(body)
        self._json(status, payload)


def make_server(archive_root, port, static_dir=None) -> ThreadingHTTPServer:
    api = ArchiveAPI(archive_root, static_dir)
    handler = type("Handler", (_Handler,), {"api": api})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve(archive_root, port, static_dir=None):
    if not Path(archive_root).exists():
        raise FileNotFoundError(f"archive root {archive_root} does not exist")
    server = make_server(archive_root, port, static_dir)
    try:
        server.serve_forever()
    finally:
        server.server_close()
