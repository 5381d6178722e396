import json

from catos import analytics
from catos.cli import main
from conftest import SMALL_SESSION, merge


def write_config(tmp_path, **overrides):
    cfg = merge(SMALL_SESSION, overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_run_archive_analyze_pipeline(tmp_path, capsys):
    cfg = write_config(tmp_path, duration_ms=90000)
    out = tmp_path / "out"
    arch = tmp_path / "arch"

    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "results.csv").exists()
    capsys.readouterr()

    assert main(["archive", "--from", str(out), "--to", str(arch)]) == 0
    session_dir = arch / "20240101_080000"
    assert (session_dir / "index.json").exists()
    capsys.readouterr()

    assert main(["analyze", "--session", str(session_dir), "--json"]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats == analytics.session_stats(session_dir)

    # archive twice -> nonzero with error: prefix
    assert main(["archive", "--from", str(out), "--to", str(arch)]) != 0
    assert capsys.readouterr().err.startswith("error:")


def test_run_seed_override_changes_output(tmp_path):
    cfg = write_config(tmp_path, duration_ms=60000)
    assert main(["run", "--config", str(cfg), "--out",
                 str(tmp_path / "a"), "--seed", "7"]) == 0
    assert main(["run", "--config", str(cfg), "--out",
                 str(tmp_path / "b"), "--seed", "7"]) == 0
    a = (tmp_path / "a" / "results.csv").read_bytes()
    b = (tmp_path / "b" / "results.csv").read_bytes()
    assert a == b


def test_run_invalid_config_lists_errors(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"duration_ms": 1000, "output_dir": "x",
                                "bogus": 1}))
    assert main(["run", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert "error:" in err and "seed" in err and "bogus" in err


def test_analyze_series(small_archive, capsys):
    root, ids = small_archive
    assert main(["analyze", "--series", ",".join(ids),
                 "--archive", str(root)]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0] == "session,overall_acc,b0_acc,b1_acc,b2_acc,overall_p"
    assert len(lines) == 1 + len(ids)

    assert main(["analyze", "--series", ids[0] + ",missing_id",
                 "--archive", str(root)]) == 1
    err = capsys.readouterr().err
    assert "error:" in err and "missing_id" in err


def test_analyze_json_series(small_archive, capsys):
    root, ids = small_archive
    assert main(["analyze", "--series", ",".join(ids),
                 "--archive", str(root), "--json"]) == 0
    series = json.loads(capsys.readouterr().out)
    assert [s["session_id"] for s in series] == sorted(ids)
    accs = [s["overall_accuracy"] for s in series]
    assert all(a < b for a, b in zip(accs, accs[1:])), accs  # 0.1 / 0.55 / 0.95


def test_analyze_human_output(small_archive, capsys):
    root, ids = small_archive
    assert main(["analyze", "--session", str(root / ids[0])]) == 0
    out = capsys.readouterr().out
    assert f"session {ids[0]}:" in out
    assert "button 0:" in out and "button 2:" in out
    assert "duty=" in out
