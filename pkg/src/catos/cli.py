"""Command-line entry points.

    catos run --config cfg.json [--seed N] [--out DIR]
    catos archive --from OUTPUT_DIR --to ARCHIVE_ROOT
    catos analyze (--session DIR | --series id1,id2 --archive DIR) [--json]
    catos serve --archive DIR --port N [--static DIR]

Every failure exits nonzero with a one-line `error: ...` on stderr.
"""

import argparse
import json
import sys

from . import analytics, archive, server
from .config import ConfigError, load_config
from .runner import run_session


def _cmd_run(args):
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    out_dir = args.out if args.out is not None else config.output_dir
    info = run_session(config, out_dir)
    print(f"session {info['session_id']}: {info['trials']} trials, "
          f"{info['correct']} correct, {info['clip_count']} clips, "
          f"{info['recorded_ms'] / 1000.0:.1f}s recorded -> {out_dir}")
    return 0


def _cmd_archive(args):
    index = archive.archive_session(args.src, args.dest)
    stats = index["stats"]
    print(f"archived {index['session_id']}: {len(index['clips'])} clips, "
          f"{stats['trials']} trials, duty {stats['duty_cycle']:.4f} "
          f"-> {args.dest}/{index['session_id']}")
    return 0


def _print_stats(stats):
    print(f"session {stats['session_id']}: trials={stats['n_trials']} "
          f"correct={stats['n_correct']} "
          f"accuracy={_fmt(stats['overall_accuracy'])} "
          f"p={_fmt(stats['overall_p_value'], '{:.3g}')} "
          f"duty={stats['duty_cycle']:.4f}")
    for b in stats["per_button"]:
        print(f"  button {b['button']}: n={b['n']} correct={b['n_correct']} "
              f"accuracy={_fmt(b['accuracy'])} "
              f"p={_fmt(b['p_value'], '{:.3g}')}")


def _fmt(x, spec="{:.3f}"):
    return "n/a" if x is None else spec.format(x)


def _cmd_analyze(args):
    if args.session:
        stats = analytics.session_stats(args.session)
        if args.json:
            sys.stdout.write(analytics.stats_to_json(stats))
        else:
            _print_stats(stats)
        return 0
    ids = [s for s in args.series.split(",") if s]
    series = analytics.performance_series(args.archive, ids)
    if args.json:
        sys.stdout.write(json.dumps(series, indent=1, sort_keys=True) + "\n")
    else:
        sys.stdout.write(analytics.series_to_csv(series))
    return 0


def _cmd_serve(args):
    print(f"serving {args.archive} on http://127.0.0.1:{args.port}",
          file=sys.stderr)
    server.serve(args.archive, args.port, args.static)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="catos",
        description="Deterministic training/observing session engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a simulated session")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="override the config output_dir")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("archive", help="archive a finished session")
    p.add_argument("--from", dest="src", required=True,
                   help="session output directory")
    p.add_argument("--to", dest="dest", required=True, help="archive root")
    p.set_defaults(fn=_cmd_archive)

    p = sub.add_parser("analyze", help="session statistics")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--session", help="archived session directory")
    g.add_argument("--series", help="comma-separated session ids")
    p.add_argument("--archive", default="archive",
                   help="archive root (with --series)")
    p.add_argument("--json", action="store_true", help="JSON output")
    p.set_defaults(fn=_cmd_analyze)

    p = sub.add_parser("serve", help="serve the dashboard JSON API")
    p.add_argument("--archive", required=True, help="archive root")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--static", help="static frontend directory to serve at /")
    p.set_defaults(fn=_cmd_serve)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
