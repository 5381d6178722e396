"""Session statistics: recording duty cycle, per-button accuracy with an
exact one-sided binomial test against the 1/3 chance level, and the
cross-session performance series.

The binomial tail is summed exactly in the log domain (lgamma binomial
coefficients); no normal approximation anywhere.
"""

import json
import math
from pathlib import Path

from .archive import load_index
from .schema import parse_result_csv

CHANCE_LEVEL = 1.0 / 3.0


class AnalyticsError(Exception):
    pass


def duty_cycle(recorded_s, observed_s) -> float:
    if observed_s <= 0:
        raise AnalyticsError("observed_s must be positive")
    return recorded_s / observed_s


def frames_to_seconds(frame_count, fps) -> float:
    if fps <= 0:
        raise AnalyticsError("fps must be positive")
    return frame_count / fps


def binomial_pvalue(n, k, p0) -> float:
    """One-sided exact tail P[X >= k] for X ~ Binomial(n, p0)."""
    if n < 0 or not 0 <= k <= n:
        raise AnalyticsError(f"invalid binomial tail: n={n}, k={k}")
    if not 0.0 < p0 < 1.0:
        raise AnalyticsError(f"p0 must be in (0, 1), got {p0}")
    if k == 0:
        return 1.0
    lp = math.log(p0)
    lq = math.log1p(-p0)
    lgn = math.lgamma(n + 1)
    total = 0.0
    for i in range(k, n + 1):
        lc = lgn - math.lgamma(i + 1) - math.lgamma(n - i + 1)
        total += math.exp(lc + i * lp + (n - i) * lq)
    return min(total, 1.0)


def _recover_mapping(results):
    """stimulus -> expected button, read off the correct trials; stimuli
    with no correct trial fall back to the identity mapping."""
    mapping = {}
    for r in results:
        if r.correct and r.response_button is not None:
            mapping[r.stimulus_id] = r.response_button
    for sid in (0, 1, 2):
        mapping.setdefault(sid, sid)
    return mapping


def trial_stats(result_csv):
    """Accuracy/p-value fragment for one result CSV.

    Cross-checks the summary line against a recount of the body and
    refuses to report from an inconsistent file.
    """
    results, summary = parse_result_csv(result_csv)
    if summary is None:
        raise AnalyticsError(f"{result_csv}: no summary line (session not closed)")

    recount = {
        "trials": len(results),
        "correct": sum(1 for r in results if r.correct),
        "incorrect": sum(1 for r in results if not r.correct),
        "b0": sum(1 for r in results if r.response_button == 0),
        "b1": sum(1 for r in results if r.response_button == 1),
        "b2": sum(1 for r in results if r.response_button == 2),
        "rewards": sum(1 for r in results if r.reward_confirmed),
    }
    if recount != summary:
        raise AnalyticsError(
            f"{result_csv}: summary line {summary} != body recount {recount}")

    mapping = _recover_mapping(results)
    per_button = []
    for btn in (0, 1, 2):
        assigned = [r for r in results if mapping[r.stimulus_id] == btn]
        n = len(assigned)
        k = sum(1 for r in assigned if r.correct)
        per_button.append({
            "button": btn,
            "n": n,
            "n_correct": k,
            "accuracy": k / n if n else None,
            "p_value": binomial_pvalue(n, k, CHANCE_LEVEL) if n else None,
        })

    n = len(results)
    k = recount["correct"]
    return {
        "n_trials": n,
        "n_correct": k,
        "overall_accuracy": k / n if n else None,
        "overall_p_value": binomial_pvalue(n, k, CHANCE_LEVEL) if n else None,
        "per_button": per_button,
        "rewards_confirmed": recount["rewards"],
    }


def session_stats(session_dir):
    """Full stats for one archived session (index + result CSV)."""
    root = Path(session_dir)
    index = load_index(root)
    stats = trial_stats(root / index["results_csv"])
    stats.update({
        "session_id": index["session_id"],
        "observed_s": index["stats"]["observed_s"],
        "recorded_s": index["stats"]["recorded_s"],
        "duty_cycle": index["stats"]["duty_cycle"],
    })
    return stats


def performance_series(archive_root, session_ids):
    """Per-session stats ordered by session timestamp."""
    root = Path(archive_root)
    out = []
    for sid in session_ids:
        session_dir = root / sid
        if not session_dir.exists():
            raise AnalyticsError(f"missing session {sid!r} in {archive_root}")
        out.append(session_stats(session_dir))
    out.sort(key=lambda s: s["session_id"])
    return out


def series_to_csv(series) -> str:
    lines = ["session,overall_acc,b0_acc,b1_acc,b2_acc,overall_p"]

    def fmt(x, spec="{:.6f}"):
        return "" if x is None else spec.format(x)

    for s in series:
        accs = [fmt(b["accuracy"]) for b in s["per_button"]]
        lines.append(",".join([
            s["session_id"], fmt(s["overall_accuracy"]), *accs,
            fmt(s["overall_p_value"], "{:.6g}")]))
    return "\n".join(lines) + "\n"


def stats_to_json(stats) -> str:
    return json.dumps(stats, indent=1, sort_keys=True) + "\n"
