// Pure view-model builders. Everything rendered on a canvas or into a
// table is computed here first so it can be tested without a DOM.

import type { MovementRow, SessionStats, SessionSummary } from "./types.js";

export const CHANCE_LEVEL = 1 / 3;
export const SIGNIFICANCE_ALPHA = 0.05;

/** Round half to even, matching the archiver's renderer (Python round). */
export function pythonRound(x: number): number {
  const floor = Math.floor(x);
  const diff = x - floor;
  if (diff > 0.5) return floor + 1;
  if (diff < 0.5) return floor;
  return floor % 2 === 0 ? floor : floor + 1;
}

/** Normalized-time intensity: 0 (black) at the first sample, 255 (white)
 * at the last; identical formula to the archived trace images. */
export function timeIntensity(t: number, tFirst: number, tLast: number): number {
  if (tLast === tFirst) return 0;
  return pythonRound((255 * (t - tFirst)) / (tLast - tFirst));
}

export function circleRadius(area: number): number {
  return Math.max(2, pythonRound(Math.sqrt(area / Math.PI)));
}

export function significant(p: number | null): boolean {
  return p !== null && p < SIGNIFICANCE_ALPHA;
}

export function significanceMarker(p: number | null): string {
  return significant(p) ? "*" : "";
}

export function fmtAccuracy(a: number | null): string {
  return a === null ? "n/a" : (100 * a).toFixed(1) + "%";
}

export function fmtP(p: number | null): string {
  if (p === null) return "n/a";
  if (p === 0) return "0";
  return p >= 0.001 ? p.toFixed(3) : p.toExponential(1);
}

export function fmtSessionDate(sessionId: string): string {
  // YYYYMMDD_HHMMSS -> YYYY-MM-DD HH:MM
  const m = /^(\d{4})(\d{2})(\d{2})_(\d{2})(\d{2})\d{2}$/.exec(sessionId);
  if (!m) return sessionId;
  return `${m[1]}-${m[2]}-${m[3]} ${m[4]}:${m[5]}`;
}

// -- session list ------------------------------------------------------------

export interface SessionRowView {
  sessionId: string;
  date: string;
  trials: number;
  correct: number;
  accuracy: number | null;
  accuracyText: string;
  pText: string;
  marker: string;
  dutyText: string;
}

export function sessionRows(summaries: SessionSummary[]): SessionRowView[] {
  return summaries.map((s) => ({
    sessionId: s.session_id,
    date: fmtSessionDate(s.session_id),
    trials: s.n_trials,
    correct: s.n_correct,
    accuracy: s.overall_accuracy,
    accuracyText: fmtAccuracy(s.overall_accuracy),
    pText: fmtP(s.overall_p_value),
    marker: significanceMarker(s.overall_p_value),
    dutyText: (100 * s.duty_cycle).toFixed(2) + "%",
  }));
}

// -- performance chart --------------------------------------------------------

export interface ChartPoint {
  sessionId: string;
  x: number;
  y: number;
  value: number;
  n: number;
  p: number | null;
  marker: boolean;
}

export interface ChartSeries {
  key: string;
  label: string;
  color: string;
  points: ChartPoint[];
}

export interface ChartModel {
  width: number;
  height: number;
  plot: { x0: number; y0: number; x1: number; y1: number };
  xTicks: { x: number; label: string }[];
  yTicks: { y: number; label: string }[];
  chanceY: number;
  series: ChartSeries[];
}

export const SERIES_COLORS: Record<string, string> = {
  overall: "#1a1a1a",
  b0: "#d62728",
  b1: "#2ca02c",
  b2: "#1f77b4",
};

const MARGIN = { left: 46, right: 14, top: 14, bottom: 34 };

export function chartModel(series: SessionStats[], width: number,
                           height: number): ChartModel {
  const plot = {
    x0: MARGIN.left,
    y0: MARGIN.top,
    x1: width - MARGIN.right,
    y1: height - MARGIN.bottom,
  };
  const n = series.length;
  const xAt = (i: number) =>
    n <= 1 ? (plot.x0 + plot.x1) / 2
           : plot.x0 + (i * (plot.x1 - plot.x0)) / (n - 1);
  const yAt = (v: number) => plot.y1 - v * (plot.y1 - plot.y0);

  const mk = (key: string, label: string,
              pick: (s: SessionStats) => { v: number | null; n: number;
                                           p: number | null }): ChartSeries => {
    const points: ChartPoint[] = [];
    series.forEach((s, i) => {
      const { v, n: count, p } = pick(s);
      if (v === null) return; // gap: no trials attributable
      points.push({
        sessionId: s.session_id,
        x: xAt(i),
        y: yAt(v),
        value: v,
        n: count,
        p,
        marker: significant(p),
      });
    });
    return { key, label, color: SERIES_COLORS[key], points };
  };

  const out: ChartSeries[] = [
    mk("overall", "overall", (s) => ({
      v: s.overall_accuracy, n: s.n_trials, p: s.overall_p_value,
    })),
  ];
  for (const btn of [0, 1, 2]) {
    out.push(mk(`b${btn}`, `button ${btn}`, (s) => {
      const b = s.per_button[btn];
      return { v: b.accuracy, n: b.n, p: b.p_value };
    }));
  }

  return {
    width,
    height,
    plot,
    xTicks: series.map((s, i) => ({ x: xAt(i), label: fmtSessionDate(s.session_id) })),
    yTicks: [0, 0.25, 0.5, 0.75, 1].map((v) => ({
      y: yAt(v), label: (100 * v).toFixed(0) + "%",
    })),
    chanceY: yAt(CHANCE_LEVEL),
    series: out,
  };
}

export function hitTest(model: ChartModel, x: number, y: number,
                        radius = 7): ChartPoint | null {
  // ties go to the earliest series (overall first)
  let best: ChartPoint | null = null;
  let bestD = radius * radius + 1e-9;
  for (const s of model.series) {
    for (const pt of s.points) {
      const d = (pt.x - x) ** 2 + (pt.y - y) ** 2;
      if (d < bestD) {
        bestD = d;
        best = pt;
      }
    }
  }
  return best;
}

// -- movement trace -------------------------------------------------------------

export interface TraceCircle {
  x: number;
  y: number;
  r: number;
  intensity: number;
}

export interface TraceSegment {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  intensity: number;
}

export interface TraceModel {
  circles: TraceCircle[];   // in draw order (time ascending)
  segments: TraceSegment[]; // same-timestamp connectors
  tFirst: number;
  tLast: number;
}

export function traceModel(rows: MovementRow[]): TraceModel {
  const circles: TraceCircle[] = [];
  const segments: TraceSegment[] = [];
  if (!rows.length) return { circles, segments, tFirst: 0, tLast: 0 };
  const sorted = [...rows].sort((a, b) => a.t_ms - b.t_ms || a.blob - b.blob);
  const tFirst = sorted[0].t_ms;
  const tLast = sorted[sorted.length - 1].t_ms;
  const byTime = new Map<number, MovementRow[]>();
  for (const r of sorted) {
    const group = byTime.get(r.t_ms);
    if (group) group.push(r);
    else byTime.set(r.t_ms, [r]);
  }
  for (const [t, group] of byTime) {
    const intensity = timeIntensity(t, tFirst, tLast);
    for (let i = 1; i < group.length; i++) {
      segments.push({
        x0: group[i - 1].cx, y0: group[i - 1].cy,
        x1: group[i].cx, y1: group[i].cy, intensity,
      });
    }
    for (const r of group) {
      circles.push({ x: r.cx, y: r.cy, r: circleRadius(r.area), intensity });
    }
  }
  return { circles, segments, tFirst, tLast };
}
