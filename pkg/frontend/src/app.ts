// Dashboard wiring: session browser, performance chart, trial and trace
// inspection, and the next-session schema-config editor.

import { ApiClient, ApiError } from "./api.js";
import { drawChart } from "./chart.js";
import {
  chartModel, fmtAccuracy, fmtP, hitTest, sessionRows, significanceMarker,
  traceModel,
} from "./model.js";
import { drawTrace } from "./trace.js";
import type {
  SchemaConfigDoc, SessionDetail, SessionSummary, TrialsDoc,
} from "./types.js";
import { validateSchemaConfig } from "./validate.js";

const client = new ApiClient("");

const state = {
  sessions: [] as SessionSummary[],
  selected: new Set<string>(),
  detailId: null as string | null,
};

function $(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Record<string, string> = {}, text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function setBanner(message: string, retry?: () => void): void {
  const banner = $("banner");
  banner.textContent = "";
  if (!message) {
    banner.classList.add("hidden");
    return;
  }
  banner.classList.remove("hidden");
  banner.append(el("span", {}, message));
  if (retry) {
    const btn = el("button", {}, "retry");
    btn.addEventListener("click", retry);
    banner.append(btn);
  }
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return `API error: ${err.message}`;
  return `API unreachable: ${err instanceof Error ? err.message : err}`;
}

// -- session list ---------------------------------------------------------------

async function loadSessions(): Promise<void> {
  try {
    state.sessions = await client.sessions();
    setBanner("");
  } catch (err) {
    setBanner(describeError(err), () => void loadSessions());
    return;
  }
  renderSessionList();
  await refreshChart();
}

function renderSessionList(): void {
  const container = $("sessions");
  container.textContent = "";
  if (!state.sessions.length) {
    container.append(el("p", { class: "empty" },
                        "No archived sessions yet."));
    return;
  }
  const table = el("table");
  const head = el("tr");
  for (const h of ["", "session", "trials", "correct", "accuracy", "p",
                   "duty"]) {
    head.append(el("th", {}, h));
  }
  table.append(head);
  for (const row of sessionRows(state.sessions)) {
    const tr = el("tr", { "data-session": row.sessionId });
    const checkbox = el("input", { type: "checkbox" }) as HTMLInputElement;
    checkbox.checked = state.selected.has(row.sessionId);
    checkbox.addEventListener("change", () => {
      if (checkbox.checked) state.selected.add(row.sessionId);
      else state.selected.delete(row.sessionId);
      void refreshChart();
    });
    const cell = el("td");
    cell.append(checkbox);
    tr.append(cell);
    const idCell = el("td", { class: "session-id" }, row.date);
    idCell.addEventListener("click", () => void showDetail(row.sessionId));
    tr.append(idCell);
    tr.append(el("td", {}, String(row.trials)));
    tr.append(el("td", {}, String(row.correct)));
    tr.append(el("td", {}, row.accuracyText + row.marker));
    tr.append(el("td", {}, row.pText));
    tr.append(el("td", {}, row.dutyText));
    table.append(tr);
  }
  container.append(table);
}

// -- performance chart -------------------------------------------------------------

async function refreshChart(): Promise<void> {
  const canvas = $("chart") as HTMLCanvasElement;
  const note = $("chart-note");
  const ids = state.sessions
    .map((s) => s.session_id)
    .filter((id) => state.selected.has(id));
  if (!ids.length) {
    canvas.getContext("2d")?.clearRect(0, 0, canvas.width, canvas.height);
    note.textContent = "Select sessions to compare performance.";
    return;
  }
  note.textContent = "";
  try {
    const series = await client.performance(ids);
    const model = chartModel(series, 760, 300);
    drawChart(canvas, model);
    const tooltip = $("chart-tooltip");
    canvas.onmousemove = (ev) => {
      const rect = canvas.getBoundingClientRect();
      const pt = hitTest(model, ev.clientX - rect.left, ev.clientY - rect.top);
      if (!pt) {
        tooltip.classList.add("hidden");
        return;
      }
      tooltip.classList.remove("hidden");
      tooltip.style.left = `${ev.clientX - rect.left + 12}px`;
      tooltip.style.top = `${ev.clientY - rect.top + 12}px`;
      tooltip.textContent =
        `${pt.sessionId}: ${fmtAccuracy(pt.value)} ` +
        `(n=${pt.n}, p=${fmtP(pt.p)})${pt.marker ? " *" : ""}`;
    };
    canvas.onmouseleave = () => $("chart-tooltip").classList.add("hidden");
  } catch (err) {
    setBanner(describeError(err), () => void refreshChart());
  }
}

// -- session detail -------------------------------------------------------------------

async function showDetail(sessionId: string): Promise<void> {
  state.detailId = sessionId;
  let detail: SessionDetail;
  let trials: TrialsDoc;
  try {
    [detail, trials] = await Promise.all([
      client.session(sessionId), client.trials(sessionId)]);
  } catch (err) {
    setBanner(describeError(err), () => void showDetail(sessionId));
    return;
  }
  $("detail").classList.remove("hidden");
  $("detail-title").textContent = `Session ${sessionId}`;

  const statsBox = $("detail-stats");
  statsBox.textContent = "";
  const s = detail.stats;
  statsBox.append(el("p", {},
    `${s.n_trials} trials, ${s.n_correct} correct ` +
    `(${fmtAccuracy(s.overall_accuracy)}${significanceMarker(s.overall_p_value)}, ` +
    `p=${fmtP(s.overall_p_value)}), duty cycle ` +
    `${(100 * s.duty_cycle).toFixed(2)}%, ` +
    `${s.rewards_confirmed} rewards confirmed`));
  const perButton = el("ul");
  for (const b of s.per_button) {
    perButton.append(el("li", {},
      `button ${b.button}: ${b.n_correct}/${b.n} ` +
      `(${fmtAccuracy(b.accuracy)}${significanceMarker(b.p_value)}, ` +
      `p=${fmtP(b.p_value)})`));
  }
  statsBox.append(perButton);

  const table = el("table");
  const head = el("tr");
  for (const h of ["trial", "t (s)", "stim", "button", "correct", "reward",
                   "latency (ms)"]) {
    head.append(el("th", {}, h));
  }
  table.append(head);
  for (const t of trials.trials) {
    const tr = el("tr", { class: t.correct ? "correct" : "incorrect" });
    tr.append(el("td", {}, String(t.trial)));
    tr.append(el("td", {}, (t.t_start_ms / 1000).toFixed(1)));
    tr.append(el("td", {}, String(t.stim)));
    tr.append(el("td", {}, t.button === null ? "-" : String(t.button)));
    tr.append(el("td", {}, t.correct ? "yes" : "no"));
    tr.append(el("td", {}, t.reward ? "yes" : "no"));
    tr.append(el("td", {}, t.latency_ms === null ? "" : String(t.latency_ms)));
    table.append(tr);
  }
  const trialBox = $("detail-trials");
  trialBox.textContent = "";
  trialBox.append(table);

  const clipBox = $("detail-clips");
  clipBox.textContent = "";
  if (!detail.index.clips.length) {
    clipBox.append(el("p", { class: "empty" }, "No clips recorded."));
  }
  for (const clip of detail.index.clips) {
    const btn = el("button", { class: "clip" },
                   `${clip.clip_id} [${(clip.start_ms / 1000).toFixed(1)}s - ` +
                   `${(clip.end_ms / 1000).toFixed(1)}s, ` +
                   `${clip.frame_count} frames]`);
    btn.addEventListener("click",
                         () => void showTrace(sessionId, clip.clip_id));
    clipBox.append(btn);
  }
  $("trace-box").classList.add("hidden");
}

async function showTrace(sessionId: string, clipId: string): Promise<void> {
  try {
    const doc = await client.movement(sessionId, clipId);
    const model = traceModel(doc.rows);
    drawTrace($("trace") as HTMLCanvasElement, model, 64, 48);
    $("trace-box").classList.remove("hidden");
    $("trace-title").textContent =
      `${clipId}: ${doc.rows.length} movement samples, ` +
      `${((doc.end_ms - doc.start_ms) / 1000).toFixed(1)}s ` +
      `(dark = clip start, light = clip end)`;
  } catch (err) {
    setBanner(describeError(err), () => void showTrace(sessionId, clipId));
  }
}

// -- schema-config editor ------------------------------------------------------------------

let configVersion = 0;

async function loadConfig(): Promise<void> {
  let doc: SchemaConfigDoc;
  try {
    doc = await client.schemaConfig();
  } catch (err) {
    setBanner(describeError(err), () => void loadConfig());
    return;
  }
  configVersion = doc.version;
  const cfg = doc.config;
  for (const stim of [0, 1, 2]) {
    (input(`map-${stim}`)).value =
      String(cfg.stimulus_to_button[String(stim)] ?? stim);
  }
  input("response-window").value = String(cfg.response_window_ms);
  input("iti").value = String(cfg.inter_trial_interval_ms);
  (input("stimulus-order") as unknown as HTMLSelectElement).value =
    cfg.stimulus_order;
  input("zone").value = cfg.trigger_zone.join(", ");
  input("reward-any").checked = cfg.reward_any_press;
  $("config-version").textContent = `version ${configVersion}`;
  setConfigStatus("", false);
}

function input(id: string): HTMLInputElement {
  return $(id) as HTMLInputElement;
}

function setConfigStatus(text: string, isError: boolean): void {
  const node = $("config-status");
  node.textContent = text;
  node.classList.toggle("error", isError);
}

function configFromForm() {
  return {
    stimulus_to_button: {
      "0": Number(input("map-0").value),
      "1": Number(input("map-1").value),
      "2": Number(input("map-2").value),
    },
    response_window_ms: Number(input("response-window").value),
    inter_trial_interval_ms: Number(input("iti").value),
    stimulus_order:
      (input("stimulus-order") as unknown as HTMLSelectElement).value,
    trigger_zone: input("zone").value.split(",").map((s) => Number(s.trim())),
    reward_any_press: input("reward-any").checked,
  };
}

async function submitConfig(): Promise<void> {
  const config = configFromForm();
  const violations = validateSchemaConfig(config);
  if (violations.length) {
    setConfigStatus("refusing to submit: " + violations.join("; "), true);
    return;
  }
  const button = $("config-save") as HTMLButtonElement;
  button.disabled = true;
  setConfigStatus("saving...", false);
  try {
    const doc = await client.putSchemaConfig({ version: configVersion, config });
    configVersion = doc.version;
    $("config-version").textContent = `version ${configVersion}`;
    setConfigStatus("saved", false);
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      setConfigStatus("conflict: config changed elsewhere, reloading", true);
      await loadConfig();
    } else {
      setConfigStatus(describeError(err), true);
    }
  } finally {
    button.disabled = false;
  }
}

// -- boot ---------------------------------------------------------------------------------

export function boot(): void {
  $("config-save").addEventListener("click", () => void submitConfig());
  $("config-reload").addEventListener("click", () => void loadConfig());
  void loadSessions();
  void loadConfig();
}

if (typeof document !== "undefined" && document.getElementById("sessions")) {
  boot();
}
