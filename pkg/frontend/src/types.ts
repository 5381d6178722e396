// Shapes of the JSON the API serves. These mirror the server's analytics
// and index documents; the dashboard never recomputes statistics.

export interface ButtonStats {
  button: number;
  n: number;
  n_correct: number;
  accuracy: number | null;
  p_value: number | null;
}

export interface SessionStats {
  session_id: string;
  n_trials: number;
  n_correct: number;
  overall_accuracy: number | null;
  overall_p_value: number | null;
  per_button: ButtonStats[];
  rewards_confirmed: number;
  observed_s: number;
  recorded_s: number;
  duty_cycle: number;
}

export interface SessionSummary {
  session_id: string;
  n_trials: number;
  n_correct: number;
  overall_accuracy: number | null;
  overall_p_value: number | null;
  duty_cycle: number;
}

export interface ClipEntry {
  clip_id: string;
  camera_id: number;
  start_ms: number;
  end_ms: number;
  frame_count: number;
  manifest: string;
  movement_image: string;
}

export interface SessionIndex {
  session_id: string;
  clips: ClipEntry[];
  sounds: string[];
  stats: {
    trials: number;
    correct: number;
    duty_cycle: number;
    observed_s: number;
    recorded_s: number;
  };
}

export interface SessionDetail {
  stats: SessionStats;
  index: SessionIndex;
}

export interface TrialRow {
  trial: number;
  t_start_ms: number;
  stim: number;
  button: number | null;
  correct: boolean;
  reward: boolean;
  latency_ms: number | null;
}

export interface TrialsDoc {
  summary: Record<string, number>;
  trials: TrialRow[];
}

export interface MovementRow {
  t_ms: number;
  blob: number;
  cx: number;
  cy: number;
  area: number;
}

export interface MovementDoc {
  clip_id: string;
  start_ms: number;
  end_ms: number;
  rows: MovementRow[];
}

export interface SchemaConfigBody {
  stimulus_to_button: Record<string, number>;
  response_window_ms: number;
  inter_trial_interval_ms: number;
  stimulus_order: string;
  trigger_zone: number[];
  reward_any_press: boolean;
}

export interface SchemaConfigDoc {
  version: number;
  config: SchemaConfigBody;
}
