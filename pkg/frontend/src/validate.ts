// Client-side mirror of the server's schema-config validation, so the
// editor refuses to submit a config the server would 400 anyway. The
// wording tracks the server messages.

import type { SchemaConfigBody } from "./types.js";

const KNOWN_KEYS = new Set([
  "stimulus_to_button", "response_window_ms", "inter_trial_interval_ms",
  "stimulus_order", "trigger_zone", "reward_any_press",
]);

export function validateSchemaConfig(config: SchemaConfigBody): string[] {
  const errors: string[] = [];
  for (const key of Object.keys(config)) {
    if (!KNOWN_KEYS.has(key)) errors.push(`unknown key '${key}'`);
  }

  const mapping = config.stimulus_to_button ?? {};
  const keys = Object.keys(mapping).map(Number).sort();
  const values = Object.values(mapping).slice().sort();
  if (keys.join(",") !== "0,1,2" || values.join(",") !== "0,1,2") {
    errors.push("stimulus_to_button must be a bijection on {0,1,2}");
  }

  if (!(config.response_window_ms > 0)) {
    errors.push("response_window_ms must be positive");
  }
  if (!(config.inter_trial_interval_ms >= 0)) {
    errors.push("inter_trial_interval_ms must be >= 0");
  }
  if (config.stimulus_order !== "random_no_repeat" &&
      config.stimulus_order !== "cycle") {
    errors.push(`unknown stimulus_order '${config.stimulus_order}'`);
  }

  const zone = config.trigger_zone ?? [];
  if (zone.length !== 4 || !(zone[0] < zone[2] && zone[1] < zone[3])) {
    errors.push(`degenerate trigger_zone (${zone.join(", ")})`);
  }
  return errors;
}
