/** View state and client-side validation mirroring the server's parameter
 * invariants, so obviously bad drafts never leave the browser. */

import type { CallEventDto, DetectionParams, FeatureTraces } from "./types.js";
import { DEFAULT_PARAMS } from "./types.js";

export interface OverlayToggles {
  events: boolean;
  entropy: boolean;
  ratio: boolean;
  thresholds: boolean;
}

export interface ViewState {
  recordingId: string | null;
  windowStart: number;
  windowEnd: number;
  recordingDuration: number;
  draft: DetectionParams;
  applied: DetectionParams;
  events: CallEventDto[];
  previousEventCount: number | null;
  traces: FeatureTraces | null;
  toggles: OverlayToggles;
}

export function initialState(): ViewState {
  return {
    recordingId: null,
    windowStart: 0,
    windowEnd: 2,
    recordingDuration: 0,
    draft: { ...DEFAULT_PARAMS },
    applied: { ...DEFAULT_PARAMS },
    events: [],
    previousEventCount: null,
    traces: null,
    toggles: { events: true, entropy: true, ratio: true, thresholds: true },
  };
}

export type ValidationErrors = Partial<Record<keyof DetectionParams, string>>;

export function validateParams(draft: DetectionParams): ValidationErrors {
  const errors: ValidationErrors = {};
  if (!Number.isFinite(draft.entropy_threshold)) {
    errors.entropy_threshold = "must be a finite number";
  }
  if (!Number.isFinite(draft.ratio_threshold)) {
    errors.ratio_threshold = "must be a finite number";
  }
  if (!Number.isInteger(draft.gap_fuse_steps) || draft.gap_fuse_steps < 0) {
    errors.gap_fuse_steps = "must be a non-negative integer";
  }
  if (!Number.isInteger(draft.min_len_steps) || draft.min_len_steps < 0) {
    errors.min_len_steps = "must be a non-negative integer";
  }
  if (!Number.isFinite(draft.band_low_hz) || draft.band_low_hz < 0) {
    errors.band_low_hz = "must be non-negative";
  }
  if (!(draft.band_low_hz < draft.band_high_hz)) {
    errors.band_high_hz = "upper band edge must exceed the lower edge";
  }
  if (!Number.isFinite(draft.snippet_pad_ms) || draft.snippet_pad_ms < 0) {
    errors.snippet_pad_ms = "must be non-negative";
  }
  return errors;
}

/** Clamp a requested window to the recording, keeping its width if possible. */
export function clampWindow(
  start: number,
  end: number,
  duration: number,
): { start: number; end: number; clamped: boolean } {
  const width = Math.max(end - start, 0.01);
  let s = start;
  let e = end;
  let clamped = false;
  if (e > duration) {
    e = duration;
    s = Math.max(0, duration - width);
    clamped = true;
  }
  if (s < 0) {
    s = 0;
    e = Math.min(duration, width);
    clamped = true;
  }
  if (e <= s) {
    e = Math.min(duration, s + 0.01);
    clamped = true;
  }
  return { start: s, end: e, clamped };
}

export function applyDetectResult(
  state: ViewState,
  events: CallEventDto[],
  traces: FeatureTraces,
  params: DetectionParams,
): ViewState {
  return {
    ...state,
    previousEventCount: state.events.length > 0 || state.previousEventCount !== null
      ? state.events.length
      : null,
    events,
    traces,
    applied: { ...params },
  };
}
