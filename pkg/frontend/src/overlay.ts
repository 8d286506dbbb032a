/** Pure geometry for drawing detection overlays on top of spectrogram
 * tiles: seconds-to-pixel mapping for event boundaries and scaled polyline
 * points for the entropy/ratio traces with their threshold lines. */

import type { CallEventDto } from "./types.js";

export interface EventMarks {
  startX: number;
  endX: number;
}

export function timeToX(timeS: number, t0: number, t1: number, widthPx: number): number {
  return ((timeS - t0) / (t1 - t0)) * widthPx;
}

/** Pixel positions of event boundaries falling inside the window. */
export function eventMarks(
  events: CallEventDto[],
  t0: number,
  t1: number,
  widthPx: number,
): EventMarks[] {
  return events
    .filter((e) => e.end_s > t0 && e.start_s < t1)
    .map((e) => ({
      startX: timeToX(Math.max(e.start_s, t0), t0, t1, widthPx),
      endX: timeToX(Math.min(e.end_s, t1), t0, t1, widthPx),
    }));
}

export interface TracePolyline {
  points: Array<[number, number]>;
  thresholdY: number;
}

/** Scale a per-step feature trace into a height-px band (0 at the bottom).
 * Values are clipped to [0, maxValue]; y grows downward (canvas space). */
export function tracePolyline(
  values: number[],
  dtS: number,
  threshold: number,
  maxValue: number,
  t0: number,
  t1: number,
  widthPx: number,
  heightPx: number,
): TracePolyline {
  const points: Array<[number, number]> = [];
  const first = Math.max(0, Math.floor(t0 / dtS));
  const last = Math.min(values.length - 1, Math.ceil(t1 / dtS));
  for (let i = first; i <= last; i++) {
    const x = timeToX(i * dtS, t0, t1, widthPx);
    const v = Math.min(Math.max(values[i], 0), maxValue);
    points.push([x, heightPx * (1 - v / maxValue)]);
  }
  const clippedThreshold = Math.min(Math.max(threshold, 0), maxValue);
  return { points, thresholdY: heightPx * (1 - clippedThreshold / maxValue) };
}

/** A robust trace cap: ratios are unbounded, so scale to a high quantile. */
export function traceCap(values: number[], quantile = 0.98, minimum = 1e-6): number {
  if (values.length === 0) {
    return minimum;
  }
  const sorted = [...values].sort((a, b) => a - b);
  const index = Math.min(sorted.length - 1, Math.floor(quantile * sorted.length));
  return Math.max(sorted[index], minimum);
}
