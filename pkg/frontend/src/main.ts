/** DOM wiring: parameter tuning against live spectrogram overlays on one
 * tab, the low-confidence review queue on the other. All numbers shown come
 * from API responses; the client only draws. */

import { ApiClient } from "./api.js";
import { eventMarks, traceCap, tracePolyline } from "./overlay.js";
import { ReviewQueue } from "./queue.js";
import {
  applyDetectResult,
  clampWindow,
  initialState,
  validateParams,
  type ViewState,
} from "./state.js";
import { CLASS_LABELS, type DetectionParams } from "./types.js";

const api = new ApiClient("");
let state: ViewState = initialState();

const $ = <T extends HTMLElement>(id: string): T => {
  const element = document.getElementById(id);
  if (!element) {
    throw new Error(`missing element #${id}`);
  }
  return element as T;
};

const recordingSelect = $("recording") as unknown as HTMLSelectElement;
const statusBar = $("status");
const spectrogramImg = new Image();
const specCanvas = $("spectrogram") as unknown as HTMLCanvasElement;
const traceCanvas = $("traces") as unknown as HTMLCanvasElement;
const eventCount = $("event-count");

function setStatus(text: string, isError = false): void {
  statusBar.textContent = text;
  statusBar.className = isError ? "status error" : "status";
}

function paramsFromForm(): DetectionParams {
  const read = (id: string): number => Number(($(id) as unknown as HTMLInputElement).value);
  return {
    entropy_threshold: read("p-entropy"),
    ratio_threshold: read("p-ratio"),
    gap_fuse_steps: read("p-gap"),
    min_len_steps: read("p-minlen"),
    band_low_hz: read("p-bandlow"),
    band_high_hz: read("p-bandhigh"),
    snippet_pad_ms: state.draft.snippet_pad_ms,
  };
}

function showValidation(errors: ReturnType<typeof validateParams>): void {
  const box = $("param-errors");
  const entries = Object.entries(errors);
  box.textContent = entries.map(([field, message]) => `${field}: ${message}`).join("; ");
  ($("apply-params") as unknown as HTMLButtonElement).disabled = entries.length > 0;
}

function drawSpectrogram(): void {
  const ctx = specCanvas.getContext("2d");
  if (!ctx) {
    return;
  }
  ctx.clearRect(0, 0, specCanvas.width, specCanvas.height);
  if (spectrogramImg.complete && spectrogramImg.naturalWidth > 0) {
    ctx.drawImage(spectrogramImg, 0, 0, specCanvas.width, specCanvas.height);
  }
  if (state.toggles.events) {
    for (const mark of eventMarks(state.events, state.windowStart, state.windowEnd, specCanvas.width)) {
      ctx.strokeStyle = "#2ecc40";
      ctx.beginPath();
      ctx.moveTo(mark.startX, 0);
      ctx.lineTo(mark.startX, specCanvas.height);
      ctx.stroke();
      ctx.strokeStyle = "#ff4136";
      ctx.beginPath();
      ctx.moveTo(mark.endX, 0);
      ctx.lineTo(mark.endX, specCanvas.height);
      ctx.stroke();
    }
  }
}

function drawTraces(): void {
  const ctx = traceCanvas.getContext("2d");
  if (!ctx) {
    return;
  }
  ctx.clearRect(0, 0, traceCanvas.width, traceCanvas.height);
  const traces = state.traces;
  if (!traces) {
    return;
  }
  const half = traceCanvas.height / 2;
  const panels: Array<{
    values: number[];
    threshold: number;
    cap: number;
    offsetY: number;
    color: string;
    enabled: boolean;
  }> = [
    {
      values: traces.entropy,
      threshold: state.applied.entropy_threshold,
      cap: traces.max_entropy,
      offsetY: 0,
      color: "#0074d9",
      enabled: state.toggles.entropy,
    },
    {
      values: traces.ratio,
      threshold: state.applied.ratio_threshold,
      cap: traceCap(traces.ratio),
      offsetY: half,
      color: "#b10dc9",
      enabled: state.toggles.ratio,
    },
  ];
  for (const panel of panels) {
    if (!panel.enabled) {
      continue;
    }
    const line = tracePolyline(
      panel.values,
      traces.dt_s,
      panel.threshold,
      panel.cap,
      state.windowStart,
      state.windowEnd,
      traceCanvas.width,
      half - 4,
    );
    ctx.strokeStyle = panel.color;
    ctx.beginPath();
    line.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y + panel.offsetY) : ctx.lineTo(x, y + panel.offsetY)));
    ctx.stroke();
    if (state.toggles.thresholds) {
      ctx.strokeStyle = "#888";
      ctx.setLineDash([4, 3]);
      ctx.beginPath();
      ctx.moveTo(0, line.thresholdY + panel.offsetY);
      ctx.lineTo(traceCanvas.width, line.thresholdY + panel.offsetY);
      ctx.stroke();
      ctx.setLineDash([]);
    }
  }
}

function redraw(): void {
  drawSpectrogram();
  drawTraces();
}

function loadTile(): void {
  if (!state.recordingId) {
    return;
  }
  spectrogramImg.onload = redraw;
  spectrogramImg.src = api.spectrogramUrl(state.recordingId, state.windowStart, state.windowEnd);
}

async function runDetection(): Promise<void> {
  if (!state.recordingId) {
    return;
  }
  const draft = paramsFromForm();
  const errors = validateParams(draft);
  showValidation(errors);
  if (Object.keys(errors).length > 0) {
    return;
  }
  setStatus("detecting…");
  try {
    const result = await api.detect(state.recordingId, draft);
    const previous = state.events.length;
    state = applyDetectResult(state, result.events, result.features, result.params as DetectionParams);
    eventCount.textContent =
      state.previousEventCount === null
        ? `${result.events.length} events`
        : `${result.events.length} events (was ${previous})`;
    setStatus("");
    redraw();
  } catch (error) {
    setStatus(error instanceof Error ? error.message : String(error), true);
  }
}

async function selectRecording(id: string): Promise<void> {
  state = { ...state, recordingId: id, events: [], traces: null, previousEventCount: null };
  try {
    const response = await fetch(api.spectrogramUrl(id, 0, 1e9));
    const meta = JSON.parse(response.headers.get("X-Spectrogram-Meta") ?? "{}");
    state.recordingDuration = meta.t1_s ?? 0;
    const window = clampWindow(0, state.recordingDuration, state.recordingDuration);
    state.windowStart = window.start;
    state.windowEnd = window.end;
  } catch {
    setStatus("service unavailable", true);
    return;
  }
  loadTile();
  await runDetection();
}

function bindWindowControls(): void {
  $("window-apply").addEventListener("click", () => {
    const start = Number(($("window-start") as unknown as HTMLInputElement).value);
    const end = Number(($("window-end") as unknown as HTMLInputElement).value);
    const window = clampWindow(start, end, state.recordingDuration);
    state.windowStart = window.start;
    state.windowEnd = window.end;
    setStatus(window.clamped ? "window clamped to the recording" : "");
    ($("window-start") as unknown as HTMLInputElement).value = window.start.toFixed(2);
    ($("window-end") as unknown as HTMLInputElement).value = window.end.toFixed(2);
    loadTile();
  });
}

function bindToggles(): void {
  const bind = (id: string, key: keyof ViewState["toggles"]) => {
    ($(id) as unknown as HTMLInputElement).addEventListener("change", (ev) => {
      state.toggles[key] = (ev.target as HTMLInputElement).checked;
      redraw(); // purely client state, no refetch
    });
  };
  bind("toggle-events", "events");
  bind("toggle-entropy", "entropy");
  bind("toggle-ratio", "ratio");
  bind("toggle-thresholds", "thresholds");
}

// --- review queue ------------------------------------------------------------

const queue = new ReviewQueue(api, {
  onChanged: renderQueue,
  onConflict: (message) => setStatus(`label conflict: ${message}; queue refreshed`, true),
});

function renderQueue(): void {
  $("queue-total").textContent = `${queue.items.length} of ${queue.total} flagged calls loaded`;
  const record = queue.current();
  const detail = $("queue-detail");
  if (!record) {
    detail.innerHTML = "<p>review queue is empty</p>";
    return;
  }
  const crop = api.spectrogramUrl(
    record.recording_id,
    Math.max(0, record.start_s - 0.05),
    record.end_s + 0.05,
  );
  const probs = record.pseudo_probabilities ?? [];
  const bars = CLASS_LABELS.map((label, i) => {
    const p = probs[i] ?? 0;
    return `<div class="bar-row"><span class="bar-label">${i + 1} ${label}</span>` +
      `<div class="bar" style="width:${Math.round(p * 200)}px"></div>` +
      `<span>${(p * 100).toFixed(1)}%</span></div>`;
  }).join("");
  detail.innerHTML =
    `<p><b>${record.recording_id}</b> call ${record.call_index} ` +
    `(${record.start_s.toFixed(3)}–${record.end_s.toFixed(3)} s, ` +
    `confidence ${(record.confidence ?? 0).toFixed(3)}, predicted ${record.predicted_class ?? "?"})</p>` +
    `<img src="${crop}" alt="call spectrogram" class="crop"/>` +
    `<div class="bars">${bars}</div>`;
}

function bindQueueControls(): void {
  for (let i = 0; i < CLASS_LABELS.length; i++) {
    $(`label-${i}`).addEventListener("click", () => void queue.labelCurrent(CLASS_LABELS[i]));
  }
  $("label-skip").addEventListener("click", () => queue.skip());
  $("queue-refresh").addEventListener("click", () => void queue.refresh());
  document.addEventListener("keydown", (ev) => {
    if (($("tab-review") as unknown as HTMLInputElement).checked && ev.key >= "1" && ev.key <= "5") {
      void queue.labelCurrent(CLASS_LABELS[Number(ev.key) - 1]);
    }
  });
  const annotatorInput = $("annotator") as unknown as HTMLInputElement;
  annotatorInput.addEventListener("change", () => {
    queue.annotator = annotatorInput.value || "reviewer";
  });
}

async function boot(): Promise<void> {
  bindWindowControls();
  bindToggles();
  bindQueueControls();
  $("apply-params").addEventListener("click", () => void runDetection());
  recordingSelect.addEventListener("change", () => void selectRecording(recordingSelect.value));
  try {
    const recordings = await api.listRecordings();
    recordingSelect.innerHTML = recordings.map((id) => `<option>${id}</option>`).join("");
    if (recordings.length > 0) {
      await selectRecording(recordings[0]);
    }
    await queue.refresh();
  } catch (error) {
    setStatus(`service unavailable: ${error instanceof Error ? error.message : error}`, true);
  }
}

void boot();
