/** DTOs mirroring the review service's JSON API. */

export interface DetectionParams {
  entropy_threshold: number;
  ratio_threshold: number;
  gap_fuse_steps: number;
  min_len_steps: number;
  band_low_hz: number;
  band_high_hz: number;
  snippet_pad_ms: number;
}

export const DEFAULT_PARAMS: DetectionParams = {
  entropy_threshold: 3.5,
  ratio_threshold: 2.0,
  gap_fuse_steps: 5,
  min_len_steps: 2,
  band_low_hz: 40000,
  band_high_hz: 110000,
  snippet_pad_ms: 10,
};

export interface CallEventDto {
  start_s: number;
  end_s: number;
}

export interface FeatureTraces {
  dt_s: number;
  entropy: number[];
  ratio: number[];
  max_entropy: number;
}

export interface DetectResponse {
  recording_id: string;
  params: DetectionParams;
  events: CallEventDto[];
  features: FeatureTraces;
}

export interface SpectrogramMeta {
  recording_id: string;
  t0_s: number;
  t1_s: number;
  dt_s: number;
  df_hz: number;
  f0_hz: number;
  n_time: number;
  n_freq: number;
  db_min: number;
  db_max: number;
}

export type TriageStatus = "AutoAccepted" | "Flagged" | "ManuallyLabeled";

export interface CallRecordDto {
  recording_id: string;
  call_index: number;
  start_s: number;
  end_s: number;
  duration_ms: number;
  predicted_class: string | null;
  pseudo_probabilities: number[] | null;
  confidence: number | null;
  triage_status: TriageStatus;
  manual_class: string | null;
  annotator: string | null;
  version: number;
}

export interface ReviewPage {
  total: number;
  page: number;
  page_size: number;
  items: CallRecordDto[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
}

export const CLASS_LABELS = ["flat", "modulated", "freq_step", "composite", "short"] as const;

export function callId(record: CallRecordDto): string {
  return `${record.recording_id}:${record.call_index}`;
}
