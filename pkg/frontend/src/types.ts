// Message and status shapes of the service's HTTP + WebSocket schema.

export interface StatusPayload {
  phase: 'idle' | 'recording' | 'online_test';
  subject_id: number;
  day_id: number;
  block: number;
  trial: number;
  progress: number;
  params: { window_ms: number; step_ms: number; model: string };
  reaction_const_s: number;
  device: { source: string; fs: number; rate_multiplier: number; produced: number; dropped: number };
  subscribers: number;
  last_saved: { path: string | null; rows: number } | null;
  online_summary: OnlineSummary | null;
}

export interface OnlineSummary {
  n_trials: number;
  completed: number;
  timeouts: number;
  accuracy: number;
  mean_delta_t_ms: number | null;
  max_step_latency_ms: number;
  aborted: boolean;
}

export interface SignalMsg {
  type: 'signal';
  t_ms: number;
  emg: number[];
  accel: number[];
  trigger?: number;
  block?: number;
  speed?: number;
  display_drops?: number;
  ts: number;
}

export interface PromptMsg {
  type: 'prompt';
  mode_id: number;
  text: string;
  sound: string;
  block?: number;
  trial: number;
  speed?: number;
  progress?: number;
  t0_s?: number;
  ts: number;
}

export interface ProgressMsg {
  type: 'progress';
  value: number;
  block: number;
  trial: number;
  ts: number;
}

export interface PredictionMsg {
  type: 'prediction';
  label: number;
  t_s: number;
  latency_s: number;
  ts: number;
}

export interface TrialResultMsg {
  type: 'trial_result';
  cued_mode: number;
  predicted_mode: number | null;
  t0_s: number;
  t3_s: number | null;
  delta_t_ms: number | null;
  correct: boolean;
  timed_out: boolean;
  ts: number;
}

export interface EventMsg {
  type: 'event';
  name: string;
  [key: string]: unknown;
}

export interface ReactionResultMsg {
  type: 'reaction_result';
  reaction_const_s: number;
  ts: number;
}

export interface StatusMsg extends StatusPayload {
  type: 'status';
  ts: number;
}

export type StreamMsg =
  | SignalMsg
  | PromptMsg
  | ProgressMsg
  | PredictionMsg
  | TrialResultMsg
  | EventMsg
  | ReactionResultMsg
  | StatusMsg
  | { type: 'reaction_test'; n: number; ts: number };
