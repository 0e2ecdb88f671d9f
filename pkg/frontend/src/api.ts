// Control-plane client. Every call maps to one documented endpoint; a 409
// surfaces as ConflictError carrying the server's current phase so the UI
// can toast it verbatim.

import type { StatusPayload } from './types.js';

export class ConflictError extends Error {
  phase: string;
  constructor(message: string, phase: string) {
    super(message);
    this.phase = phase;
  }
}

export class ApiClient {
  constructor(public baseUrl: string = '', private fetchFn: typeof fetch = fetch) {}

  private async request(path: string, body?: unknown): Promise<StatusPayload> {
    const init: RequestInit =
      body === undefined
        ? { method: path === '/api/status' ? 'GET' : 'POST' }
        : {
            method: 'POST',
            headers: { 'content-type': 'application/json' },
            body: JSON.stringify(body),
          };
    const res = await this.fetchFn(this.baseUrl + path, init);
    const payload = await res.json();
    if (res.status === 409) throw new ConflictError(payload.error, payload.phase);
    if (!res.ok) throw new Error(payload.error ?? `HTTP ${res.status}`);
    return payload as StatusPayload;
  }

  status() {
    return this.request('/api/status');
  }

  startSession(opts: {
    subject_id: number;
    day_id: number;
    n_blocks?: number;
    n_trials?: number;
    wearing_shift?: number;
  }) {
    return this.request('/api/session/start', opts);
  }

  stopSession() {
    return this.request('/api/session/stop');
  }

  setParams(opts: { window_ms?: number; step_ms?: number; model?: string }) {
    return this.request('/api/params', opts);
  }

  startOnline(opts: { n_trials?: number; seed?: number } = {}) {
    return this.request('/api/online/start', opts);
  }

  reactionStart(n: number) {
    return this.request('/api/reaction/start', { n });
  }

  reactionSubmit(latencies_s: number[]) {
    return this.request('/api/reaction/submit', { latencies_s });
  }

  wsUrl(): string {
    const base =
      this.baseUrl ||
      (typeof location !== 'undefined' ? `${location.protocol}//${location.host}` : '');
    return base.replace(/^http/, 'ws') + '/ws/stream';
  }
}
