// Rolling buffers behind the data-manager charts: 8 sEMG + 3 accel channels
// at the 50 Hz display rate, with per-channel visibility toggles.

import type { SignalMsg } from './types.js';

export const EMG_CHANNELS = 8;
export const ACCEL_CHANNELS = 3;
export const N_CHANNELS = EMG_CHANNELS + ACCEL_CHANNELS;
export const DISPLAY_HZ = 50;

export class TraceStore {
  readonly spanS: number;
  readonly capacity: number;
  t: Float64Array;
  channels: Float64Array[];
  visible: boolean[];
  length = 0;
  total = 0;
  private head = 0;

  constructor(spanS = 10) {
    this.spanS = spanS;
    this.capacity = Math.round(spanS * DISPLAY_HZ);
    this.t = new Float64Array(this.capacity);
    this.channels = Array.from({ length: N_CHANNELS }, () => new Float64Array(this.capacity));
    this.visible = Array.from({ length: N_CHANNELS }, () => true);
  }

  push(msg: SignalMsg) {
    const values = [...msg.emg, ...msg.accel];
    this.t[this.head] = msg.t_ms / 1000;
    for (let c = 0; c < N_CHANNELS; c++) this.channels[c][this.head] = values[c] ?? 0;
    this.head = (this.head + 1) % this.capacity;
    if (this.length < this.capacity) this.length += 1;
    this.total += 1;
  }

  toggle(channel: number, on?: boolean) {
    this.visible[channel] = on ?? !this.visible[channel];
  }

  /** Chronological copy for plotting: [t, ch0, ch1, ...]; hidden channels are null. */
  series(): (Float64Array | null)[] {
    const start = (this.head - this.length + this.capacity) % this.capacity;
    const out: (Float64Array | null)[] = [];
    const unroll = (src: Float64Array) => {
      const dst = new Float64Array(this.length);
      for (let i = 0; i < this.length; i++) dst[i] = src[(start + i) % this.capacity];
      return dst;
    };
    out.push(unroll(this.t));
    for (let c = 0; c < N_CHANNELS; c++) {
      out.push(this.visible[c] ? unroll(this.channels[c]) : null);
    }
    return out;
  }

  visibleCount(): number {
    return this.visible.filter(Boolean).length;
  }
}
