// Paradigm playback state: prompt sequence, per-trial progress, and desync
// detection (progress must be monotone within a trial and end at exactly 1).

import type { ProgressMsg, PromptMsg } from './types.js';

export interface PromptEntry {
  mode_id: number;
  text: string;
  sound: string;
  block?: number;
  trial: number;
  finalProgress: number;
  monotone: boolean;
}

export class ParadigmPresenter {
  prompts: PromptEntry[] = [];
  current: PromptEntry | null = null;
  progress = 0;
  desyncs: string[] = [];
  private lastProgressKey = '';

  onPrompt(msg: PromptMsg) {
    const entry: PromptEntry = {
      mode_id: msg.mode_id,
      text: msg.text,
      sound: msg.sound,
      block: msg.block,
      trial: msg.trial,
      finalProgress: 0,
      monotone: true,
    };
    if (this.current && this.current.finalProgress !== 1.0 && this.prompts.length > 0) {
      this.desyncs.push(
        `trial ${this.current.block ?? '?'}:${this.current.trial} ended at progress ` +
          `${this.current.finalProgress} (expected 1.0)`,
      );
    }
    this.prompts.push(entry);
    this.current = entry;
    this.progress = msg.progress ?? 0;
    this.lastProgressKey = `${msg.block ?? 0}:${msg.trial}`;
  }

  onProgress(msg: ProgressMsg) {
    const key = `${msg.block}:${msg.trial}`;
    if (!this.current) return;
    if (key !== this.lastProgressKey) {
      this.desyncs.push(`progress for ${key} while prompt is ${this.lastProgressKey}`);
      return;
    }
    if (msg.value < this.progress - 1e-9) {
      this.current.monotone = false;
      this.desyncs.push(`progress went backwards in ${key}: ${this.progress} -> ${msg.value}`);
    }
    this.progress = msg.value;
    this.current.finalProgress = msg.value;
  }

  /** Resets progress tracking between trials without dropping the log. */
  get promptCount(): number {
    return this.prompts.length;
  }

  get inSync(): boolean {
    return this.desyncs.length === 0;
  }

  completedTrials(): number {
    return this.prompts.filter((p) => p.finalProgress === 1.0).length;
  }
}
