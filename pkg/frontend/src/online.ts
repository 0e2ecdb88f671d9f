// Online-test view state: cued mode, live predictions, per-trial response
// times, running accuracy. The displayed delta-t comes from the server's
// trial result and is cross-checked against t3 - t0 - reaction to the
// millisecond; any mismatch is surfaced rather than hidden.

import type { PredictionMsg, PromptMsg, TrialResultMsg } from './types.js';

export interface TrialRow {
  index: number;
  cued: number;
  predicted: number | null;
  deltaTms: number | null;
  correct: boolean;
  timedOut: boolean;
}

export class OnlinePresenter {
  cuedMode: number | null = null;
  lastPrediction: PredictionMsg | null = null;
  trials: TrialRow[] = [];
  mismatches: string[] = [];
  reactionConstS: number;

  constructor(reactionConstS = 0.4) {
    this.reactionConstS = reactionConstS;
  }

  onCue(msg: PromptMsg) {
    this.cuedMode = msg.mode_id;
  }

  onPrediction(msg: PredictionMsg) {
    this.lastPrediction = msg;
  }

  onTrialResult(msg: TrialResultMsg) {
    let deltaTms = msg.delta_t_ms;
    if (deltaTms !== null && msg.t3_s !== null) {
      // Recompute from the timestamps; must agree with the server to the ms.
      const recomputed = (msg.t3_s - msg.t0_s - this.reactionConstS) * 1000;
      if (Math.abs(recomputed - deltaTms) > 0.5) {
        this.mismatches.push(
          `trial ${this.trials.length + 1}: server ${deltaTms}ms vs recomputed ${recomputed.toFixed(3)}ms`,
        );
        deltaTms = recomputed; // trust the raw timestamps
      }
    }
    this.trials.push({
      index: this.trials.length + 1,
      cued: msg.cued_mode,
      predicted: msg.predicted_mode,
      deltaTms,
      correct: msg.correct,
      timedOut: msg.timed_out,
    });
    this.cuedMode = null;
  }

  get runningAccuracy(): number {
    const done = this.trials.filter((t) => !t.timedOut);
    if (!done.length) return 0;
    return done.filter((t) => t.correct).length / done.length;
  }

  get meanDeltaTms(): number | null {
    const vals = this.trials.filter((t) => t.deltaTms !== null).map((t) => t.deltaTms as number);
    if (!vals.length) return null;
    return vals.reduce((a, b) => a + b, 0) / vals.length;
  }
}

/** Keypress reaction-time test: show a visual cue, measure cue-to-press. */
export class ReactionTest {
  latenciesS: number[] = [];
  private cueAtMs: number | null = null;

  constructor(
    public n: number,
    private now: () => number = () => performance.now(),
  ) {}

  cueShown() {
    this.cueAtMs = this.now();
  }

  keyPressed(): number | null {
    if (this.cueAtMs === null) return null; // ignore presses with no cue up
    const latency = (this.now() - this.cueAtMs) / 1000;
    this.cueAtMs = null;
    this.latenciesS.push(latency);
    return latency;
  }

  get done(): boolean {
    return this.latenciesS.length >= this.n;
  }
}
