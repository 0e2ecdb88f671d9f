// Page shell: wires the stream + control clients into the four views
// (data manager, paradigm manager, online test, reaction calibration).

import { ApiClient, ConflictError } from './api.js';
import { TracePanels } from './charts.js';
import { handGlyphSvg } from './glyph.js';
import { OnlinePresenter, ReactionTest } from './online.js';
import { ParadigmPresenter } from './paradigm.js';
import { DEFAULT_FORM, loadForm, saveForm } from './persist.js';
import { StreamClient } from './stream.js';
import { TraceStore } from './traces.js';
import type { StatusPayload } from './types.js';

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

function toast(text: string, kind: 'info' | 'error' = 'info') {
  const el = document.createElement('div');
  el.className = `toast ${kind}`;
  el.textContent = text;
  $('toasts').appendChild(el);
  setTimeout(() => el.remove(), 4000);
}

let audioCtx: AudioContext | null = null;
function beep(modeId: number) {
  try {
    audioCtx = audioCtx ?? new AudioContext();
    const osc = audioCtx.createOscillator();
    const gain = audioCtx.createGain();
    osc.frequency.value = 440 + 40 * modeId;
    gain.gain.value = 0.08;
    osc.connect(gain).connect(audioCtx.destination);
    osc.start();
    osc.stop(audioCtx.currentTime + 0.15);
  } catch {
    // audio is best-effort (autoplay policies)
  }
}

function setupTabs() {
  document.querySelectorAll<HTMLButtonElement>('nav button').forEach((btn) => {
    btn.addEventListener('click', () => {
      document.querySelectorAll('nav button').forEach((b) => b.classList.remove('active'));
      document.querySelectorAll('.page').forEach((p) => p.classList.remove('active'));
      btn.classList.add('active');
      $(btn.dataset.page!).classList.add('active');
    });
  });
}

function main() {
  setupTabs();
  const api = new ApiClient('');
  const store = new TraceStore(10);
  const panels = new TracePanels(store, $('emg-chart'), $('accel-chart'));
  const paradigm = new ParadigmPresenter();
  const online = new OnlinePresenter();
  let reaction: ReactionTest | null = null;
  let reactionTimer: ReturnType<typeof setTimeout> | null = null;

  // ----- channel toggles
  const toggles = $('channel-toggles');
  const names = [...Array.from({ length: 8 }, (_, i) => `ch${i + 1}`), 'ax', 'ay', 'az'];
  names.forEach((name, c) => {
    const label = document.createElement('label');
    const box = document.createElement('input');
    box.type = 'checkbox';
    box.checked = true;
    box.addEventListener('change', () => {
      store.toggle(c, box.checked);
      panels.dirty = true;
    });
    label.append(box, name);
    toggles.appendChild(label);
  });

  // ----- stream
  const stream = new StreamClient(api.wsUrl());
  stream
    .on('signal', (msg) => {
      store.push(msg);
      panels.dirty = true;
      $('drop-indicator').textContent = stream.displayDrops
        ? `display drops: ${stream.displayDrops}`
        : '';
    })
    .on('prompt', (msg) => {
      beep(msg.mode_id);
      if (msg.block !== undefined) {
        paradigm.onPrompt(msg);
        renderParadigm();
      } else {
        online.onCue(msg);
        renderOnline();
      }
    })
    .on('progress', (msg) => {
      paradigm.onProgress(msg);
      $('progress-fill').style.width = `${(paradigm.progress * 100).toFixed(1)}%`;
      $('progress-text').textContent = `${(paradigm.progress * 100).toFixed(0)}%`;
    })
    .on('prediction', (msg) => {
      online.onPrediction(msg);
      $('live-prediction').textContent = `predicted: mode ${msg.label}`;
    })
    .on('trial_result', (msg) => {
      online.onTrialResult(msg);
      renderOnline();
    })
    .on('reaction_result', (msg) => {
      toast(`reaction constant calibrated: ${(msg.reaction_const_s * 1000).toFixed(0)} ms`);
      online.reactionConstS = msg.reaction_const_s;
    })
    .on('event', (msg) => {
      if (msg.name === 'recording_saved') toast(`recording saved: ${msg['rows']} rows`);
      if (msg.name === 'online_done') toast(`online test done: accuracy ${(msg['accuracy'] as number * 100).toFixed(0)}%`);
    })
    .onState((s) => {
      const banner = $('conn-banner');
      banner.textContent = s === 'connected' ? '' : `stream ${s}`;
      banner.className = s === 'connected' ? 'banner hidden' : 'banner';
    })
    .connect();

  // ----- status polling
  const renderStatus = (status: StatusPayload) => {
    $('phase').textContent = status.phase;
    $('device-stats').textContent =
      `${status.device.source} @ ${status.device.fs} Hz x${status.device.rate_multiplier}` +
      (status.device.dropped ? ` (wire drops: ${status.device.dropped})` : '');
    $('reaction-const').textContent = `${(status.reaction_const_s * 1000).toFixed(0)} ms`;
    online.reactionConstS = status.reaction_const_s; // keep delta-t checks honest
  };
  setInterval(() => api.status().then(renderStatus).catch(() => undefined), 1000);

  // ----- paradigm page
  const form = loadForm();
  const fields = ['subject_id', 'day_id', 'n_blocks', 'n_trials', 'wearing_shift'] as const;
  fields.forEach((f) => {
    const input = $<HTMLInputElement>(`form-${f}`);
    input.value = String(form[f]);
    input.addEventListener('change', () => {
      form[f] = Number(input.value) || DEFAULT_FORM[f];
      saveForm(form);
    });
  });

  function renderParadigm() {
    const p = paradigm.current;
    if (!p) return;
    $('prompt-glyph').innerHTML = handGlyphSvg(p.mode_id);
    $('prompt-text').textContent = `mode ${p.mode_id}: ${p.text}`;
    $('prompt-meta').textContent = `block ${p.block ?? '-'} / trial ${p.trial} (${paradigm.promptCount} prompts)`;
    $('desync').textContent = paradigm.inSync ? '' : `desync: ${paradigm.desyncs[paradigm.desyncs.length - 1]}`;
  }

  const guard = (fn: () => Promise<unknown>) => () =>
    fn().catch((err) => {
      if (err instanceof ConflictError) toast(`rejected: ${err.message} (phase ${err.phase})`, 'error');
      else toast(String(err), 'error');
    });

  $('btn-start').addEventListener('click', guard(() => api.startSession(form)));
  $('btn-stop').addEventListener('click', guard(() => api.stopSession()));
  $('btn-apply-params').addEventListener(
    'click',
    guard(() =>
      api.setParams({
        window_ms: Number($<HTMLInputElement>('param-window').value),
        step_ms: Number($<HTMLInputElement>('param-step').value),
        model: $<HTMLSelectElement>('param-model').value,
      }),
    ),
  );

  // ----- online page
  function renderOnline() {
    $('online-cue').innerHTML = online.cuedMode
      ? handGlyphSvg(online.cuedMode) + `<p>cued: mode ${online.cuedMode}</p>`
      : '<p>waiting for cue</p>';
    $('online-accuracy').textContent = `accuracy ${(online.runningAccuracy * 100).toFixed(1)}%`;
    const mean = online.meanDeltaTms;
    $('online-mean-dt').textContent = mean === null ? '' : `mean dt ${mean.toFixed(0)} ms`;
    const rows = online.trials
      .map(
        (t) =>
          `<tr class="${t.correct ? 'ok' : 'bad'}"><td>${t.index}</td><td>${t.cued}</td>` +
          `<td>${t.predicted ?? '-'}</td><td>${t.deltaTms === null ? '-' : t.deltaTms.toFixed(0)}</td>` +
          `<td>${t.timedOut ? 'timeout' : t.correct ? 'ok' : 'miss'}</td></tr>`,
      )
      .join('');
    $('online-table').innerHTML =
      '<tr><th>#</th><th>cued</th><th>pred</th><th>dt ms</th><th></th></tr>' + rows;
    if (online.mismatches.length) {
      $('online-mismatch').textContent = `timing mismatch: ${online.mismatches[online.mismatches.length - 1]}`;
    }
  }

  $('btn-online').addEventListener(
    'click',
    guard(() => api.startOnline({ n_trials: Number($<HTMLInputElement>('online-trials').value) || 20 })),
  );

  // ----- reaction page
  function scheduleReactionCue() {
    const delay = 800 + Math.random() * 1500;
    reactionTimer = setTimeout(() => {
      $('reaction-pad').classList.add('go');
      reaction?.cueShown();
    }, delay);
  }

  $('btn-reaction').addEventListener(
    'click',
    guard(async () => {
      const n = Number($<HTMLInputElement>('reaction-n').value) || 20;
      reaction = new ReactionTest(n);
      await api.reactionStart(n);
      $('reaction-status').textContent = `0 / ${n} - press SPACE when the pad turns green`;
      scheduleReactionCue();
    }),
  );

  document.addEventListener('keydown', (ev) => {
    if (ev.code !== 'Space' || !reaction) return;
    const latency = reaction.keyPressed();
    $('reaction-pad').classList.remove('go');
    if (latency === null) return;
    $('reaction-status').textContent = `${reaction.latenciesS.length} / ${reaction.n} (last ${(latency * 1000).toFixed(0)} ms)`;
    if (reaction.done) {
      const samples = reaction.latenciesS;
      reaction = null;
      if (reactionTimer) clearTimeout(reactionTimer);
      api
        .reactionSubmit(samples)
        .then((status) => {
          $('reaction-status').textContent = `calibrated: ${(status.reaction_const_s * 1000).toFixed(0)} ms`;
        })
        .catch((err) => toast(String(err), 'error'));
    } else {
      scheduleReactionCue();
    }
  });
}

main();
