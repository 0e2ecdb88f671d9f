// uPlot wiring for the live trace panels. Chart redraws are driven by a
// requestAnimationFrame loop, decoupled from message arrival.

import uPlot from 'uplot';

import { ACCEL_CHANNELS, EMG_CHANNELS, TraceStore } from './traces.js';

const EMG_COLORS = ['#e6194b', '#3cb44b', '#ffe119', '#4363d8', '#f58231', '#911eb4', '#46f0f0', '#f032e6'];
const ACCEL_COLORS = ['#fabebe', '#aaffc3', '#ffd8b1'];

function makeChart(el: HTMLElement, labels: string[], colors: string[], unit: string): uPlot {
  const series: uPlot.Series[] = [{ label: 't (s)' }];
  labels.forEach((label, i) => {
    series.push({ label, stroke: colors[i % colors.length], width: 1, points: { show: false } });
  });
  return new uPlot(
    {
      width: el.clientWidth || 800,
      height: 220,
      series,
      axes: [
        {},
        { label: unit, stroke: '#ccc', grid: { stroke: '#333' } },
      ],
      legend: { show: false },
      cursor: { show: false },
    },
    [new Float64Array(0), ...labels.map(() => new Float64Array(0))],
    el,
  );
}

export class TracePanels {
  emg: uPlot;
  accel: uPlot;
  private raf = 0;
  dirty = false;

  constructor(private store: TraceStore, emgEl: HTMLElement, accelEl: HTMLElement) {
    this.emg = makeChart(emgEl, Array.from({ length: EMG_CHANNELS }, (_, i) => `ch${i + 1}`), EMG_COLORS, 'uV');
    this.accel = makeChart(accelEl, ['x', 'y', 'z'], ACCEL_COLORS, 'g');
    const loop = () => {
      if (this.dirty) {
        this.dirty = false;
        this.redraw();
      }
      this.raf = requestAnimationFrame(loop);
    };
    this.raf = requestAnimationFrame(loop);
  }

  redraw() {
    const series = this.store.series();
    const t = series[0] as Float64Array;
    const blank = new Float64Array(t.length);
    const emgData = [t, ...series.slice(1, 1 + EMG_CHANNELS).map((s) => s ?? blank)];
    const accelData = [t, ...series.slice(1 + EMG_CHANNELS, 1 + EMG_CHANNELS + ACCEL_CHANNELS).map((s) => s ?? blank)];
    this.emg.setData(emgData as uPlot.AlignedData);
    this.accel.setData(accelData as uPlot.AlignedData);
    for (let c = 0; c < EMG_CHANNELS; c++) this.emg.setSeries(c + 1, { show: this.store.visible[c] });
    for (let c = 0; c < ACCEL_CHANNELS; c++) {
      this.accel.setSeries(c + 1, { show: this.store.visible[EMG_CHANNELS + c] });
    }
  }

  destroy() {
    cancelAnimationFrame(this.raf);
    this.emg.destroy();
    this.accel.destroy();
  }
}
