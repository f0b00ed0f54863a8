// Rhythm bars: one bar per bin of the active scheme. In compare mode each
// bin shows the focus window next to a baseline window of equal length.

import type { AggregatePayload, Bin, ComparePayload } from "../api.js";
import { clearChildren, el, numLabel, textLabel } from "../format.js";

export class RhythmBars {
  readonly root: HTMLElement;
  private canvas: HTMLCanvasElement;
  private table: HTMLElement;

  constructor(root: HTMLElement) {
    this.root = root;
    this.canvas = el("canvas", "bars-canvas");
    this.canvas.width = 900;
    this.canvas.height = 200;
    this.table = el("div", "bars-table");
    root.append(this.canvas, this.table);
  }

  render(payload: AggregatePayload): void {
    clearChildren(this.table);
    for (const bin of payload.bins) {
      const row = el("div", "bin-row");
      row.append(
        textLabel(bin.label, "bin-label"),
        el("span", "lbl", " mean "),
        numLabel(bin.mean_kwh, 4, " kWh"),
        el("span", "lbl", " peak "),
        numLabel(bin.peak_kwh, 4),
        el("span", "lbl", " n="),
        numLabel(bin.sample_count, 0),
      );
      this.table.append(row);
    }
    this.paint(payload.bins, null);
  }

  renderCompare(payload: ComparePayload): void {
    clearChildren(this.table);
    const base = new Map(payload.baseline.bins.map((b) => [b.bin_index, b]));
    for (const bin of payload.main.bins) {
      const row = el("div", "bin-row compare");
      row.append(
        textLabel(bin.label, "bin-label"),
        el("span", "lbl", " now "),
        numLabel(bin.mean_kwh, 4),
      );
      const prior = base.get(bin.bin_index);
      if (prior) {
        row.append(el("span", "lbl", " before "), numLabel(prior.mean_kwh, 4));
      }
      this.table.append(row);
    }
    this.paint(payload.main.bins, payload.baseline.bins);
  }

  private paint(bins: Bin[], baseline: Bin[] | null): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width: w, height: h } = this.canvas;
    ctx.clearRect(0, 0, w, h);
    if (bins.length === 0) return;
    const all = baseline ? bins.concat(baseline) : bins;
    const maxM = Math.max(...all.map((b) => b.mean_kwh), 1e-9);
    const slot = w / bins.length;
    const bw = baseline ? slot * 0.38 : slot * 0.7;
    bins.forEach((b, i) => {
      const bh = (b.mean_kwh / maxM) * (h - 10);
      ctx.fillStyle = "#946bb0";
      ctx.fillRect(i * slot + slot * 0.08, h - bh, bw, bh);
    });
    if (baseline) {
      const byIndex = new Map(baseline.map((b) => [b.bin_index, b]));
      bins.forEach((b, i) => {
        const prior = byIndex.get(b.bin_index);
        if (!prior) return;
        const bh = (prior.mean_kwh / maxM) * (h - 10);
        ctx.fillStyle = "#b9a7c9";
        ctx.fillRect(i * slot + slot * 0.52, h - bh, bw, bh);
      });
    }
  }
}
