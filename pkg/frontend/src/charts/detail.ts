// Focus window chart: adaptive buckets from the window route, peak share in
// red over off-peak blue, with a bucket inspector fed by hover or wheel zoom.

import type { WindowPayload } from "../api.js";
import { clearChildren, el, fmtInstant, numLabel } from "../format.js";

export class DetailChart {
  readonly root: HTMLElement;
  private canvas: HTMLCanvasElement;
  private readout: HTMLElement;
  private inspector: HTMLElement;
  private payload: WindowPayload | null = null;
  private onZoom: (factor: number, centerFrac: number) => void;

  constructor(root: HTMLElement, onZoom: (factor: number, centerFrac: number) => void) {
    this.root = root;
    this.onZoom = onZoom;
    this.canvas = el("canvas", "detail-canvas");
    this.canvas.width = 900;
    this.canvas.height = 260;
    this.readout = el("div", "detail-readout");
    this.inspector = el("div", "bucket-inspector");
    root.append(this.canvas, this.readout, this.inspector);

    this.canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      const rect = this.canvas.getBoundingClientRect();
      const w = rect.width || this.canvas.width;
      const frac = Math.max(0, Math.min(1, (ev.clientX - rect.left) / w));
      this.onZoom(ev.deltaY < 0 ? 0.5 : 2.0, frac);
    });
    this.canvas.addEventListener("mousemove", (ev) => {
      if (!this.payload || this.payload.buckets.length === 0) return;
      const rect = this.canvas.getBoundingClientRect();
      const w = rect.width || this.canvas.width;
      const frac = Math.max(0, Math.min(0.999, (ev.clientX - rect.left) / w));
      this.showBucket(Math.floor(frac * this.payload.buckets.length));
    });
  }

  /** Zoom around the chart midpoint; the scripted path for wheel zoom. */
  zoom(factor: number): void {
    this.onZoom(factor, 0.5);
  }

  render(payload: WindowPayload): void {
    this.payload = payload;
    clearChildren(this.readout);
    const line = el("div", "readout-line");
    line.append(
      el("span", "lbl", "Window total "),
      numLabel(payload.total_kwh, 3, " kWh"),
    );
    if (payload.total_usd !== undefined) {
      line.append(el("span", "lbl", "  cost $"), numLabel(payload.total_usd, 2));
    }
    line.append(
      el("span", "lbl", "  bucket "),
      numLabel(payload.bucket_seconds, 0, " s"),
      el("span", "lbl", "  coverage "),
      numLabel(payload.coverage, 3),
    );
    if (payload.clamped) line.append(el("span", "flag", " (clamped)"));
    this.readout.append(line);
    clearChildren(this.inspector);
    this.paint();
  }

  /** Fill the inspector from bucket i of the last payload. */
  showBucket(i: number): void {
    if (!this.payload) return;
    const b = this.payload.buckets[i];
    if (!b) return;
    clearChildren(this.inspector);
    const row = el("div", "inspect-line");
    row.append(
      el("span", "lbl", fmtInstant(b.start) + "  "),
      numLabel(b.kwh, 4, " kWh"),
      el("span", "lbl", "  peak "),
      numLabel(b.peak_kwh, 4),
      el("span", "lbl", "  off-peak "),
      numLabel(b.offpeak_kwh, 4),
      el("span", "lbl", "  readings "),
      numLabel(b.count, 0),
    );
    if (b.usd !== undefined) {
      row.append(el("span", "lbl", "  $"), numLabel(b.usd, 4));
    }
    this.inspector.append(row);
  }

  private paint(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !this.payload) return;
    const { width: w, height: h } = this.canvas;
    ctx.clearRect(0, 0, w, h);
    const buckets = this.payload.buckets;
    if (buckets.length === 0) return;
    const maxK = Math.max(...buckets.map((b) => b.kwh), 1e-9);
    const bw = w / buckets.length;
    buckets.forEach((b, i) => {
      const x = i * bw;
      const offH = (b.offpeak_kwh / maxK) * (h - 14);
      const peakH = (b.peak_kwh / maxK) * (h - 14);
      ctx.fillStyle = "#4a7ab5";
      ctx.fillRect(x, h - offH, Math.max(1, bw - 1), offH);
      ctx.fillStyle = "#c0504d";
      ctx.fillRect(x, h - offH - peakH, Math.max(1, bw - 1), peakH);
    });
  }
}
