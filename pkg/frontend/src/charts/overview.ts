// Full-history strip with a drag brush. The strip always shows the whole
// recorded extent at coarse resolution; brushing picks the focus window.

import type { WindowPayload } from "../api.js";
import { clearChildren, el, numLabel } from "../format.js";

export class OverviewStrip {
  readonly root: HTMLElement;
  private canvas: HTMLCanvasElement;
  private readout: HTMLElement;
  private extentStart = 0;
  private extentEnd = 1;
  private focusStart = 0;
  private focusEnd = 1;
  private payload: WindowPayload | null = null;
  private dragAnchor: number | null = null;
  private onBrush: (startMs: number, endMs: number) => void;

  constructor(root: HTMLElement, onBrush: (startMs: number, endMs: number) => void) {
    this.root = root;
    this.onBrush = onBrush;
    this.canvas = el("canvas", "strip-canvas");
    this.canvas.width = 900;
    this.canvas.height = 90;
    this.readout = el("div", "strip-readout");
    root.append(this.canvas, this.readout);

    this.canvas.addEventListener("mousedown", (ev) => {
      this.dragAnchor = this.fracAt(ev);
    });
    this.canvas.addEventListener("mousemove", (ev) => {
      if (this.dragAnchor === null) return;
      this.applyBrush(this.dragAnchor, this.fracAt(ev), false);
    });
    window.addEventListener("mouseup", (ev) => {
      if (this.dragAnchor === null) return;
      const anchor = this.dragAnchor;
      this.dragAnchor = null;
      if (ev.target === this.canvas) {
        this.applyBrush(anchor, this.fracAt(ev as MouseEvent), true);
      }
    });
  }

  private fracAt(ev: MouseEvent): number {
    const rect = this.canvas.getBoundingClientRect();
    const w = rect.width || this.canvas.width;
    return Math.max(0, Math.min(1, (ev.clientX - rect.left) / w));
  }

  setExtent(startMs: number, endMs: number): void {
    this.extentStart = startMs;
    this.extentEnd = Math.max(endMs, startMs + 1);
  }

  setFocus(startMs: number, endMs: number): void {
    this.focusStart = startMs;
    this.focusEnd = endMs;
    this.paint();
  }

  /** Brush by extent fraction; scripted sessions call this directly. */
  brush(fracA: number, fracB: number): void {
    this.applyBrush(fracA, fracB, true);
  }

  private applyBrush(fracA: number, fracB: number, _final: boolean): void {
    const lo = Math.min(fracA, fracB);
    const hi = Math.max(fracA, fracB);
    const span = this.extentEnd - this.extentStart;
    this.onBrush(this.extentStart + lo * span, this.extentStart + hi * span);
  }

  render(payload: WindowPayload): void {
    this.payload = payload;
    clearChildren(this.readout);
    const line = el("div", "readout-line");
    line.append(
      el("span", "lbl", "History total "),
      numLabel(payload.total_kwh, 2, " kWh"),
      el("span", "lbl", "  coverage "),
      numLabel(payload.coverage, 3),
    );
    this.readout.append(line);
    this.paint();
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
    ctx.fillStyle = "#6b7f99";
    buckets.forEach((b, i) => {
      const bh = (b.kwh / maxK) * (h - 8);
      ctx.fillRect(i * bw, h - bh, Math.max(1, bw - 1), bh);
    });
    // focus brush overlay
    const span = this.extentEnd - this.extentStart;
    const x0 = ((this.focusStart - this.extentStart) / span) * w;
    const x1 = ((this.focusEnd - this.extentStart) / span) * w;
    ctx.fillStyle = "rgba(255, 193, 84, 0.25)";
    ctx.fillRect(x0, 0, Math.max(2, x1 - x0), h);
    ctx.strokeStyle = "#e0a733";
    ctx.strokeRect(x0, 0, Math.max(2, x1 - x0), h);
  }
}
