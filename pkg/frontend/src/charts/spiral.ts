// Period spiral: each ring is one period instance, each angular cell one
// sub-bin, shaded by the cell's summed energy. Advanced perspective only.

import type { SpiralPayload } from "../api.js";
import { clearChildren, el, fmtInstant, numLabel } from "../format.js";

export class SpiralChart {
  readonly root: HTMLElement;
  private canvas: HTMLCanvasElement;
  private readout: HTMLElement;
  private payload: SpiralPayload | null = null;

  constructor(root: HTMLElement) {
    this.root = root;
    this.canvas = el("canvas", "spiral-canvas");
    this.canvas.width = 420;
    this.canvas.height = 420;
    this.readout = el("div", "spiral-readout");
    root.append(this.canvas, this.readout);
  }

  render(payload: SpiralPayload): void {
    this.payload = payload;
    clearChildren(this.readout);
    const line = el("div", "readout-line");
    line.append(
      el("span", "lbl", `one ring per ${payload.period}, cells `),
      numLabel(payload.cells, 0),
    );
    this.readout.append(line);
    this.paint();
  }

  /** Inspect one cell; hover and scripted sessions share this path. */
  showCell(ring: number, cell: number): void {
    if (!this.payload) return;
    const r = this.payload.rings[ring];
    if (!r || cell < 0 || cell >= r.values.length) return;
    const v = r.values[cell];
    const line = el("div", "cell-line");
    line.append(el("span", "lbl", `${fmtInstant(r.start)} cell ${cell}: `));
    if (v === null) {
      line.append(el("span", "lbl", "no data"));
    } else {
      line.append(numLabel(v, 4, " kWh"));
    }
    const old = this.readout.querySelector(".cell-line");
    if (old) old.remove();
    this.readout.append(line);
  }

  private paint(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !this.payload) return;
    const { width: w, height: h } = this.canvas;
    ctx.clearRect(0, 0, w, h);
    const rings = this.payload.rings;
    if (rings.length === 0) return;
    const cx = w / 2;
    const cy = h / 2;
    const rMax = Math.min(w, h) / 2 - 8;
    const rMin = 18;
    const ringWidth = (rMax - rMin) / rings.length;
    let peak = 1e-9;
    for (const ring of rings) {
      for (const v of ring.values) if (v !== null && v > peak) peak = v;
    }
    rings.forEach((ring, ri) => {
      const inner = rMin + ri * ringWidth;
      const cells = ring.values.length;
      ring.values.forEach((v, ci) => {
        const a0 = (ci / cells) * 2 * Math.PI - Math.PI / 2;
        const a1 = ((ci + 1) / cells) * 2 * Math.PI - Math.PI / 2;
        if (v === null) {
          ctx.fillStyle = "#e8e8e8";
        } else {
          const t = v / peak;
          ctx.fillStyle = `rgba(184, 62, 38, ${0.08 + 0.9 * t})`;
        }
        ctx.beginPath();
        ctx.arc(cx, cy, inner + ringWidth, a0, a1);
        ctx.arc(cx, cy, inner, a1, a0, true);
        ctx.closePath();
        ctx.fill();
      });
    });
  }
}
