// Weight-scale panel. Device energies from an evaluate payload become balls
// whose AREA is proportional to energy: with one k chosen per frame,
// radius = sqrt(k * energy / pi). The balls tumble into the pans under the
// toy physics in physics.ts; sizing and physics never feed back into each
// other, so radii stay exact while positions settle.

import type {
  ApiClient, BalancePayload, EvaluatePayload, ProfileDoc, WhatifPayload,
} from "./api.js";
import { clearChildren, el, numLabel, textLabel } from "./format.js";
import { Ball, makeBall, Pan, seedPositions, settled, step } from "./physics.js";

const R_MAX = 44;           // px radius of the heaviest ball in a frame
const CATEGORY_COLORS: Record<string, string> = {
  appliance: "#c0504d",
  heating: "#d88a2d",
  lighting: "#e8c33a",
  electronics: "#4a7ab5",
  other: "#8a8a8a",
};

export type ScaleMode = "inspect" | "whatif" | "audit";

interface BallSpec {
  id: string;
  name: string;
  energy: number;
  color: string;
}

export class WeightScale {
  readonly root: HTMLElement;
  private canvas: HTMLCanvasElement;
  private readout: HTMLElement;
  private editor: HTMLElement;
  private api: ApiClient;
  private onModelEdited: () => void;

  mode: ScaleMode = "inspect";
  leftBalls: Ball[] = [];
  rightBalls: Ball[] = [];
  k = 0;
  private leftPan: Pan;
  private rightPan: Pan;
  private leftTotal = 0;
  private rightTotal = 0;
  private raf: number | null = null;
  private profile: ProfileDoc | null = null;

  constructor(root: HTMLElement, api: ApiClient, onModelEdited: () => void) {
    this.root = root;
    this.api = api;
    this.onModelEdited = onModelEdited;
    this.canvas = el("canvas", "scale-canvas");
    this.canvas.width = 760;
    this.canvas.height = 340;
    this.readout = el("div", "scale-readout");
    this.editor = el("div", "device-editor");
    root.append(this.canvas, this.readout, this.editor);
    this.leftPan = { cx: 200, floorY: 290, halfWidth: 150 };
    this.rightPan = { cx: 560, floorY: 290, halfWidth: 150 };
  }

  get balls(): Ball[] {
    return this.leftBalls.concat(this.rightBalls);
  }

  /** One k per frame across both pans, R_MAX for the largest energy. */
  private sizeBalls(left: BallSpec[], right: BallSpec[]): void {
    const all = left.concat(right).filter((s) => s.energy > 0);
    const maxE = Math.max(...all.map((s) => s.energy), 0);
    this.k = maxE > 0 ? (Math.PI * R_MAX * R_MAX) / maxE : 0;
    const build = (specs: BallSpec[]): Ball[] =>
      specs
        .filter((s) => s.energy > 0)
        .map((s) => makeBall(
          s.id, 0, 0,
          Math.sqrt((this.k * s.energy) / Math.PI),
          s.energy,
          s.color,
        ));
    this.leftBalls = build(left);
    this.rightBalls = build(right);
    seedPositions(this.leftBalls, this.leftPan);
    seedPositions(this.rightBalls, this.rightPan);
    this.animate();
  }

  private specsFrom(payload: EvaluatePayload): BallSpec[] {
    return payload.per_device.map((d) => ({
      id: d.device_id,
      name: d.name,
      energy: d.energy_kwh,
      color: CATEGORY_COLORS[d.category] ?? CATEGORY_COLORS.other,
    }));
  }

  /** Inspect one profile: devices in the right pan, nothing on the left. */
  renderInspect(evaluated: EvaluatePayload, profile: ProfileDoc): void {
    this.mode = "inspect";
    this.profile = profile;
    this.leftTotal = 0;
    this.rightTotal = evaluated.kwh;
    this.sizeBalls([], this.specsFrom(evaluated));
    clearChildren(this.readout);
    const line = el("div", "readout-line");
    line.append(
      textLabel(evaluated.label, "profile-label"),
      el("span", "lbl", " modeled "),
      numLabel(evaluated.kwh, 3, " kWh"),
      el("span", "lbl", "  $"),
      numLabel(evaluated.usd, 2),
    );
    this.readout.append(line);
    for (const d of evaluated.per_device) {
      const row = el("div", "device-line");
      row.append(
        textLabel(d.name, "device-name"),
        el("span", "lbl", " "),
        numLabel(d.energy_kwh, 3, " kWh"),
        el("span", "lbl", "  $"),
        numLabel(d.cost_usd, 2),
      );
      this.readout.append(row);
    }
    this.renderEditor(profile);
  }

  /** Base devices left, alternative devices right, deltas from the
   *  comparison payload verbatim. */
  renderWhatif(base: EvaluatePayload, whatif: EvaluatePayload,
               delta: WhatifPayload): void {
    this.mode = "whatif";
    this.leftTotal = delta.base.kwh;
    this.rightTotal = delta.whatif.kwh;
    this.sizeBalls(this.specsFrom(base), this.specsFrom(whatif));
    clearChildren(this.readout);
    const line = el("div", "readout-line");
    line.append(
      el("span", "lbl", "base "),
      numLabel(delta.base.kwh, 3, " kWh"),
      el("span", "lbl", " $"),
      numLabel(delta.base.usd, 2),
      el("span", "lbl", "  alt "),
      numLabel(delta.whatif.kwh, 3, " kWh"),
      el("span", "lbl", " $"),
      numLabel(delta.whatif.usd, 2),
    );
    this.readout.append(line);
    const deltas = el("div", "readout-line delta");
    deltas.append(
      el("span", "lbl", "shift "),
      numLabel(delta.delta_kwh, 4, " kWh"),
      el("span", "lbl", "  $"),
      numLabel(delta.delta_usd, 4),
    );
    this.readout.append(deltas);
    this.twinBars(delta.base.kwh, delta.whatif.kwh,
                  delta.base.usd, delta.whatif.usd);
  }

  /** Metered total as one ball on the left, modeled devices right. */
  renderAudit(balance: BalancePayload, evaluated: EvaluatePayload): void {
    this.mode = "audit";
    this.leftTotal = balance.measured_kwh;
    this.rightTotal = balance.modeled_kwh;
    const measured: BallSpec[] = [{
      id: "__measured__",
      name: "meter",
      energy: balance.measured_kwh,
      color: "#3b3b3b",
    }];
    this.sizeBalls(measured, this.specsFrom(evaluated));
    clearChildren(this.readout);
    const line = el("div", "readout-line");
    if (!balance.balanced) line.classList.add("alert");
    line.append(
      el("span", "lbl", "metered "),
      numLabel(balance.measured_kwh, 3, " kWh"),
      el("span", "lbl", "  modeled "),
      numLabel(balance.modeled_kwh, 3, " kWh"),
      el("span", "lbl", "  residual "),
      numLabel(balance.residual_kwh, 3),
      el("span", "lbl", "  ratio "),
      numLabel(balance.imbalance_ratio, 4),
      el("span", "lbl",
         balance.balanced ? "  settled" : "  unaccounted load"),
    );
    this.readout.append(line);
  }

  private twinBars(leftK: number, rightK: number,
                   leftU: number, rightU: number): void {
    const bars = el("div", "twin-bars");
    const kwhRow = el("div", "bar-row");
    kwhRow.append(
      el("span", "lbl", "kWh "),
      this.bar(leftK, rightK, "left"),
      numLabel(leftK, 2),
      el("span", "lbl", " vs "),
      numLabel(rightK, 2),
      this.bar(rightK, leftK, "right"),
    );
    const usdRow = el("div", "bar-row");
    usdRow.append(
      el("span", "lbl", "$ "),
      this.bar(leftU, rightU, "left"),
      numLabel(leftU, 2),
      el("span", "lbl", " vs "),
      numLabel(rightU, 2),
      this.bar(rightU, leftU, "right"),
    );
    bars.append(kwhRow, usdRow);
    this.readout.append(bars);
  }

  private bar(mine: number, other: number, side: string): HTMLElement {
    const span = el("span", `bar ${side}`);
    if (mine > other) span.classList.add("heavier");
    span.style.width = "60px";
    return span;
  }

  private renderEditor(profile: ProfileDoc): void {
    clearChildren(this.editor);
    this.editor.append(el("div", "editor-title", "adjust a device"));
    for (const dev of profile.devices) {
      const row = el("div", "editor-row");
      row.append(textLabel(dev.name, "device-name"));

      const cls = el("select", "usage-select") as HTMLSelectElement;
      for (const v of ["habitual", "always_on", "always_plugged"]) {
        const opt = el("option") as HTMLOptionElement;
        opt.value = v;
        opt.textContent = v.replace("_", " ");
        if (v === dev.usage_class) opt.selected = true;
        cls.append(opt);
      }

      const power = el("input", "power-input") as HTMLInputElement;
      power.type = "number";
      power.step = "0.001";
      power.value = String(dev.rated_power);

      const apply = el("button", "apply-btn", "apply");
      apply.addEventListener("click", () => {
        void this.api.patchProfile(profile.profile_id, [{
          op: "update_device",
          device_id: dev.device_id,
          fields: { usage_class: cls.value, rated_power: power.value },
        }]).then(() => this.onModelEdited());
      });
      row.append(cls, power, apply);

      dev.events.forEach((evt, idx) => {
        const evRow = el("div", "event-row");
        const start = el("input", "time-input") as HTMLInputElement;
        start.value = evt.start;
        const end = el("input", "time-input") as HTMLInputElement;
        end.value = evt.end;
        const days = el("span", "day-toggles");
        const active = new Set(evt.days);
        for (const d of ["MON", "TUE", "WED", "THU", "FRI", "SAT", "SUN"]) {
          const t = el("button", "day-toggle", d.slice(0, 2));
          if (active.has(d)) t.classList.add("on");
          t.addEventListener("click", () => {
            if (active.has(d)) { active.delete(d); t.classList.remove("on"); }
            else { active.add(d); t.classList.add("on"); }
          });
          days.append(t);
        }
        const save = el("button", "apply-btn", "move");
        save.addEventListener("click", () => {
          const events = dev.events.map((e, j) => j === idx
            ? { start: start.value, end: end.value, days: [...active] }
            : e);
          void this.api.patchProfile(profile.profile_id, [{
            op: "update_device",
            device_id: dev.device_id,
            fields: { events },
          }]).then(() => this.onModelEdited());
        });
        evRow.append(start, el("span", "lbl", " to "), end, days, save);
        row.append(evRow);
      });
      this.editor.append(row);
    }
  }

  /** Advance the physics; public so tests can drive time deterministically. */
  tick(dt: number): void {
    step(this.leftBalls, this.leftPan, dt);
    step(this.rightBalls, this.rightPan, dt);
    this.paint();
  }

  /** Run fixed steps until every ball rests (bounded; used headless). */
  settle(maxSteps = 2000): void {
    for (let i = 0; i < maxSteps; i++) {
      this.tick(1 / 60);
      if (settled(this.leftBalls) && settled(this.rightBalls)) break;
    }
  }

  private animate(): void {
    if (typeof requestAnimationFrame !== "function") {
      this.settle();
      return;
    }
    if (this.raf !== null) cancelAnimationFrame(this.raf);
    const run = () => {
      this.tick(1 / 60);
      if (!settled(this.leftBalls) || !settled(this.rightBalls)) {
        this.raf = requestAnimationFrame(run);
      } else {
        this.raf = null;
      }
    };
    this.raf = requestAnimationFrame(run);
  }

  private paint(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width: w, height: h } = this.canvas;
    ctx.clearRect(0, 0, w, h);
    // beam tilts toward the heavier pan
    const total = Math.max(this.leftTotal + this.rightTotal, 1e-9);
    const tilt = Math.max(-0.12, Math.min(0.12,
      ((this.rightTotal - this.leftTotal) / total) * 0.25));
    ctx.save();
    ctx.translate(w / 2, 40);
    ctx.rotate(tilt);
    ctx.strokeStyle = "#555";
    ctx.lineWidth = 5;
    ctx.beginPath();
    ctx.moveTo(-(w / 2 - 120), 0);
    ctx.lineTo(w / 2 - 120, 0);
    ctx.stroke();
    ctx.restore();
    for (const pan of [this.leftPan, this.rightPan]) {
      ctx.strokeStyle = "#777";
      ctx.lineWidth = 3;
      ctx.beginPath();
      ctx.moveTo(pan.cx - pan.halfWidth, pan.floorY - 60);
      ctx.lineTo(pan.cx - pan.halfWidth, pan.floorY);
      ctx.lineTo(pan.cx + pan.halfWidth, pan.floorY);
      ctx.lineTo(pan.cx + pan.halfWidth, pan.floorY - 60);
      ctx.stroke();
    }
    for (const b of this.balls) {
      ctx.fillStyle = b.color;
      ctx.beginPath();
      ctx.arc(b.x, b.y, b.r, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}
