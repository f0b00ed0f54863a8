// Shared view state: the focus window, perspective, and overlay toggles.
// Components subscribe and re-query the service when the parts they care
// about change; nothing here stores payload data.

import type { Meta } from "./api.js";

export type Perspective = "basic" | "advanced";
export type CostUnits = "kwh" | "usd";

export interface ViewState {
  windowStart: string;
  windowEnd: string;
  maxPoints: number;
  perspective: Perspective;
  costUnits: CostUnits;
  compareEnabled: boolean;
  baselineStart: string | null;
  baselineEnd: string | null;
  scheme: string;
  dayKind: string;
}

type Listener = (state: ViewState, changed: Set<keyof ViewState>) => void;

const MS = 1000;

export function parseInstant(iso: string): number {
  return Date.parse(iso);
}

export function toIso(ms: number): string {
  return new Date(ms).toISOString().replace(/\.\d{3}Z$/, "+00:00");
}

export class Store {
  private listeners: Listener[] = [];
  private extentStart: number;
  private extentEnd: number;
  readonly meta: Meta;
  state: ViewState;

  constructor(meta: Meta) {
    this.meta = meta;
    const ext = meta.extent;
    this.extentStart = ext ? parseInstant(ext.start) : 0;
    this.extentEnd = ext ? parseInstant(ext.end) : 24 * 3600 * MS;
    this.state = {
      windowStart: toIso(this.extentStart),
      windowEnd: toIso(this.extentEnd),
      maxPoints: Math.min(800, meta.max_points_cap),
      perspective: "basic",
      costUnits: "kwh",
      compareEnabled: false,
      baselineStart: null,
      baselineEnd: null,
      scheme: "hour_of_day",
      dayKind: "all",
    };
  }

  get extent(): { start: number; end: number } {
    return { start: this.extentStart, end: this.extentEnd };
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  update(patch: Partial<ViewState>): void {
    const changed = new Set<keyof ViewState>();
    for (const key of Object.keys(patch) as (keyof ViewState)[]) {
      const next = patch[key];
      if (next !== undefined && this.state[key] !== next) {
        (this.state as unknown as Record<string, unknown>)[key] = next;
        changed.add(key);
      }
    }
    if (changed.size === 0) return;
    for (const fn of this.listeners.slice()) fn(this.state, changed);
  }

  /** Clamp a candidate window to the recorded extent, keep start < end,
   *  and enforce a floor of one meter interval. */
  setWindow(startMs: number, endMs: number): void {
    const floor = Math.max(this.meta.interval_seconds, 60) * MS;
    let s = Math.max(this.extentStart, Math.min(startMs, endMs));
    let e = Math.min(this.extentEnd, Math.max(startMs, endMs));
    if (e - s < floor) {
      e = Math.min(this.extentEnd, s + floor);
      s = Math.max(this.extentStart, e - floor);
    }
    this.update({ windowStart: toIso(s), windowEnd: toIso(e) });
  }

  setMaxPoints(n: number): void {
    const capped = Math.max(2, Math.min(n, this.meta.max_points_cap));
    this.update({ maxPoints: capped });
  }

  /** Baseline window for comparison: same duration, immediately before. */
  enableCompare(): void {
    const s = parseInstant(this.state.windowStart);
    const e = parseInstant(this.state.windowEnd);
    const span = e - s;
    const bStart = Math.max(this.extentStart, s - span);
    this.update({
      compareEnabled: true,
      baselineStart: toIso(bStart),
      baselineEnd: toIso(bStart + span > s ? s : bStart + span),
    });
  }

  disableCompare(): void {
    this.update({ compareEnabled: false, baselineStart: null, baselineEnd: null });
  }
}
