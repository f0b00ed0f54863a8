// Dashboard assembly. bootApp builds the panels, wires them to view state,
// and returns a controller whose methods are the same entry points the
// pointer handlers use, so a scripted session exercises the real paths.

import { ApiClient } from "./api.js";
import type { EvaluatePayload, Meta, ProfileDoc } from "./api.js";
import { RhythmBars } from "./charts/bars.js";
import { DetailChart } from "./charts/detail.js";
import { OverviewStrip } from "./charts/overview.js";
import { SpiralChart } from "./charts/spiral.js";
import { ContextBand } from "./context.js";
import { clearChildren, el, numLabel, textLabel } from "./format.js";
import { WeightScale } from "./scale.js";
import { parseInstant, Perspective, Store, toIso } from "./state.js";

const SCHEMES = [
  "hour_of_day", "day_of_week", "month_of_year", "week_of_year", "day_segment",
];
const OVERVIEW_POINTS = 300;

export interface AppController {
  store: Store;
  meta: Meta;
  overview: OverviewStrip;
  detail: DetailChart;
  bars: RhythmBars;
  contextBand: ContextBand;
  spiral: SpiralChart | null;
  scale: WeightScale | null;
  brush(fracA: number, fracB: number): void;
  zoom(factor: number): void;
  setPerspective(p: Perspective): void;
  setScheme(scheme: string): void;
  setCostUnits(units: "kwh" | "usd"): void;
  enableCompare(): void;
  disableCompare(): void;
  inspectProfile(id: string): Promise<void>;
  runWhatif(baseId: string, ops: unknown[]): Promise<void>;
  runAudit(profileId: string): Promise<void>;
  whenIdle(): Promise<void>;
}

function isAbort(err: unknown): boolean {
  return err instanceof Error && err.name === "AbortError";
}

class App implements AppController {
  store: Store;
  meta: Meta;
  overview: OverviewStrip;
  detail: DetailChart;
  bars: RhythmBars;
  contextBand: ContextBand;
  spiral: SpiralChart | null = null;
  scale: WeightScale | null = null;

  private api: ApiClient;
  private statusLine: HTMLElement;
  private advancedSection: HTMLElement;
  private advancedBooted = false;
  private currentProfile: ProfileDoc | null = null;
  private pending = new Set<Promise<unknown>>();

  constructor(root: HTMLElement, api: ApiClient, meta: Meta) {
    this.api = api;
    this.meta = meta;
    this.store = new Store(meta);

    const header = el("div", "header");
    const title = el("span", "title");
    title.append(
      textLabel(meta.household_id, "household"),
      el("span", "lbl", " · "),
      textLabel(meta.timezone, "tz"),
      el("span", "lbl", "  readings "),
      numLabel(meta.readings, 0),
      el("span", "lbl", "  every "),
      numLabel(meta.interval_seconds, 0, " s"),
    );
    header.append(title, this.buildControls());
    this.statusLine = el("div", "status");

    const overviewRoot = el("section", "panel overview");
    const detailRoot = el("section", "panel detail");
    const contextRoot = el("section", "panel context");
    const barsRoot = el("section", "panel bars");
    this.advancedSection = el("section", "panel advanced");
    this.advancedSection.style.display = "none";

    root.append(header, this.statusLine, overviewRoot, detailRoot,
                contextRoot, barsRoot, this.advancedSection);

    this.overview = new OverviewStrip(overviewRoot, (s, e) => {
      this.store.setWindow(s, e);
    });
    this.detail = new DetailChart(detailRoot, (factor, centerFrac) => {
      const s = parseInstant(this.store.state.windowStart);
      const e = parseInstant(this.store.state.windowEnd);
      const span = e - s;
      const center = s + centerFrac * span;
      const newSpan = span * factor;
      this.store.setWindow(center - centerFrac * newSpan,
                           center + (1 - centerFrac) * newSpan);
    });
    this.contextBand = new ContextBand(contextRoot, api,
                                       () => this.refreshContext());
    this.bars = new RhythmBars(barsRoot);

    const ext = this.store.extent;
    this.overview.setExtent(ext.start, ext.end);
    this.overview.setFocus(ext.start, ext.end);

    this.store.subscribe((state, changed) => {
      const windowMoved = changed.has("windowStart") || changed.has("windowEnd")
        || changed.has("maxPoints") || changed.has("costUnits");
      if (windowMoved) {
        this.overview.setFocus(parseInstant(state.windowStart),
                               parseInstant(state.windowEnd));
        this.refreshDetail();
        this.refreshContext();
        if (state.perspective === "advanced") this.refreshSpiral();
      }
      if (windowMoved || changed.has("scheme") || changed.has("dayKind")
          || changed.has("compareEnabled")) {
        this.refreshBars();
      }
      if (changed.has("perspective")) {
        this.applyPerspective(state.perspective);
      }
    });
  }

  private buildControls(): HTMLElement {
    const bar = el("span", "controls");

    const scheme = el("select", "scheme-select") as HTMLSelectElement;
    for (const s of SCHEMES) {
      const opt = el("option") as HTMLOptionElement;
      opt.value = s;
      opt.textContent = s.replace(/_/g, " ");
      scheme.append(opt);
    }
    scheme.addEventListener("change", () => this.setScheme(scheme.value));

    const units = el("select", "units-select") as HTMLSelectElement;
    for (const u of ["kwh", "usd"]) {
      const opt = el("option") as HTMLOptionElement;
      opt.value = u;
      opt.textContent = u === "kwh" ? "energy" : "cost";
      units.append(opt);
    }
    units.addEventListener("change", () => {
      this.setCostUnits(units.value as "kwh" | "usd");
    });

    const compare = el("button", "compare-toggle", "compare prior period");
    compare.addEventListener("click", () => {
      if (this.store.state.compareEnabled) this.disableCompare();
      else this.enableCompare();
      compare.classList.toggle("on", this.store.state.compareEnabled);
    });

    const persp = el("button", "perspective-toggle", "advanced view");
    persp.addEventListener("click", () => {
      const next = this.store.state.perspective === "basic" ? "advanced" : "basic";
      this.setPerspective(next);
      persp.textContent = next === "basic" ? "advanced view" : "basic view";
    });

    bar.append(scheme, units, compare, persp);
    return bar;
  }

  private track<T>(p: Promise<T>): Promise<T> {
    this.pending.add(p);
    const done = () => this.pending.delete(p);
    p.then(done, done);
    return p;
  }

  private report(err: unknown): void {
    if (isAbort(err)) return;
    this.statusLine.textContent =
      err instanceof Error ? err.message : String(err);
  }

  async whenIdle(): Promise<void> {
    while (this.pending.size > 0) {
      await Promise.allSettled([...this.pending]);
    }
  }

  refreshAll(): void {
    const ext = this.store.extent;
    this.track(
      this.api.overview(toIso(ext.start), toIso(ext.end), OVERVIEW_POINTS)
        .then((p) => this.overview.render(p), (e) => this.report(e)),
    );
    this.refreshDetail();
    this.refreshContext();
    this.refreshBars();
  }

  private refreshDetail(): void {
    const s = this.store.state;
    this.track(
      this.api.window(s.windowStart, s.windowEnd, s.maxPoints, s.costUnits)
        .then((p) => this.detail.render(p), (e) => this.report(e)),
    );
  }

  private refreshContext(): void {
    const s = this.store.state;
    this.track(
      this.api.context(s.windowStart, s.windowEnd)
        .then((p) => this.contextBand.render(p), (e) => this.report(e)),
    );
  }

  private refreshBars(): void {
    const s = this.store.state;
    if (s.compareEnabled && s.baselineStart && s.baselineEnd) {
      this.track(
        this.api.compare(s.windowStart, s.windowEnd,
                         s.baselineStart, s.baselineEnd,
                         s.scheme, undefined, s.dayKind)
          .then((p) => this.bars.renderCompare(p), (e) => this.report(e)),
      );
    } else {
      this.track(
        this.api.aggregate(s.windowStart, s.windowEnd,
                           s.scheme, undefined, s.dayKind)
          .then((p) => this.bars.render(p), (e) => this.report(e)),
      );
    }
  }

  private refreshSpiral(): void {
    if (!this.spiral) return;
    const s = this.store.state;
    this.track(
      this.api.spiral(s.windowStart, s.windowEnd, "day", 24)
        .then((p) => this.spiral!.render(p), (e) => this.report(e)),
    );
  }

  private applyPerspective(p: Perspective): void {
    this.advancedSection.style.display = p === "advanced" ? "" : "none";
    if (p !== "advanced") return;
    if (!this.advancedBooted) {
      this.advancedBooted = true;
      const spiralRoot = el("div", "subpanel spiral");
      const scaleRoot = el("div", "subpanel scale");
      this.advancedSection.append(spiralRoot, scaleRoot);
      this.spiral = new SpiralChart(spiralRoot);
      this.scale = new WeightScale(scaleRoot, this.api, () => {
        if (this.currentProfile) {
          void this.inspectProfile(this.currentProfile.profile_id);
        }
      });
      this.track(
        this.api.profiles().then((docs) => {
          if (docs.length > 0) return this.inspectProfile(docs[0].profile_id);
        }, (e) => this.report(e)),
      );
    }
    this.refreshSpiral();
  }

  brush(fracA: number, fracB: number): void {
    this.overview.brush(fracA, fracB);
  }

  zoom(factor: number): void {
    this.detail.zoom(factor);
  }

  setPerspective(p: Perspective): void {
    this.store.update({ perspective: p });
  }

  setScheme(scheme: string): void {
    this.store.update({ scheme });
  }

  setCostUnits(units: "kwh" | "usd"): void {
    this.store.update({ costUnits: units });
  }

  enableCompare(): void {
    this.store.enableCompare();
  }

  disableCompare(): void {
    this.store.disableCompare();
  }

  private async evaluateInWindow(id: string): Promise<EvaluatePayload> {
    const s = this.store.state;
    return this.api.evaluate(id, s.windowStart, s.windowEnd);
  }

  async inspectProfile(id: string): Promise<void> {
    if (!this.scale) return;
    const p = this.track(Promise.all([
      this.api.profile(id),
      this.evaluateInWindow(id),
    ]).then(([doc, evaluated]) => {
      this.currentProfile = doc;
      this.scale!.renderInspect(evaluated, doc);
    }, (e) => this.report(e)));
    await p;
  }

  /** Clone the base profile, apply edit ops to the clone, and weigh the
   *  two models against each other. */
  async runWhatif(baseId: string, ops: unknown[]): Promise<void> {
    if (!this.scale) return;
    const s = this.store.state;
    const p = this.track((async () => {
      const clone = await this.api.cloneProfile(baseId);
      await this.api.patchProfile(clone.profile_id, ops);
      const [baseEval, altEval, delta] = await Promise.all([
        this.evaluateInWindow(baseId),
        this.evaluateInWindow(clone.profile_id),
        this.api.whatif(baseId, clone.profile_id, s.windowStart, s.windowEnd),
      ]);
      this.scale!.renderWhatif(baseEval, altEval, delta);
    })().catch((e) => this.report(e)));
    await p;
  }

  async runAudit(profileId: string): Promise<void> {
    if (!this.scale) return;
    const s = this.store.state;
    const p = this.track(Promise.all([
      this.api.balance(profileId, s.windowStart, s.windowEnd),
      this.evaluateInWindow(profileId),
    ]).then(([bal, evaluated]) => {
      this.scale!.renderAudit(bal, evaluated);
    }, (e) => this.report(e)));
    await p;
  }
}

export async function bootApp(root: HTMLElement,
                              api?: ApiClient): Promise<AppController> {
  const client = api ?? new ApiClient("");
  clearChildren(root);
  const meta = await client.meta();
  const app = new App(root, client, meta);
  app.refreshAll();
  await app.whenIdle();
  return app;
}

const mount = typeof document !== "undefined"
  ? document.getElementById("app")
  : null;
if (mount) {
  void bootApp(mount);
}
