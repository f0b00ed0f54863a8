// Typed client for the escout service. Every number the UI shows comes out
// of one of these payloads; the client itself never aggregates or derives.

export interface WindowDoc {
  start: string;
  end: string;
}

export interface Meta {
  household_id: string;
  timezone: string;
  interval_seconds: number;
  readings: number;
  extent: WindowDoc | null;
  max_points_cap: number;
  balance_tolerance: number;
  plan: {
    plan_id: string;
    name: string;
    offpeak_rate: number;
    periods: { days: string[]; start_s: number; end_s: number; rate: number }[];
  } | null;
}

export interface Bucket {
  start: string;
  kwh: number;
  count: number;
  peak_kwh: number;
  offpeak_kwh: number;
  usd?: number;
  peak_usd?: number;
  offpeak_usd?: number;
}

export interface WindowPayload {
  household_id: string;
  window: WindowDoc;
  bucket_seconds: number;
  max_points: number;
  clamped: boolean;
  cost_units: string;
  coverage: number;
  total_kwh: number;
  total_usd?: number;
  buckets: Bucket[];
}

export interface Bin {
  bin_index: number;
  label: string;
  mean_kwh: number;
  peak_kwh: number;
  offpeak_kwh: number;
  sample_count: number;
  coverage: number;
}

export interface AggregatePayload {
  scheme: string;
  cells: number;
  window: WindowDoc;
  filter: { day_kind: string; season: string | null; segment: string | null };
  bins: Bin[];
}

export interface ComparePayload {
  scheme: string;
  cells: number;
  main: { window: WindowDoc; bins: Bin[] };
  baseline: { window: WindowDoc; bins: Bin[] };
}

export interface SpiralPayload {
  period: string;
  cells: number;
  window: WindowDoc;
  rings: { start: string; values: (number | null)[] }[];
}

export interface WeatherCell {
  cell_start: string;
  mean_temp: number | null;
  mean_humidity: number | null;
  dominant_condition: string | null;
}

export interface ContextPayload {
  window: WindowDoc;
  granularity: string;
  weather_cells: WeatherCell[];
  events: { event_id: string; title: string; start: string; end: string; source: string }[];
  annotations: { id: string; at: string; text: string; created: string }[];
}

export interface DeviceDoc {
  device_id: string;
  name: string;
  category: string;
  usage_class: string;
  rated_power: number;
  standby_power: number;
  events: { start: string; end: string; days: string[] }[];
}

export interface ProfileDoc {
  profile_id: string;
  label: string;
  plan_ref: string | null;
  devices: DeviceDoc[];
}

export interface ScaleWeightDoc {
  device_id: string;
  name: string;
  category: string;
  energy_kwh: number;
  cost_usd: number;
  area: number;
  radius: number;
}

export interface EvaluatePayload {
  profile_id: string;
  label: string;
  window: WindowDoc;
  kwh: number;
  usd: number;
  per_device: ScaleWeightDoc[];
  per_category: Record<string, number>;
}

export interface WhatifPayload {
  window: WindowDoc;
  base: { profile_id: string; kwh: number; usd: number };
  whatif: { profile_id: string; kwh: number; usd: number };
  delta_kwh: number;
  delta_usd: number;
}

export interface BalancePayload {
  profile_id: string;
  window: WindowDoc;
  measured_kwh: number;
  modeled_kwh: number;
  residual_kwh: number;
  imbalance_ratio: number;
  balanced: boolean;
  tolerance: number;
}

export interface CatalogEntry {
  name: string;
  category: string;
  usage_class: string;
  rated_power: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

type Params = Record<string, string | number | boolean | undefined>;

function qs(params: Params): string {
  const u = new URLSearchParams();
  for (const [k, v] of Object.entries(params)) {
    if (v !== undefined) u.set(k, String(v));
  }
  const s = u.toString();
  return s ? `?${s}` : "";
}

export class ApiError extends Error {
  status: number;
  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

/** Thin JSON transport. Window-style queries are cancel-superseded per key
 *  (latest wins) so dragging the brush never paints a stale response. */
export class ApiClient {
  private base: string;
  private fetchFn: FetchLike;
  private inflight = new Map<string, AbortController>();

  constructor(base = "", fetchFn?: FetchLike) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn =
      fetchFn ?? ((url, init) => globalThis.fetch(url, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) {
      let detail = `HTTP ${resp.status}`;
      try {
        const body = await resp.json();
        if (body && body.error) detail = String(body.error);
      } catch {
        // error body was not JSON; keep the status line
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  /** GET where a newer call with the same key aborts the older one. */
  private latest<T>(key: string, path: string): Promise<T> {
    const prev = this.inflight.get(key);
    if (prev) prev.abort();
    const ctl = new AbortController();
    this.inflight.set(key, ctl);
    return this.request<T>(path, { signal: ctl.signal }).finally(() => {
      if (this.inflight.get(key) === ctl) this.inflight.delete(key);
    });
  }

  meta(): Promise<Meta> {
    return this.request("/api/meta");
  }

  window(start: string, end: string, maxPoints: number,
         costUnits: "kwh" | "usd" = "kwh"): Promise<WindowPayload> {
    return this.latest("window", "/api/series/window" + qs({
      start, end, max_points: maxPoints, cost_units: costUnits,
    }));
  }

  /** Full-history strip; separate key so it never cancels detail queries. */
  overview(start: string, end: string, maxPoints: number): Promise<WindowPayload> {
    return this.latest("overview", "/api/series/window" + qs({
      start, end, max_points: maxPoints,
    }));
  }

  aggregate(start: string, end: string, scheme: string, cells?: number,
            dayKind = "all", season?: string, segment?: string): Promise<AggregatePayload> {
    return this.latest("aggregate", "/api/aggregate" + qs({
      start, end, scheme, cells, day_kind: dayKind, season, segment,
    }));
  }

  compare(start: string, end: string, baselineStart: string, baselineEnd: string,
          scheme: string, cells?: number, dayKind = "all",
          season?: string, segment?: string): Promise<ComparePayload> {
    return this.latest("aggregate", "/api/aggregate/compare" + qs({
      start, end, baseline_start: baselineStart, baseline_end: baselineEnd,
      scheme, cells, day_kind: dayKind, season, segment,
    }));
  }

  spiral(start: string, end: string, period: string, cells: number): Promise<SpiralPayload> {
    return this.latest("spiral", "/api/spiral" + qs({
      start, end, period, cells, perspective: "advanced",
    }));
  }

  context(start: string, end: string, zoomHint = 24): Promise<ContextPayload> {
    return this.latest("context", "/api/context" + qs({
      start, end, zoom_hint: zoomHint,
    }));
  }

  addAnnotation(at: string, text: string) {
    return this.request<{ id: string }>("/api/annotations", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ at, text }),
    });
  }

  catalog(): Promise<CatalogEntry[]> {
    return this.request("/api/catalog");
  }

  profiles(): Promise<ProfileDoc[]> {
    return this.request("/api/profiles");
  }

  profile(id: string): Promise<ProfileDoc> {
    return this.request(`/api/profiles/${encodeURIComponent(id)}`);
  }

  createProfile(doc: Partial<ProfileDoc>): Promise<ProfileDoc> {
    return this.request("/api/profiles", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
  }

  cloneProfile(id: string, newId?: string): Promise<ProfileDoc> {
    return this.request(`/api/profiles/${encodeURIComponent(id)}/clone`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(newId ? { profile_id: newId } : {}),
    });
  }

  patchProfile(id: string, ops: unknown[]): Promise<ProfileDoc> {
    return this.request(`/api/profiles/${encodeURIComponent(id)}`, {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(ops),
    });
  }

  evaluate(id: string, start: string, end: string): Promise<EvaluatePayload> {
    return this.request(`/api/profiles/${encodeURIComponent(id)}/evaluate` + qs({
      start, end, perspective: "advanced",
    }));
  }

  whatif(base: string, whatif: string, start: string, end: string): Promise<WhatifPayload> {
    return this.request("/api/whatif/compare" + qs({
      base, whatif, start, end, perspective: "advanced",
    }));
  }

  balance(profile: string, start: string, end: string): Promise<BalancePayload> {
    return this.request("/api/balance" + qs({
      profile, start, end, perspective: "advanced",
    }));
  }
}
