"""HTTP/JSON API over the engine modules, plus the payload builders it shares
with the CLI so both emit identical JSON for identical queries."""

from __future__ import annotations

import json
import os
import sys
import time
import threading
from dataclasses import dataclass, field, fields as dc_fields
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

from fastapi import Body, FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import aggregate as agg
from . import context as ctx
from . import household as hh
from .meter import MeterSeries, TimeWindow, downsample, ingest_csv
from .tariff import DAY_NAMES, TariffPlan, load_plan


class UnknownProfile(KeyError):
    def __init__(self, profile_id: str):
        self.profile_id = profile_id
        super().__init__(profile_id)


class BadRequest(ValueError):
    """Malformed query parameter; maps to HTTP 400."""


# -- configuration ------------------------------------------------------------

@dataclass
class ApiConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8750
    meter_csv: Optional[str] = None
    meter_interval: int = 900
    meter_timezone: str = "UTC"
    household_id: str = "household"
    tariff_json: Optional[str] = None
    weather_csv: Optional[str] = None
    calendar_ics: Optional[str] = None
    calendar_horizon_days: int = 366
    profiles_dir: Optional[str] = None
    catalog_json: Optional[str] = None
    annotations_path: Optional[str] = None
    static_dir: Optional[str] = None
    max_points_cap: int = 4000
    balance_tolerance: float = 0.05

    def __post_init__(self):
        if self.max_points_cap < 2:
            raise ValueError(f"max_points_cap must be >= 2, got {self.max_points_cap}")


def load_config(path=None, env=None) -> ApiConfig:
    """Config file (JSON object of ApiConfig fields) with ESCOUT_* overrides."""
    env = os.environ if env is None else env
    doc = {}
    if path is not None:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ValueError("config file must hold a JSON object")
    kwargs = {}
    for f in dc_fields(ApiConfig):
        value = doc.get(f.name, None)
        raw = env.get(f"ESCOUT_{f.name.upper()}")
        if raw is not None:
            value = raw
        if value is None:
            continue
        if f.type in ("int", int):
            value = int(value)
        elif f.type in ("float", float):
            value = float(value)
        kwargs[f.name] = value
    unknown = set(doc) - {f.name for f in dc_fields(ApiConfig)}
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    return ApiConfig(**kwargs)


# -- application state --------------------------------------------------------

class ProfileStore:
    """Profiles by id; mutations serialize per profile and persist as JSON."""

    def __init__(self, directory=None):
        self._dir = Path(directory) if directory else None
        self._profiles: dict = {}
        self._locks: dict = {}
        self._registry_lock = threading.Lock()
        if self._dir is not None and self._dir.exists():
            for p in sorted(self._dir.glob("*.json")):
                profile = hh.load_profile(p)
                self._profiles[profile.profile_id] = profile

    def _lock_for(self, profile_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(profile_id, threading.Lock())

    def _persist(self, profile: hh.HouseholdProfile):
        if self._dir is not None:
            self._dir.mkdir(parents=True, exist_ok=True)
            hh.save_profile(profile, self._dir / f"{profile.profile_id}.json")

    def list(self) -> list:
        with self._registry_lock:
            return sorted(self._profiles.values(), key=lambda p: p.profile_id)

    def get(self, profile_id: str) -> hh.HouseholdProfile:
        with self._registry_lock:
            try:
                return self._profiles[profile_id]
            except KeyError:
                raise UnknownProfile(profile_id)

    def create(self, profile: hh.HouseholdProfile) -> hh.HouseholdProfile:
        with self._registry_lock:
            if profile.profile_id in self._profiles:
                raise hh.InvariantViolation(f"profile id {profile.profile_id!r} already exists")
            self._profiles[profile.profile_id] = profile
        self._persist(profile)
        return profile

    def patch(self, profile_id: str, ops: list) -> hh.HouseholdProfile:
        with self._lock_for(profile_id):
            updated = hh.apply_patch(self.get(profile_id), ops)
            with self._registry_lock:
                self._profiles[profile_id] = updated
            self._persist(updated)
            return updated


@dataclass
class AppState:
    config: ApiConfig
    series: MeterSeries
    plan: Optional[TariffPlan] = None
    weather: list = field(default_factory=list)
    events: list = field(default_factory=list)
    annotations: ctx.AnnotationStore = field(default_factory=ctx.AnnotationStore)
    profiles: ProfileStore = field(default_factory=ProfileStore)
    catalog: list = field(default_factory=list)

    def resolve_plan(self, plan_ref: Optional[str]) -> Optional[TariffPlan]:
        if plan_ref is None or (self.plan is not None and plan_ref == self.plan.plan_id):
            return self.plan
        raise hh.InvariantViolation(f"unknown plan_ref {plan_ref!r} "
                                    "(this deployment serves one tariff plan)")


def build_state(config: ApiConfig) -> AppState:
    if config.meter_csv is None:
        raise ValueError("config needs meter_csv")
    with open(config.meter_csv, "rb") as f:
        series = ingest_csv(f, config.meter_interval, config.meter_timezone,
                            config.household_id)
    series.civil()
    series.grid()  # warm the caches before the first request
    plan = load_plan(config.tariff_json) if config.tariff_json else None
    weather = []
    if config.weather_csv:
        with open(config.weather_csv, "rb") as f:
            weather = ctx.ingest_weather(f, config.meter_timezone)
    events = []
    if config.calendar_ics:
        with open(config.calendar_ics, "rb") as f:
            events = ctx.ingest_calendar(f, config.meter_timezone,
                                         config.calendar_horizon_days)
    catalog = hh.load_catalog(config.catalog_json) if config.catalog_json else []
    return AppState(config=config, series=series, plan=plan, weather=weather,
                    events=events,
                    annotations=ctx.AnnotationStore(config.annotations_path),
                    profiles=ProfileStore(config.profiles_dir), catalog=catalog)


# -- wire helpers -------------------------------------------------------------

def parse_instant(raw: str, name: str = "instant") -> datetime:
    try:
        t = datetime.fromisoformat(str(raw).replace("Z", "+00:00"))
    except ValueError:
        raise BadRequest(f"{name} {raw!r} is not an RFC 3339 instant")
    if t.tzinfo is None:
        raise BadRequest(f"{name} {raw!r} needs a UTC offset")
    return t


def parse_window(start: str, end: str) -> TimeWindow:
    s, e = parse_instant(start, "start"), parse_instant(end, "end")
    if not s < e:
        raise BadRequest("start must precede end")
    return TimeWindow(s, e)


def _iso(t: datetime) -> str:
    return t.isoformat()


def _window_doc(window: TimeWindow) -> dict:
    return {"start": _iso(window.start), "end": _iso(window.end)}


def _parse_filter(day_kind: str = "all", season: Optional[str] = None,
                  segment: Optional[str] = None) -> agg.AggFilter:
    try:
        return agg.AggFilter(
            day_kind=agg.DayKind(str(day_kind).lower()),
            season=agg.Season(season.lower()) if season else None,
            segment=agg.Segment(segment.lower()) if segment else None)
    except ValueError:
        raise BadRequest(f"unknown filter value in day_kind={day_kind!r} "
                         f"season={season!r} segment={segment!r}")


# -- payload builders (shared by API routes and CLI commands) -----------------

def window_payload(series: MeterSeries, plan: Optional[TariffPlan],
                   window: TimeWindow, max_points: int, cost_units: str = "kwh",
                   max_points_cap: int = 4000) -> dict:
    if cost_units not in ("kwh", "usd"):
        raise BadRequest(f"cost_units must be 'kwh' or 'usd', got {cost_units!r}")
    if cost_units == "usd" and plan is None:
        raise BadRequest("cost_units=usd needs a tariff plan")
    clamped = max_points > max_points_cap
    effective = min(max_points, max_points_cap)
    fmap = downsample(series, window, effective, plan=plan)
    buckets = []
    for b in fmap.buckets:
        doc = {"start": _iso(b.bucket_start), "kwh": b.sum_kwh, "count": b.count,
               "peak_kwh": b.peak_kwh, "offpeak_kwh": b.offpeak_kwh}
        if b.sum_usd is not None:
            doc["usd"] = b.sum_usd
            doc["peak_usd"] = b.peak_usd
            doc["offpeak_usd"] = b.offpeak_usd
        buckets.append(doc)
    payload = {
        "household_id": series.household_id,
        "window": _window_doc(window),
        "bucket_seconds": fmap.bucket_span,
        "max_points": effective,
        "clamped": clamped,
        "cost_units": cost_units,
        "coverage": series.coverage(window),
        "total_kwh": fmap.total_kwh,
        "buckets": buckets,
    }
    if plan is not None:
        payload["total_usd"] = float(sum(b.sum_usd for b in fmap.buckets))
    return payload


def aggregate_payload(series: MeterSeries, plan: Optional[TariffPlan],
                      window: TimeWindow, scheme: agg.BinScheme,
                      filt: agg.AggFilter) -> dict:
    bins = agg.aggregate(series, agg.AggregateSpec(window=window, scheme=scheme,
                                                   filter=filt, plan=plan))
    labels = scheme.labels()
    return {
        "scheme": scheme.kind,
        "cells": scheme.cells,
        "window": _window_doc(window),
        "filter": {"day_kind": filt.day_kind.value,
                   "season": filt.season.value if filt.season else None,
                   "segment": filt.segment.value if filt.segment else None},
        "bins": [{"bin_index": b.bin_index, "label": labels[b.bin_index],
                  "mean_kwh": b.mean_kwh, "peak_kwh": b.peak_kwh,
                  "offpeak_kwh": b.offpeak_kwh, "sample_count": b.sample_count,
                  "coverage": b.coverage} for b in bins],
    }


def compare_payload(series: MeterSeries, plan: Optional[TariffPlan],
                    main_spec: agg.AggregateSpec,
                    baseline_spec: agg.AggregateSpec) -> dict:
    pair = agg.compare(main_spec, baseline_spec, series)
    labels = main_spec.scheme.labels()

    def side(spec, bins):
        return {
            "window": _window_doc(spec.window),
            "filter": {"day_kind": spec.filter.day_kind.value,
                       "season": spec.filter.season.value if spec.filter.season else None,
                       "segment": spec.filter.segment.value if spec.filter.segment else None},
            "bins": [{"bin_index": b.bin_index, "label": labels[b.bin_index],
                      "mean_kwh": b.mean_kwh, "peak_kwh": b.peak_kwh,
                      "offpeak_kwh": b.offpeak_kwh, "sample_count": b.sample_count,
                      "coverage": b.coverage} for b in bins],
        }

    return {"scheme": main_spec.scheme.kind, "cells": main_spec.scheme.cells,
            "main": side(main_spec, pair.main),
            "baseline": side(baseline_spec, pair.baseline)}


def spiral_payload(series: MeterSeries, window: TimeWindow, period: str,
                   cells: int) -> dict:
    grid = agg.spiral(series, window, period, cells)
    return {"period": grid.period.value, "cells": grid.cells_per_period,
            "window": _window_doc(window),
            "rings": [{"start": _iso(r.start), "values": r.values}
                      for r in grid.rings]}


def context_payload(window: TimeWindow, weather: list, events: list,
                    annotations: list, zoom_hint: int) -> dict:
    overlay = ctx.window_context(window, weather, events, annotations, zoom_hint)
    return {
        "window": _window_doc(window),
        "granularity": overlay.granularity.value,
        "weather_cells": [{
            "cell_start": _iso(c.cell_start),
            "mean_temp": c.mean_temp,
            "mean_humidity": c.mean_humidity,
            "dominant_condition": c.dominant_condition.value if c.dominant_condition else None,
        } for c in overlay.weather_cells],
        "events": [_event_doc(e) for e in overlay.events],
        "annotations": [_annotation_doc(a) for a in overlay.annotations],
    }


def _event_doc(e: ctx.CalendarEvent) -> dict:
    return {"event_id": e.event_id, "title": e.title, "start": _iso(e.start),
            "end": _iso(e.end), "source": e.source.value}


def _annotation_doc(a: ctx.Annotation) -> dict:
    return {"id": a.annotation_id, "at": _iso(a.at), "text": a.text,
            "created": _iso(a.created)}


def evaluate_payload(profile: hh.HouseholdProfile, window: TimeWindow, zone: str,
                     plan: Optional[TariffPlan], step_s: int,
                     area_scale: float = 1.0) -> dict:
    pe = hh.profile_energy(profile, window, zone, plan=plan, step_s=step_s,
                           area_scale=area_scale)
    return {
        "profile_id": profile.profile_id,
        "label": profile.label.value,
        "window": _window_doc(window),
        "kwh": pe.kwh,
        "usd": pe.usd,
        "per_device": [{"device_id": w.device_id, "name": w.name,
                        "category": w.category, "energy_kwh": w.energy_kwh,
                        "cost_usd": w.cost_usd, "area": w.area, "radius": w.radius}
                       for w in pe.per_device],
        "per_category": pe.per_category,
    }


def whatif_payload(base: hh.HouseholdProfile, whatif: hh.HouseholdProfile,
                   window: TimeWindow, zone: str,
                   base_plan: Optional[TariffPlan],
                   whatif_plan: Optional[TariffPlan], step_s: int) -> dict:
    delta = hh.compare_profiles(base, whatif, window, zone,
                                base_plan=base_plan, whatif_plan=whatif_plan,
                                step_s=step_s)
    return {
        "window": _window_doc(window),
        "base": {"profile_id": base.profile_id, "kwh": delta.base_kwh,
                 "usd": delta.base_usd},
        "whatif": {"profile_id": whatif.profile_id, "kwh": delta.whatif_kwh,
                   "usd": delta.whatif_usd},
        "delta_kwh": delta.delta_kwh,
        "delta_usd": delta.delta_usd,
    }


def balance_payload(profile: hh.HouseholdProfile, series: MeterSeries,
                    window: TimeWindow, tolerance: float) -> dict:
    measured = series.window_total(window)
    state = hh.balance(profile, measured, window, series.timezone, tolerance)
    return {
        "profile_id": profile.profile_id,
        "window": _window_doc(window),
        "measured_kwh": state.measured_kwh,
        "modeled_kwh": state.modeled_kwh,
        "residual_kwh": state.residual_kwh,
        "imbalance_ratio": state.imbalance_ratio,
        "balanced": state.balanced,
        "tolerance": state.tolerance,
    }


def meta_payload(state: AppState) -> dict:
    series = state.series
    extent = series.extent
    return {
        "household_id": series.household_id,
        "timezone": series.timezone,
        "interval_seconds": series.interval,
        "readings": len(series),
        "extent": _window_doc(extent) if extent else None,
        "max_points_cap": state.config.max_points_cap,
        "balance_tolerance": state.config.balance_tolerance,
        "plan": None if state.plan is None else {
            "plan_id": state.plan.plan_id, "name": state.plan.name,
            "offpeak_rate": float(state.plan.offpeak_rate),
            "periods": [{"days": [DAY_NAMES[d] for d in sorted(p.days)],
                         "start_s": p.start_s, "end_s": p.end_s,
                         "rate": float(p.rate)} for p in state.plan.periods]},
    }


# -- app factory --------------------------------------------------------------

def _require_advanced(perspective: str):
    if str(perspective).lower() != "advanced":
        raise HTTPException(status_code=403,
                            detail="this payload needs perspective=advanced")


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="escout", docs_url=None, redoc_url=None)
    cfg = state.config

    @app.exception_handler(RequestValidationError)
    async def _bad_params(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": "malformed parameters",
                                     "detail": exc.errors()})

    @app.exception_handler(hh.ModelError)
    async def _invariant(request: Request, exc: hh.ModelError):
        return JSONResponse(status_code=422,
                            content={"error": str(exc),
                                     "kind": type(exc).__name__})

    @app.exception_handler(UnknownProfile)
    async def _no_profile(request: Request, exc: UnknownProfile):
        return JSONResponse(status_code=404,
                            content={"error": f"no profile {exc.profile_id!r}"})

    @app.exception_handler(ctx.UnknownAnnotation)
    async def _no_annotation(request: Request, exc: ctx.UnknownAnnotation):
        return JSONResponse(status_code=404,
                            content={"error": f"no annotation {exc.annotation_id!r}"})

    @app.exception_handler(ValueError)
    async def _bad_request(request: Request, exc: ValueError):
        return JSONResponse(status_code=400,
                            content={"error": str(exc),
                                     "kind": type(exc).__name__})

    @app.middleware("http")
    async def _log_requests(request: Request, call_next):
        t0 = time.perf_counter()
        response = await call_next(request)
        print(json.dumps({
            "at": datetime.now().astimezone().isoformat(timespec="milliseconds"),
            "method": request.method,
            "path": request.url.path,
            "status": response.status_code,
            "ms": round((time.perf_counter() - t0) * 1000, 2),
        }), file=sys.stdout, flush=True)
        return response

    @app.get("/api/meta")
    def get_meta():
        return meta_payload(state)

    @app.get("/api/series/window")
    def get_window(start: str, end: str, max_points: int = 2000,
                   cost_units: str = "kwh"):
        return window_payload(state.series, state.plan, parse_window(start, end),
                              max_points, cost_units, cfg.max_points_cap)

    @app.get("/api/aggregate")
    def get_aggregate(start: str, end: str, scheme: str = "hour_of_day",
                      cells: Optional[int] = None, day_kind: str = "all",
                      season: Optional[str] = None, segment: Optional[str] = None):
        return aggregate_payload(state.series, state.plan, parse_window(start, end),
                                 agg.BinScheme.parse(scheme, cells),
                                 _parse_filter(day_kind, season, segment))

    @app.get("/api/aggregate/compare")
    def get_compare(start: str, end: str, baseline_start: str, baseline_end: str,
                    scheme: str = "hour_of_day", cells: Optional[int] = None,
                    day_kind: str = "all", season: Optional[str] = None,
                    segment: Optional[str] = None,
                    baseline_scheme: Optional[str] = None,
                    baseline_cells: Optional[int] = None,
                    baseline_day_kind: str = "all",
                    baseline_season: Optional[str] = None,
                    baseline_segment: Optional[str] = None):
        main_scheme = agg.BinScheme.parse(scheme, cells)
        b_scheme = agg.BinScheme.parse(baseline_scheme or scheme,
                                       baseline_cells if baseline_cells is not None else cells)
        main_spec = agg.AggregateSpec(window=parse_window(start, end),
                                      scheme=main_scheme,
                                      filter=_parse_filter(day_kind, season, segment),
                                      plan=state.plan)
        baseline_spec = agg.AggregateSpec(
            window=parse_window(baseline_start, baseline_end), scheme=b_scheme,
            filter=_parse_filter(baseline_day_kind, baseline_season, baseline_segment),
            plan=state.plan)
        return compare_payload(state.series, state.plan, main_spec, baseline_spec)

    @app.get("/api/spiral")
    def get_spiral(start: str, end: str, period: str = "day", cells: int = 24,
                   perspective: str = "basic"):
        _require_advanced(perspective)
        return spiral_payload(state.series, parse_window(start, end), period, cells)

    @app.get("/api/context")
    def get_context(start: str, end: str, zoom_hint: int = 24):
        window = parse_window(start, end)
        return context_payload(window, state.weather, state.events,
                               state.annotations.list_window(window), zoom_hint)

    @app.get("/api/annotations")
    def list_annotations(start: str, end: str):
        window = parse_window(start, end)
        return [_annotation_doc(a) for a in state.annotations.list_window(window)]

    @app.post("/api/annotations", status_code=201)
    def post_annotation(body: dict = Body(...)):
        if "at" not in body or "text" not in body:
            raise BadRequest("annotation body needs 'at' and 'text'")
        note = state.annotations.add(parse_instant(body["at"], "at"),
                                     str(body["text"]))
        return _annotation_doc(note)

    @app.delete("/api/annotations/{annotation_id}", status_code=204)
    def delete_annotation(annotation_id: str):
        state.annotations.delete(annotation_id)

    @app.get("/api/profiles")
    def list_profiles():
        return [hh.profile_to_dict(p) for p in state.profiles.list()]

    @app.post("/api/profiles", status_code=201)
    def create_profile(body: dict = Body(...)):
        return hh.profile_to_dict(state.profiles.create(hh.profile_from_dict(body)))

    @app.get("/api/profiles/{profile_id}")
    def get_profile(profile_id: str):
        return hh.profile_to_dict(state.profiles.get(profile_id))

    @app.patch("/api/profiles/{profile_id}")
    def patch_profile(profile_id: str, body: Union[list, dict] = Body(...)):
        ops = body.get("ops") if isinstance(body, dict) else body
        if not isinstance(ops, list):
            raise BadRequest("PATCH body must be a list of ops or {'ops': [...]}")
        return hh.profile_to_dict(state.profiles.patch(profile_id, ops))

    @app.post("/api/profiles/{profile_id}/clone", status_code=201)
    def clone_profile(profile_id: str, body: Optional[dict] = Body(None)):
        new_id = (body or {}).get("profile_id")
        clone = hh.clone_profile(state.profiles.get(profile_id), new_id)
        return hh.profile_to_dict(state.profiles.create(clone))

    @app.get("/api/profiles/{profile_id}/evaluate")
    def evaluate_profile(profile_id: str, start: str, end: str,
                         area_scale: float = 1.0, perspective: str = "basic"):
        _require_advanced(perspective)
        profile = state.profiles.get(profile_id)
        return evaluate_payload(profile, parse_window(start, end),
                                state.series.timezone,
                                state.resolve_plan(profile.plan_ref),
                                state.series.interval, area_scale)

    @app.get("/api/whatif/compare")
    def whatif_compare(base: str, whatif: str, start: str, end: str,
                       perspective: str = "basic"):
        _require_advanced(perspective)
        base_p = state.profiles.get(base)
        whatif_p = state.profiles.get(whatif)
        return whatif_payload(base_p, whatif_p, parse_window(start, end),
                              state.series.timezone,
                              state.resolve_plan(base_p.plan_ref),
                              state.resolve_plan(whatif_p.plan_ref),
                              state.series.interval)

    @app.get("/api/balance")
    def get_balance(profile: str, start: str, end: str,
                    perspective: str = "basic"):
        _require_advanced(perspective)
        return balance_payload(state.profiles.get(profile),
                               state.series, parse_window(start, end),
                               cfg.balance_tolerance)

    @app.get("/api/catalog")
    def get_catalog():
        return state.catalog

    if cfg.static_dir and Path(cfg.static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=cfg.static_dir, html=True),
                  name="ui")

    return app


def run(config: ApiConfig):
    """Blocking entry point used by the CLI's `serve` command."""
    import uvicorn
    app = create_app(build_state(config))
    uvicorn.run(app, host=config.listen_host, port=config.listen_port,
                log_level="warning")
