"""Device-level household model: profile energy/cost, balance, what-if deltas.

All internal arithmetic runs on exact rationals (powers hold their decimal
meaning, spans are whole microseconds), so scenario deltas like "same event
moved to Saturday" come out exactly zero instead of within-epsilon.
"""

from __future__ import annotations

import copy
import math
import json
import uuid
from dataclasses import dataclass, field, fields as dc_fields
from datetime import date, datetime, timedelta
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Optional
from zoneinfo import ZoneInfo

from .meter import TimeWindow
from .tariff import TariffPlan, day_index, decimal_fraction, parse_time_of_day, DAY_NAMES


class ModelError(ValueError):
    """Invalid model document or operation."""


class InvariantViolation(ModelError):
    """An edit would leave the profile in an invalid state."""


class UnknownDevice(ModelError):
    def __init__(self, device_id: str):
        self.device_id = device_id
        super().__init__(f"no device {device_id!r} in profile")


class UnknownEvent(ModelError):
    def __init__(self, device_id: str, index: int):
        super().__init__(f"device {device_id!r} has no event #{index}")


class UsageClass(Enum):
    ALWAYS_ON = "always_on"
    ALWAYS_PLUGGED = "always_plugged"
    HABITUAL = "habitual"


class ProfileLabel(Enum):
    BASE = "base"
    WHATIF = "whatif"


_BALANCE_EPS = 1e-9


@dataclass(frozen=True)
class UsageEvent:
    """Weekly periodic occurrence: [start_s, end_s) civil seconds on `days`.

    Overnight events (start_s > end_s) wrap past midnight and belong to the
    start day, so "Friday 22:00 to 02:00" runs into Saturday morning but is
    scheduled by Fridays only.
    """

    start_s: int
    end_s: int
    days: frozenset

    def __post_init__(self):
        object.__setattr__(self, "days", frozenset(int(d) for d in self.days))
        if not self.days:
            raise InvariantViolation("event needs at least one day of week")
        if not all(0 <= d <= 6 for d in self.days):
            raise InvariantViolation("event day of week outside Mon..Sun")
        if not (0 <= self.start_s < 86400 and 0 <= self.end_s < 86400):
            raise InvariantViolation("event time of day outside 00:00..24:00")
        if self.start_s == self.end_s:
            raise InvariantViolation("event start equals end")

    @property
    def overnight(self) -> bool:
        return self.end_s < self.start_s

    @property
    def duration_s(self) -> int:
        return (self.end_s - self.start_s) % 86400


@dataclass
class DeviceProfile:
    device_id: str
    name: str
    category: str  # e.g. appliance, vampire, lighting
    usage_class: UsageClass
    rated_power: Fraction  # kW
    standby_power: Fraction = Fraction(0)
    events: list = field(default_factory=list)

    def __post_init__(self):
        self.rated_power = decimal_fraction(self.rated_power)
        self.standby_power = decimal_fraction(self.standby_power)
        if self.standby_power < 0:
            raise InvariantViolation("standby_power must be >= 0")
        if self.rated_power < self.standby_power:
            raise InvariantViolation("rated_power must be >= standby_power")
        if self.standby_power > 0 and self.usage_class is not UsageClass.ALWAYS_PLUGGED:
            raise InvariantViolation("standby_power applies to always-plugged devices only")


@dataclass
class HouseholdProfile:
    profile_id: str
    label: ProfileLabel = ProfileLabel.BASE
    devices: list = field(default_factory=list)
    plan_ref: Optional[str] = None

    def __post_init__(self):
        ids = [d.device_id for d in self.devices]
        if len(set(ids)) != len(ids):
            raise InvariantViolation("device ids must be unique within a profile")

    def device(self, device_id: str) -> DeviceProfile:
        for d in self.devices:
            if d.device_id == device_id:
                return d
        raise UnknownDevice(device_id)

    def _index_of(self, device_id: str) -> int:
        for i, d in enumerate(self.devices):
            if d.device_id == device_id:
                return i
        raise UnknownDevice(device_id)


@dataclass(frozen=True)
class BalanceState:
    measured_kwh: float
    modeled_kwh: float
    residual_kwh: float
    imbalance_ratio: float
    balanced: bool
    tolerance: float


@dataclass(frozen=True)
class ScaleWeight:
    device_id: str
    name: str
    category: str
    energy_kwh: float
    cost_usd: float
    area: float
    radius: float


@dataclass(frozen=True)
class ProfileEnergy:
    kwh: float
    usd: float
    per_device: list  # ScaleWeight, profile device order
    per_category: dict


@dataclass(frozen=True)
class ScenarioDelta:
    base_kwh: float
    base_usd: float
    whatif_kwh: float
    whatif_usd: float
    delta_kwh: float
    delta_usd: float


def _tz(zone) -> ZoneInfo:
    return zone if isinstance(zone, ZoneInfo) else ZoneInfo(zone)


def _td_seconds(td: timedelta) -> Fraction:
    return Fraction(td.days * 86_400_000_000 + td.seconds * 1_000_000 + td.microseconds,
                    1_000_000)


def _localize(d: date, sod: int, tz: ZoneInfo) -> datetime:
    # nonexistent spring-forward times resolve forward, ambiguous fall-back
    # times take the earlier instant (fold=0)
    return (datetime(d.year, d.month, d.day) + timedelta(seconds=sod)).replace(tzinfo=tz)


def occurrences(event: UsageEvent, window: TimeWindow, zone) -> list:
    """Absolute (start, end) occurrence spans clipped to the window."""
    tz = _tz(zone)
    # one day back catches overnight spans reaching into the window
    d = window.start.astimezone(tz).date() - timedelta(days=1)
    last = (window.end - timedelta(microseconds=1)).astimezone(tz).date()
    out = []
    one_day = timedelta(days=1)
    while d <= last:
        if d.weekday() in event.days:
            s = _localize(d, event.start_s, tz)
            e = _localize(d + one_day if event.overnight else d, event.end_s, tz)
            lo = s if s >= window.start else window.start
            hi = e if e <= window.end else window.end
            if lo < hi:
                out.append((lo, hi))
        d += one_day
    return out


def _merge(spans: list) -> list:
    merged = []
    for s, e in sorted(spans):
        if merged and s <= merged[-1][1]:
            if e > merged[-1][1]:
                merged[-1] = (merged[-1][0], e)
        else:
            merged.append((s, e))
    return merged


def _device_energy_exact(device: DeviceProfile, window: TimeWindow, tz: ZoneInfo) -> Fraction:
    window_h = _td_seconds(window.end - window.start) / 3600
    if device.usage_class is UsageClass.ALWAYS_ON:
        return device.rated_power * window_h
    occs = [occ for ev in device.events for occ in occurrences(ev, window, tz)]
    if device.usage_class is UsageClass.HABITUAL:
        # literal sum: overlapping events double-count, as entered
        on_h = sum((_td_seconds(e - s) for s, e in occs), Fraction(0)) / 3600
        return device.rated_power * on_h
    on_h = sum((_td_seconds(e - s) for s, e in _merge(occs)), Fraction(0)) / 3600
    return device.rated_power * on_h + device.standby_power * (window_h - on_h)


def device_energy(device: DeviceProfile, window: TimeWindow, zone) -> float:
    """Modeled kWh for one device over a window.

    AlwaysOn runs at rated power the whole window; Habitual runs only during
    event occurrences; AlwaysPlugged idles at standby power between its
    merged occurrences.
    """
    return float(_device_energy_exact(device, window, _tz(zone)))


def _powered_spans(device: DeviceProfile, window: TimeWindow, tz: ZoneInfo) -> list:
    """(power kW, start, end) spans describing the device's operation."""
    if device.usage_class is UsageClass.ALWAYS_ON:
        return [(device.rated_power, window.start, window.end)]
    occs = [occ for ev in device.events for occ in occurrences(ev, window, tz)]
    if device.usage_class is UsageClass.HABITUAL:
        return [(device.rated_power, s, e) for s, e in occs]
    spans = []
    cursor = window.start
    for s, e in _merge(occs):
        if cursor < s:
            spans.append((device.standby_power, cursor, s))
        spans.append((device.rated_power, s, e))
        cursor = e
    if cursor < window.end:
        spans.append((device.standby_power, cursor, window.end))
    return spans


def _device_cost_exact(device: DeviceProfile, window: TimeWindow,
                       plan: Optional[TariffPlan], tz: ZoneInfo,
                       step_s: int = 900) -> Fraction:
    if plan is None:
        return Fraction(0)
    step = timedelta(seconds=step_s)
    rate_cache: dict = {}
    total = Fraction(0)
    for power, s, e in _powered_spans(device, window, tz):
        if power == 0:
            continue
        t = s
        while t < e:
            nxt = min(t + step, e)
            local = t.astimezone(tz)
            key = (local.weekday(), local.hour * 3600 + local.minute * 60 + local.second)
            rate = rate_cache.get(key)
            if rate is None:
                rate = plan.classify_parts(*key)[1]
                rate_cache[key] = rate
            total += power * rate * (_td_seconds(nxt - t) / 3600)
            t = nxt
    return total


def device_cost(device: DeviceProfile, window: TimeWindow, plan: Optional[TariffPlan],
                zone, step_s: int = 900) -> float:
    """Modeled $ for one device: power × rate integrated at `step_s` steps.

    Each step is priced by the classification at its start, mirroring how
    metered readings are priced at their interval start.
    """
    return float(_device_cost_exact(device, window, plan, _tz(zone), step_s))


def profile_energy(profile: HouseholdProfile, window: TimeWindow, zone,
                   plan: Optional[TariffPlan] = None, step_s: int = 900,
                   area_scale: float = 1.0) -> ProfileEnergy:
    """Whole-profile kWh/$ with per-device scale weights and category sums.

    Weight geometry: area = area_scale × energy, radius = sqrt(area/π), so
    ball areas stay proportional to energy under one profile-wide constant.
    """
    if area_scale <= 0:
        raise ModelError("area_scale must be positive")
    tz = _tz(zone)
    kwh_total = Fraction(0)
    usd_total = Fraction(0)
    weights = []
    per_category: dict = {}
    for dev in profile.devices:
        e = _device_energy_exact(dev, window, tz)
        c = _device_cost_exact(dev, window, plan, tz, step_s)
        kwh_total += e
        usd_total += c
        per_category[dev.category] = per_category.get(dev.category, Fraction(0)) + e
        area = area_scale * float(e)
        weights.append(ScaleWeight(device_id=dev.device_id, name=dev.name,
                                   category=dev.category, energy_kwh=float(e),
                                   cost_usd=float(c), area=area,
                                   radius=math.sqrt(area / math.pi)))
    return ProfileEnergy(kwh=float(kwh_total), usd=float(usd_total),
                         per_device=weights,
                         per_category={k: float(v) for k, v in sorted(per_category.items())})


def balance_state(measured_kwh: float, modeled_kwh: float,
                  tolerance: float = 0.05) -> BalanceState:
    if measured_kwh < 0:
        raise ModelError("measured energy must be >= 0")
    residual = measured_kwh - modeled_kwh
    ratio = abs(residual) / max(measured_kwh, _BALANCE_EPS)
    return BalanceState(measured_kwh=measured_kwh, modeled_kwh=modeled_kwh,
                        residual_kwh=residual, imbalance_ratio=ratio,
                        balanced=ratio <= tolerance, tolerance=tolerance)


def balance(profile: HouseholdProfile, measured_kwh: float, window: TimeWindow,
            zone, tolerance: float = 0.05) -> BalanceState:
    """Measured-vs-modeled reconciliation; the residual is reported, never
    redistributed across devices."""
    tz = _tz(zone)
    modeled = float(sum((_device_energy_exact(d, window, tz) for d in profile.devices),
                        Fraction(0)))
    return balance_state(measured_kwh, modeled, tolerance)


def clone_profile(base: HouseholdProfile, profile_id: Optional[str] = None) -> HouseholdProfile:
    """Deep what-if copy; edits to the clone never touch the base."""
    new_id = profile_id if profile_id else f"{base.profile_id}-whatif-{uuid.uuid4().hex[:8]}"
    return HouseholdProfile(profile_id=new_id, label=ProfileLabel.WHATIF,
                            devices=copy.deepcopy(base.devices), plan_ref=base.plan_ref)


def compare_profiles(base: HouseholdProfile, whatif: HouseholdProfile,
                     window: TimeWindow, zone,
                     base_plan: Optional[TariffPlan] = None,
                     whatif_plan: Optional[TariffPlan] = None,
                     step_s: int = 900) -> ScenarioDelta:
    """Scenario deltas, each profile priced under its own plan.

    Deltas are computed on the exact rationals and rounded once, so a moved
    event of equal duration yields delta_kwh exactly 0.0.
    """
    tz = _tz(zone)

    def totals(profile, plan):
        kwh = sum((_device_energy_exact(d, window, tz) for d in profile.devices), Fraction(0))
        usd = sum((_device_cost_exact(d, window, plan, tz, step_s) for d in profile.devices),
                  Fraction(0))
        return kwh, usd

    b_kwh, b_usd = totals(base, base_plan)
    w_kwh, w_usd = totals(whatif, whatif_plan)
    return ScenarioDelta(base_kwh=float(b_kwh), base_usd=float(b_usd),
                         whatif_kwh=float(w_kwh), whatif_usd=float(w_usd),
                         delta_kwh=float(w_kwh - b_kwh), delta_usd=float(w_usd - b_usd))


# -- edit operations ----------------------------------------------------------
# Each operation validates fully before touching the profile, so a failed
# edit leaves it unchanged.

def add_device(profile: HouseholdProfile, device: DeviceProfile) -> None:
    if any(d.device_id == device.device_id for d in profile.devices):
        raise InvariantViolation(f"device id {device.device_id!r} already in profile")
    profile.devices.append(device)


def remove_device(profile: HouseholdProfile, device_id: str) -> None:
    del profile.devices[profile._index_of(device_id)]


def update_device(profile: HouseholdProfile, device_id: str, **changes) -> None:
    i = profile._index_of(device_id)
    current = profile.devices[i]
    allowed = {f.name for f in dc_fields(DeviceProfile)} - {"device_id"}
    unknown = set(changes) - allowed
    if unknown:
        raise InvariantViolation(f"unknown device fields {sorted(unknown)}")
    merged = {f.name: getattr(current, f.name) for f in dc_fields(DeviceProfile)}
    merged.update(changes)
    profile.devices[i] = DeviceProfile(**merged)  # validates invariants


def add_event(profile: HouseholdProfile, device_id: str, event: UsageEvent) -> None:
    profile.device(device_id).events.append(event)


def remove_event(profile: HouseholdProfile, device_id: str, event_index: int) -> None:
    dev = profile.device(device_id)
    if not 0 <= event_index < len(dev.events):
        raise UnknownEvent(device_id, event_index)
    del dev.events[event_index]


def apply_patch(profile: HouseholdProfile, ops: list) -> HouseholdProfile:
    """Apply a list of edit-op documents to a copy of the profile.

    The original is never modified; on any failure the copy is discarded, so
    a patch is all-or-nothing. Op kinds: add_device, remove_device,
    update_device, add_event, remove_event.
    """
    work = copy.deepcopy(profile)
    for op_doc in ops:
        if not isinstance(op_doc, dict) or "op" not in op_doc:
            raise ModelError("each patch entry needs an 'op' field")
        op = op_doc["op"]
        if op == "add_device":
            add_device(work, device_from_dict(op_doc.get("device", {})))
        elif op == "remove_device":
            remove_device(work, _require(op_doc, "device_id"))
        elif op == "update_device":
            changes = dict(op_doc.get("fields") or
                           {k: v for k, v in op_doc.items() if k not in ("op", "device_id")})
            if "usage_class" in changes:
                changes["usage_class"] = _usage_class(changes["usage_class"])
            if "events" in changes:
                changes["events"] = [event_from_dict(e) for e in changes["events"]]
            for key in ("rated_power", "standby_power"):
                if key in changes:
                    changes[key] = decimal_fraction(changes[key])
            update_device(work, _require(op_doc, "device_id"), **changes)
        elif op == "add_event":
            add_event(work, _require(op_doc, "device_id"),
                      event_from_dict(op_doc.get("event", {})))
        elif op == "remove_event":
            remove_event(work, _require(op_doc, "device_id"),
                         int(_require(op_doc, "event_index")))
        else:
            raise ModelError(f"unknown patch op {op!r}")
    return work


def _require(doc: dict, key: str):
    if key not in doc:
        raise ModelError(f"patch op {doc.get('op')!r} needs {key!r}")
    return doc[key]


def _usage_class(v) -> UsageClass:
    if isinstance(v, UsageClass):
        return v
    try:
        return UsageClass(str(v).strip().lower())
    except ValueError:
        raise ModelError(f"unknown usage class {v!r}")


# -- JSON documents -----------------------------------------------------------

def _tod_seconds(v) -> int:
    if isinstance(v, int) and not isinstance(v, bool):
        s = v
    else:
        s = parse_time_of_day(str(v))
    return 0 if s == 86400 else s  # 24:00 means midnight wrap


def _fmt_sod(s: int) -> str:
    if s % 60:
        return f"{s // 3600:02d}:{s % 3600 // 60:02d}:{s % 60:02d}"
    return f"{s // 3600:02d}:{s % 3600 // 60:02d}"


def event_from_dict(doc: dict) -> UsageEvent:
    try:
        days = doc["days"]
        start, end = doc["start"], doc["end"]
    except (KeyError, TypeError):
        raise ModelError("event document needs start, end, and days")
    day_set = frozenset(d if isinstance(d, int) else day_index(str(d)) for d in days)
    return UsageEvent(start_s=_tod_seconds(start), end_s=_tod_seconds(end), days=day_set)


def event_to_dict(ev: UsageEvent) -> dict:
    return {"start": _fmt_sod(ev.start_s), "end": _fmt_sod(ev.end_s),
            "days": [DAY_NAMES[d] for d in sorted(ev.days)]}


def device_from_dict(doc: dict) -> DeviceProfile:
    try:
        return DeviceProfile(
            device_id=str(doc.get("device_id") or f"dev-{uuid.uuid4().hex[:8]}"),
            name=str(doc.get("name", doc.get("device_id", "device"))),
            category=str(doc.get("category", "other")),
            usage_class=_usage_class(doc["usage_class"]),
            rated_power=decimal_fraction(doc["rated_power"]),
            standby_power=decimal_fraction(doc.get("standby_power", 0)),
            events=[event_from_dict(e) for e in doc.get("events", [])])
    except KeyError as e:
        raise ModelError(f"device document missing field {e.args[0]!r}")


def device_to_dict(dev: DeviceProfile) -> dict:
    return {"device_id": dev.device_id, "name": dev.name, "category": dev.category,
            "usage_class": dev.usage_class.value,
            "rated_power": float(dev.rated_power),
            "standby_power": float(dev.standby_power),
            "events": [event_to_dict(e) for e in dev.events]}


def profile_from_dict(doc: dict) -> HouseholdProfile:
    try:
        return HouseholdProfile(
            profile_id=str(doc["profile_id"]),
            label=ProfileLabel(str(doc.get("label", "base")).lower()),
            devices=[device_from_dict(d) for d in doc.get("devices", [])],
            plan_ref=doc.get("plan_ref"))
    except KeyError as e:
        raise ModelError(f"profile document missing field {e.args[0]!r}")
    except ValueError as e:
        if isinstance(e, ModelError):
            raise
        raise ModelError(str(e))


def profile_to_dict(p: HouseholdProfile) -> dict:
    return {"profile_id": p.profile_id, "label": p.label.value,
            "plan_ref": p.plan_ref,
            "devices": [device_to_dict(d) for d in p.devices]}


def load_profile(source) -> HouseholdProfile:
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8")
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return profile_from_dict(json.loads(text))


def save_profile(profile: HouseholdProfile, path) -> None:
    Path(path).write_text(json.dumps(profile_to_dict(profile), indent=2) + "\n",
                          encoding="utf-8")


def load_catalog(source) -> list:
    """Device catalog: JSON list of {name, category, rated_power, standby_power}."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8")
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    doc = json.loads(text)
    if not isinstance(doc, list):
        raise ModelError("catalog must be a JSON list")
    out = []
    for i, entry in enumerate(doc):
        try:
            out.append({"name": str(entry["name"]),
                        "category": str(entry.get("category", "other")),
                        "usage_class": _usage_class(entry.get("usage_class", "habitual")).value,
                        "rated_power": float(entry["rated_power"]),
                        "standby_power": float(entry.get("standby_power", 0))})
        except (KeyError, TypeError) as e:
            raise ModelError(f"catalog entry {i}: missing or bad field ({e})")
    return out
