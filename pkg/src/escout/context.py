"""Weather, calendar, and annotation context aligned to energy windows."""

from __future__ import annotations

import json
import re
import threading
import uuid
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional
from zoneinfo import ZoneInfo

from .meter import MalformedRow, TimeWindow, _as_text, _parse_timestamp


class ContextError(ValueError):
    """Invalid context data."""


class HumidityOutOfRange(ContextError):
    def __init__(self, line_no: int, value: float):
        self.line_no = line_no
        super().__init__(f"line {line_no}: humidity {value} outside [0, 100]")


class MalformedCalendar(ContextError):
    """Calendar file outside the supported subset; message says exactly why."""


class EmptyText(ContextError):
    def __init__(self):
        super().__init__("annotation text must be non-empty")


class UnknownAnnotation(KeyError):
    def __init__(self, annotation_id: str):
        self.annotation_id = annotation_id
        super().__init__(annotation_id)


class WeatherCondition(Enum):
    # declaration order is the tie-break order for modal aggregation
    SUNNY = "sunny"
    CLOUDY = "cloudy"
    RAIN = "rain"
    SNOW = "snow"
    STORM = "storm"
    FOG = "fog"
    OTHER = "other"


_CONDITION_BY_NAME = {c.value: c for c in WeatherCondition}
_CONDITION_RANK = {c: i for i, c in enumerate(WeatherCondition)}


@dataclass(frozen=True)
class WeatherSample:
    timestamp: datetime
    temperature: float  # °C
    humidity: float     # percent
    condition: WeatherCondition


class EventSource(Enum):
    IMPORTED = "imported"
    ANNOTATION = "annotation"


@dataclass(frozen=True)
class CalendarEvent:
    event_id: str
    title: str
    start: datetime
    end: datetime
    source: EventSource = EventSource.IMPORTED

    def __post_init__(self):
        if self.end < self.start:
            raise ContextError(f"event {self.event_id!r} ends before it starts")


@dataclass(frozen=True)
class Annotation:
    annotation_id: str
    at: datetime
    text: str
    created: datetime


def ingest_weather(source, timezone: str = "UTC") -> list[WeatherSample]:
    """Parse a weather CSV (header ``timestamp,temp_c,humidity_pct,condition``).

    Naive timestamps are read in `timezone`. Unknown condition strings map to
    Other; rows may arrive out of order and come back sorted.
    """
    tz = ZoneInfo(timezone)
    samples = []
    header_seen = False
    for line_no, line in enumerate(_as_text(source).splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not header_seen:
            cols = [c.strip().lower() for c in stripped.split(",")]
            if cols[:4] != ["timestamp", "temp_c", "humidity_pct", "condition"]:
                raise MalformedRow(line_no, "expected header 'timestamp,temp_c,humidity_pct,condition'")
            header_seen = True
            continue
        parts = [p.strip() for p in stripped.split(",")]
        if len(parts) != 4:
            raise MalformedRow(line_no, f"expected 4 fields, got {len(parts)}")
        t = _parse_timestamp(parts[0], tz, line_no)
        try:
            temp = float(parts[1])
            humidity = float(parts[2])
        except ValueError:
            raise MalformedRow(line_no, "unparseable temperature or humidity")
        if not 0 <= humidity <= 100:
            raise HumidityOutOfRange(line_no, humidity)
        condition = _CONDITION_BY_NAME.get(parts[3].lower(), WeatherCondition.OTHER)
        samples.append(WeatherSample(t, temp, humidity, condition))
    if not header_seen:
        raise MalformedRow(1, "missing header 'timestamp,temp_c,humidity_pct,condition'")
    samples.sort(key=lambda s: s.timestamp)
    return samples


# -- iCalendar subset ---------------------------------------------------------
# VEVENT with DTSTART/DTEND/SUMMARY/UID and RRULE FREQ=DAILY|WEEKLY bounded by
# COUNT, UNTIL, or the expansion horizon. Anything richer is rejected with a
# reason rather than silently dropped.

_ALLOWED_VEVENT_PROPS = {"DTSTART", "DTEND", "SUMMARY", "UID", "RRULE"}
_DT_RE = re.compile(r"^(\d{8})T(\d{6})(Z?)$")


def _unfold(text: str) -> list[str]:
    lines: list[str] = []
    for raw in text.splitlines():
        if raw[:1] in (" ", "\t") and lines:
            lines[-1] += raw[1:]
        else:
            lines.append(raw)
    return [ln for ln in lines if ln.strip()]


def _parse_ics_datetime(value: str, params: dict, default_zone: str, prop: str) -> datetime:
    for key in params:
        if key != "TZID":
            raise MalformedCalendar(f"{prop} parameter {key} is not supported")
    m = _DT_RE.match(value.strip())
    if not m:
        raise MalformedCalendar(f"{prop} value {value!r} is not a date-time "
                                "(date-only events are not supported)")
    ymd, hms, zulu = m.groups()
    try:
        naive = datetime.strptime(ymd + hms, "%Y%m%d%H%M%S")
    except ValueError:
        raise MalformedCalendar(f"{prop} value {value!r} is out of range")
    if zulu:
        if "TZID" in params:
            raise MalformedCalendar(f"{prop} cannot combine a Z suffix with TZID")
        return naive.replace(tzinfo=ZoneInfo("UTC"))
    try:
        return naive.replace(tzinfo=ZoneInfo(params.get("TZID", default_zone)))
    except Exception:
        raise MalformedCalendar(f"{prop} has unknown TZID {params.get('TZID')!r}")


def _unescape(text: str) -> str:
    return (text.replace("\\n", "\n").replace("\\N", "\n")
            .replace("\\,", ",").replace("\\;", ";").replace("\\\\", "\\"))


def _shift_wallclock(t: datetime, days: int) -> datetime:
    # keep the wall-clock time across DST when the zone is civil
    return (t.replace(tzinfo=None) + timedelta(days=days)).replace(tzinfo=t.tzinfo)


def _expand_rrule(rule: str, start: datetime, duration: timedelta,
                  uid: str, title: str, horizon: datetime) -> list[CalendarEvent]:
    freq = count = until = None
    for part in rule.split(";"):
        if not part:
            continue
        key, _, val = part.partition("=")
        key = key.upper()
        if key == "FREQ":
            if val.upper() not in ("DAILY", "WEEKLY"):
                raise MalformedCalendar(f"RRULE FREQ={val} is not supported")
            freq = val.upper()
        elif key == "COUNT":
            if not val.isdigit() or int(val) < 1:
                raise MalformedCalendar(f"RRULE COUNT={val!r} is not a positive integer")
            count = int(val)
        elif key == "UNTIL":
            until = _parse_ics_datetime(val, {}, "UTC", "RRULE UNTIL")
        else:
            raise MalformedCalendar(f"RRULE part {key} is not supported")
    if freq is None:
        raise MalformedCalendar("RRULE without FREQ")
    if count is not None and until is not None:
        raise MalformedCalendar("RRULE cannot combine COUNT and UNTIL")

    step_days = 1 if freq == "DAILY" else 7
    out = []
    k = 0
    while True:
        occ_start = _shift_wallclock(start, k * step_days)
        if count is not None and k >= count:
            break
        if until is not None and occ_start > until:
            break
        if occ_start >= horizon:
            break
        out.append(CalendarEvent(event_id=f"{uid}#{k}", title=title,
                                 start=occ_start, end=occ_start + duration))
        k += 1
    return out


def ingest_calendar(source, default_zone: str = "UTC",
                    horizon_days: int = 366) -> list[CalendarEvent]:
    """Parse an .ics file into events, expanding recurrences.

    Unbounded rules (and COUNT/UNTIL rules that outrun it) stop at
    DTSTART + horizon_days, so expansion is always finite and deterministic.
    """
    lines = _unfold(_as_text(source))
    if not lines:
        return []
    events: list[CalendarEvent] = []
    in_calendar = False
    props: Optional[dict] = None  # non-None while inside a VEVENT
    seq = 0

    for line in lines:
        name, _, value = line.partition(":")
        name, *param_parts = name.split(";")
        name = name.strip().upper()
        params = {}
        for p in param_parts:
            k, _, v = p.partition("=")
            params[k.strip().upper()] = v.strip()

        if name == "BEGIN":
            block = value.strip().upper()
            if block == "VCALENDAR":
                if in_calendar:
                    raise MalformedCalendar("nested VCALENDAR")
                in_calendar = True
            elif block == "VEVENT":
                if not in_calendar or props is not None:
                    raise MalformedCalendar("VEVENT outside VCALENDAR or nested")
                props = {}
            else:
                raise MalformedCalendar(f"{block} blocks are not supported")
        elif name == "END":
            block = value.strip().upper()
            if block == "VEVENT":
                if props is None:
                    raise MalformedCalendar("END:VEVENT without BEGIN")
                events.extend(_finish_vevent(props, default_zone, horizon_days, seq))
                seq += 1
                props = None
            elif block == "VCALENDAR":
                if props is not None:
                    raise MalformedCalendar("VCALENDAR ended inside a VEVENT")
                in_calendar = False
            else:
                raise MalformedCalendar(f"unexpected END:{block}")
        elif props is not None:
            if name not in _ALLOWED_VEVENT_PROPS:
                raise MalformedCalendar(f"VEVENT property {name} is not supported")
            if name in props:
                raise MalformedCalendar(f"duplicate {name} in VEVENT")
            props[name] = (value, params)
        # calendar-level lines (VERSION, PRODID, ...) carry no event data

    if props is not None or in_calendar:
        raise MalformedCalendar("unterminated block at end of file")
    events.sort(key=lambda e: e.start)
    return events


def _finish_vevent(props: dict, default_zone: str, horizon_days: int,
                   seq: int) -> list[CalendarEvent]:
    if "DTSTART" not in props:
        raise MalformedCalendar("VEVENT without DTSTART")
    start = _parse_ics_datetime(*props["DTSTART"], default_zone=default_zone, prop="DTSTART")
    if "DTEND" in props:
        end = _parse_ics_datetime(*props["DTEND"], default_zone=default_zone, prop="DTEND")
    else:
        end = start
    if end < start:
        raise MalformedCalendar("DTEND precedes DTSTART")
    title = _unescape(props["SUMMARY"][0]) if "SUMMARY" in props else "(untitled)"
    uid = props["UID"][0].strip() if "UID" in props else f"event-{seq}"
    horizon = _shift_wallclock(start, horizon_days)
    if "RRULE" in props:
        rule, params = props["RRULE"]
        if params:
            raise MalformedCalendar("RRULE parameters are not supported")
        return _expand_rrule(rule, start, end - start, uid, title, horizon)
    return [CalendarEvent(event_id=uid, title=title, start=start, end=end)]


# -- annotations --------------------------------------------------------------

class AnnotationStore:
    """Append-only annotation log with tombstone deletes.

    Single-writer: add/delete serialize on a lock; readers get snapshots.
    """

    def __init__(self, path=None):
        self._path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._items: dict[str, Annotation] = {}
        if self._path is not None and self._path.exists():
            self._replay()

    def _replay(self):
        for raw in self._path.read_text(encoding="utf-8").splitlines():
            if not raw.strip():
                continue
            doc = json.loads(raw)
            if doc.get("deleted"):
                self._items.pop(doc["id"], None)
            else:
                self._items[doc["id"]] = Annotation(
                    annotation_id=doc["id"],
                    at=datetime.fromisoformat(doc["at"].replace("Z", "+00:00")),
                    text=doc["text"],
                    created=datetime.fromisoformat(doc["created"].replace("Z", "+00:00")))

    def _append(self, doc: dict):
        if self._path is not None:
            with self._path.open("a", encoding="utf-8") as f:
                f.write(json.dumps(doc) + "\n")

    def add(self, at: datetime, text: str, created: Optional[datetime] = None) -> Annotation:
        if not text or not text.strip():
            raise EmptyText()
        if at.tzinfo is None:
            raise ContextError("annotation instant must be timezone-aware")
        created = created if created is not None else datetime.now(ZoneInfo("UTC"))
        note = Annotation(annotation_id=uuid.uuid4().hex[:12], at=at,
                          text=text, created=created)
        with self._lock:
            self._items[note.annotation_id] = note
            self._append({"id": note.annotation_id, "at": at.isoformat(),
                          "text": text, "created": created.isoformat()})
        return note

    def delete(self, annotation_id: str) -> None:
        with self._lock:
            if annotation_id not in self._items:
                raise UnknownAnnotation(annotation_id)
            del self._items[annotation_id]
            self._append({"id": annotation_id, "deleted": True})

    def list_window(self, window: TimeWindow) -> list[Annotation]:
        with self._lock:
            snapshot = list(self._items.values())
        return sorted((a for a in snapshot if window.start <= a.at < window.end),
                      key=lambda a: a.at)

    def all(self) -> list[Annotation]:
        with self._lock:
            return sorted(self._items.values(), key=lambda a: a.at)


# -- overlay ------------------------------------------------------------------

class Granularity(Enum):
    HOURLY = "hourly"
    DAILY = "daily"


@dataclass(frozen=True)
class WeatherCell:
    cell_start: datetime
    mean_temp: Optional[float]
    mean_humidity: Optional[float]
    dominant_condition: Optional[WeatherCondition]


@dataclass(frozen=True)
class ContextOverlay:
    window: TimeWindow
    granularity: Granularity
    weather_cells: list
    events: list
    annotations: list


def _event_overlaps(ev: CalendarEvent, window: TimeWindow) -> bool:
    if ev.start == ev.end:
        return window.start <= ev.start < window.end
    return ev.start < window.end and ev.end > window.start


def window_context(window: TimeWindow, weather: Iterable[WeatherSample],
                   events: Iterable[CalendarEvent] = (),
                   annotations: Iterable[Annotation] = (),
                   zoom_hint: int = 24) -> ContextOverlay:
    """Level-of-detail overlay for a window.

    Cells are hourly when the window divided by zoom_hint is an hour or
    finer, daily otherwise; they start at window.start and partition it
    exactly (the last cell may be partial). Events are kept on any overlap
    with the window, not only containment.
    """
    if zoom_hint < 1:
        raise ContextError(f"zoom_hint must be >= 1, got {zoom_hint}")
    hourly = window.duration_seconds / zoom_hint <= 3600
    span = timedelta(hours=1) if hourly else timedelta(days=1)

    samples = sorted(weather, key=lambda s: s.timestamp)
    cells = []
    cell_start = window.start
    i = 0
    while cell_start < window.end:
        cell_end = min(cell_start + span, window.end)
        j = i
        while j < len(samples) and samples[j].timestamp < cell_end:
            j += 1
        group = [s for s in samples[i:j] if s.timestamp >= cell_start]
        if group:
            tally = Counter(s.condition for s in group)
            top = max(tally.values())
            dominant = min((c for c, n in tally.items() if n == top),
                           key=_CONDITION_RANK.__getitem__)
            cells.append(WeatherCell(
                cell_start=cell_start,
                mean_temp=sum(s.temperature for s in group) / len(group),
                mean_humidity=sum(s.humidity for s in group) / len(group),
                dominant_condition=dominant))
        else:
            cells.append(WeatherCell(cell_start, None, None, None))
        i = j
        cell_start = cell_end

    return ContextOverlay(
        window=window,
        granularity=Granularity.HOURLY if hourly else Granularity.DAILY,
        weather_cells=cells,
        events=sorted((e for e in events if _event_overlaps(e, window)),
                      key=lambda e: e.start),
        annotations=sorted((a for a in annotations
                            if window.start <= a.at < window.end),
                           key=lambda a: a.at))
