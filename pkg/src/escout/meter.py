"""Smart-meter series storage, validation, window queries, and downsampling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import TYPE_CHECKING, Iterator, Optional
from zoneinfo import ZoneInfo

import numpy as np

if TYPE_CHECKING:
    from .tariff import TariffPlan

MIN_INTERVAL_S = 60
MAX_INTERVAL_S = 3600


class MeterError(ValueError):
    """Base class for meter data errors."""


class MalformedRow(MeterError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class NegativeEnergy(MeterError):
    def __init__(self, line_no: int, value: float):
        self.line_no = line_no
        super().__init__(f"line {line_no}: negative energy {value}")


class DuplicateTimestamp(MeterError):
    def __init__(self, instant: datetime):
        self.instant = instant
        super().__init__(f"duplicate timestamp {instant.isoformat()}")


class OffGridTimestamp(MeterError):
    def __init__(self, instant: datetime):
        self.instant = instant
        super().__init__(f"timestamp {instant.isoformat()} not on the interval grid")


class InvalidMaxPoints(MeterError):
    def __init__(self, value: int):
        super().__init__(f"max_points must be >= 2, got {value}")


@dataclass(frozen=True)
class Reading:
    """One meter interval: energy in kWh consumed starting at `timestamp`."""

    timestamp: datetime
    energy: float


@dataclass(frozen=True)
class TimeWindow:
    """Half-open instant range [start, end)."""

    start: datetime
    end: datetime

    def __post_init__(self):
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise ValueError("window bounds must be timezone-aware")
        if not self.start < self.end:
            raise ValueError("window start must precede end")

    @property
    def duration_seconds(self) -> float:
        return (self.end - self.start).total_seconds()

    def epoch_us(self) -> tuple[int, int]:
        return _epoch_us(self.start), _epoch_us(self.end)


def _epoch_us(t: datetime) -> int:
    ts = t.timestamp()
    return round(ts * 1_000_000)


@dataclass(frozen=True)
class CivilIndex:
    """Per-reading civil-time decomposition in the household zone.

    Two distinct instants around a DST fall-back share their civil label;
    that is intentional (labels describe wall-clock time).
    """

    weekday: np.ndarray   # Mon=0 .. Sun=6
    sod: np.ndarray       # seconds past local midnight
    month: np.ndarray     # 1..12
    year: np.ndarray
    date_key: np.ndarray  # local date as proleptic ordinal
    isoyear: np.ndarray
    isoweek: np.ndarray   # 1..53


def _civil_decompose(epoch_s: np.ndarray, tz: ZoneInfo) -> CivilIndex:
    n = len(epoch_s)
    weekday = np.empty(n, dtype=np.int16)
    sod = np.empty(n, dtype=np.int32)
    month = np.empty(n, dtype=np.int16)
    year = np.empty(n, dtype=np.int32)
    date_key = np.empty(n, dtype=np.int64)
    isoyear = np.empty(n, dtype=np.int32)
    isoweek = np.empty(n, dtype=np.int16)
    for i, s in enumerate(epoch_s.tolist()):
        d = datetime.fromtimestamp(s, tz)
        weekday[i] = d.weekday()
        sod[i] = d.hour * 3600 + d.minute * 60 + d.second
        month[i] = d.month
        year[i] = d.year
        date_key[i] = d.toordinal()
        iy, iw, _ = d.isocalendar()
        isoyear[i] = iy
        isoweek[i] = iw
    return CivilIndex(weekday, sod, month, year, date_key, isoyear, isoweek)


class MeterSeries:
    """Immutable, ordered fixed-interval energy series for one household.

    Readings sit on a grid anchored at the first reading; gaps are allowed,
    preserved, and exposed (never interpolated). Instances are safe to share
    across concurrent readers; replacement means installing a new instance.
    """

    def __init__(self, household_id: str, interval: int, timezone: str,
                 epoch_s: np.ndarray, kwh: np.ndarray):
        if not MIN_INTERVAL_S <= interval <= MAX_INTERVAL_S:
            raise MeterError(f"interval {interval}s outside {MIN_INTERVAL_S}..{MAX_INTERVAL_S}")
        self.household_id = household_id
        self.interval = int(interval)
        self.timezone = timezone
        self.tz = ZoneInfo(timezone)
        self._ts = np.asarray(epoch_s, dtype=np.int64)
        self._kwh = np.asarray(kwh, dtype=np.float64)
        self._civil: Optional[CivilIndex] = None
        self._grid: Optional[tuple[np.ndarray, np.ndarray, np.ndarray, CivilIndex]] = None

    def __len__(self) -> int:
        return len(self._ts)

    @property
    def epoch_seconds(self) -> np.ndarray:
        return self._ts

    @property
    def energies(self) -> np.ndarray:
        return self._kwh

    def timestamp_at(self, i: int) -> datetime:
        return datetime.fromtimestamp(int(self._ts[i]), self.tz)

    def readings(self) -> Iterator[Reading]:
        for s, e in zip(self._ts.tolist(), self._kwh.tolist()):
            yield Reading(datetime.fromtimestamp(s, self.tz), e)

    @property
    def extent(self) -> Optional[TimeWindow]:
        """Window covering all recorded intervals, or None when empty."""
        if len(self._ts) == 0:
            return None
        return TimeWindow(self.timestamp_at(0),
                          datetime.fromtimestamp(int(self._ts[-1]) + self.interval, self.tz))

    def index_range(self, window: TimeWindow) -> tuple[int, int]:
        """Indices [lo, hi) of readings whose interval start lies in the window."""
        start_us, end_us = window.epoch_us()
        lo = int(np.searchsorted(self._ts, math.ceil(start_us / 1_000_000), side="left"))
        hi = int(np.searchsorted(self._ts, math.ceil(end_us / 1_000_000), side="left"))
        return lo, hi

    def slice(self, window: TimeWindow) -> list[Reading]:
        """Readings with window.start <= timestamp < window.end, in order."""
        lo, hi = self.index_range(window)
        return [Reading(datetime.fromtimestamp(s, self.tz), e)
                for s, e in zip(self._ts[lo:hi].tolist(), self._kwh[lo:hi].tolist())]

    def window_total(self, window: TimeWindow) -> float:
        lo, hi = self.index_range(window)
        return float(np.sum(self._kwh[lo:hi]))

    def coverage(self, window: TimeWindow) -> float:
        """Fraction of the window covered by present readings, in [0, 1]."""
        lo, hi = self.index_range(window)
        dur = window.duration_seconds
        if dur <= 0:
            return 0.0
        return min(1.0, (hi - lo) * self.interval / dur)

    def gaps(self) -> list[TimeWindow]:
        """Missing spans between recorded readings."""
        out = []
        deltas = np.diff(self._ts)
        for i in np.nonzero(deltas > self.interval)[0].tolist():
            gap_start = int(self._ts[i]) + self.interval
            gap_end = int(self._ts[i + 1])
            out.append(TimeWindow(datetime.fromtimestamp(gap_start, self.tz),
                                  datetime.fromtimestamp(gap_end, self.tz)))
        return out

    def civil(self) -> CivilIndex:
        """Civil decomposition of present readings (cached)."""
        if self._civil is None:
            self._civil = _civil_decompose(self._ts, self.tz)
        return self._civil

    def grid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, CivilIndex]:
        """Full interval grid over the recorded extent (cached).

        Returns (grid_epoch_s, present_mask, grid_kwh, grid_civil); grid_kwh
        is zero at missing slots. Empty series yields empty arrays.
        """
        if self._grid is None:
            if len(self._ts) == 0:
                empty = np.empty(0, dtype=np.int64)
                self._grid = (empty, np.empty(0, dtype=bool),
                              np.empty(0, dtype=np.float64), _civil_decompose(empty, self.tz))
            else:
                first, last = int(self._ts[0]), int(self._ts[-1])
                gts = np.arange(first, last + self.interval, self.interval, dtype=np.int64)
                present = np.zeros(len(gts), dtype=bool)
                slots = (self._ts - first) // self.interval
                present[slots] = True
                gkwh = np.zeros(len(gts), dtype=np.float64)
                gkwh[slots] = self._kwh
                self._grid = (gts, present, gkwh, _civil_decompose(gts, self.tz))
        return self._grid


def _parse_timestamp(raw: str, tz: ZoneInfo, line_no: int) -> datetime:
    raw = raw.strip()
    try:
        t = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise MalformedRow(line_no, f"unparseable timestamp {raw!r}")
    if t.tzinfo is None:
        # local civil form (YYYY-MM-DDTHH:MM[:SS]); ambiguous DST stamps take
        # the earlier instant
        t = t.replace(tzinfo=tz)
    if t.microsecond:
        raise MalformedRow(line_no, "sub-second timestamps are not supported")
    return t


def ingest_csv(source, interval: int, timezone: str,
               household_id: str = "household") -> MeterSeries:
    """Parse and validate a meter CSV (header ``timestamp,kwh``).

    Accepts a byte or text stream, bytes, or str. Rows may arrive out of
    order; duplicate or off-grid timestamps and negative energies are
    rejected. ``#`` lines are comments.
    """
    if not MIN_INTERVAL_S <= interval <= MAX_INTERVAL_S:
        raise MeterError(f"interval {interval}s outside {MIN_INTERVAL_S}..{MAX_INTERVAL_S}")
    tz = ZoneInfo(timezone)
    text = _as_text(source)

    rows: list[tuple[int, float, int]] = []  # (epoch_s, kwh, line_no)
    header_seen = False
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not header_seen:
            cols = [c.strip().lower() for c in stripped.split(",")]
            if cols[:2] != ["timestamp", "kwh"]:
                raise MalformedRow(line_no, "expected header 'timestamp,kwh'")
            header_seen = True
            continue
        parts = next(csv.reader([stripped]))
        if len(parts) != 2:
            raise MalformedRow(line_no, f"expected 2 fields, got {len(parts)}")
        t = _parse_timestamp(parts[0], tz, line_no)
        try:
            kwh = float(parts[1])
        except ValueError:
            raise MalformedRow(line_no, f"unparseable kwh {parts[1]!r}")
        if not math.isfinite(kwh):
            raise MalformedRow(line_no, f"non-finite kwh {parts[1]!r}")
        if kwh < 0:
            raise NegativeEnergy(line_no, kwh)
        rows.append((int(t.timestamp()), kwh, line_no))

    if not header_seen:
        raise MalformedRow(1, "missing header 'timestamp,kwh'")

    rows.sort(key=lambda r: r[0])
    for (s1, _, _), (s2, _, _) in zip(rows, rows[1:]):
        if s1 == s2:
            raise DuplicateTimestamp(datetime.fromtimestamp(s1, tz))
    if rows:
        anchor = rows[0][0]
        for s, _, _ in rows:
            if (s - anchor) % interval != 0:
                raise OffGridTimestamp(datetime.fromtimestamp(s, tz))

    ts = np.array([r[0] for r in rows], dtype=np.int64)
    kwh = np.array([r[1] for r in rows], dtype=np.float64)
    return MeterSeries(household_id, interval, timezone, ts, kwh)


def _as_text(source) -> str:
    if isinstance(source, str):
        return source
    if isinstance(source, bytes):
        return source.decode("utf-8")
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


@dataclass(frozen=True)
class FocusBucket:
    bucket_start: datetime
    sum_kwh: float
    count: int
    peak_kwh: float
    offpeak_kwh: float
    sum_usd: Optional[float] = None
    peak_usd: Optional[float] = None
    offpeak_usd: Optional[float] = None


@dataclass(frozen=True)
class FocusMap:
    """Downsampled view: bucket values are sums of the raw readings they cover.

    Peaks can visually attenuate at coarse zoom; zooming in recovers the
    accurate values (each bucket conserves its exact raw total).
    """

    window: TimeWindow
    bucket_span: float  # seconds
    buckets: list[FocusBucket] = field(default_factory=list)

    @property
    def total_kwh(self) -> float:
        return float(sum(b.sum_kwh for b in self.buckets))


def downsample(series: MeterSeries, window: TimeWindow, max_points: int,
               plan: Optional["TariffPlan"] = None) -> FocusMap:
    """Bucket the window into <= max_points equal spans and sum raw readings.

    When the window holds no more than max_points raw readings, each reading
    becomes its own bucket (full resolution). With a plan, every bucket also
    carries the peak/off-peak split and dollar sub-sums.
    """
    if max_points < 2:
        raise InvalidMaxPoints(max_points)
    lo, hi = series.index_range(window)
    n_raw = hi - lo
    ts = series._ts[lo:hi]
    kwh = series._kwh[lo:hi]

    if plan is not None:
        civ = series.civil()
        peak_mask, rates = plan.classification_arrays(civ.weekday[lo:hi], civ.sod[lo:hi])
        usd = kwh * rates
    else:
        peak_mask = np.zeros(n_raw, dtype=bool)
        usd = None

    start_us, end_us = window.epoch_us()
    if n_raw <= max_points:
        # full resolution: one bucket per present reading
        span_us = series.interval * 1_000_000
        n_buckets = n_raw
        idx = np.arange(n_raw)
        bucket_starts = [datetime.fromtimestamp(int(s), series.tz) for s in ts]
    else:
        span_us = -((start_us - end_us) // max_points)  # ceil
        n_buckets = -((start_us - end_us) // span_us)   # ceil, <= max_points
        idx = (ts * 1_000_000 - start_us) // span_us
        bucket_starts = [(window.start + timedelta(microseconds=k * span_us)).astimezone(series.tz)
                         for k in range(n_buckets)]

    counts = np.bincount(idx, minlength=n_buckets)
    peak = np.bincount(idx, weights=np.where(peak_mask, kwh, 0.0), minlength=n_buckets)
    off = np.bincount(idx, weights=np.where(peak_mask, 0.0, kwh), minlength=n_buckets)
    if usd is not None:
        peak_usd = np.bincount(idx, weights=np.where(peak_mask, usd, 0.0), minlength=n_buckets)
        off_usd = np.bincount(idx, weights=np.where(peak_mask, 0.0, usd), minlength=n_buckets)

    buckets = []
    for k in range(n_buckets):
        p, o = float(peak[k]), float(off[k])
        kw = dict(bucket_start=bucket_starts[k], sum_kwh=p + o, count=int(counts[k]),
                  peak_kwh=p, offpeak_kwh=o)
        if usd is not None:
            pu, ou = float(peak_usd[k]), float(off_usd[k])
            kw.update(sum_usd=pu + ou, peak_usd=pu, offpeak_usd=ou)
        buckets.append(FocusBucket(**kw))

    return FocusMap(window=window, bucket_span=span_us / 1_000_000, buckets=buckets)
