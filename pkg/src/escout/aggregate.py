"""Quantized summary bars, comparative pairs, and the spiral heat-map grid."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from enum import Enum
from typing import Optional

import numpy as np

from .meter import CivilIndex, MeterSeries, TimeWindow
from .tariff import TariffPlan


class AggregationError(ValueError):
    """Invalid aggregation request."""


class QuantizationMismatch(AggregationError):
    """Compared specs must share one bin scheme."""


class UnsupportedPeriodCells(AggregationError):
    """Spiral (period, cells) combination outside the supported set."""


class DayKind(Enum):
    ALL = "all"
    WEEKDAYS = "weekdays"
    WEEKENDS = "weekends"


class Season(Enum):
    WINTER = "winter"
    SPRING = "spring"
    SUMMER = "summer"
    FALL = "fall"


class Segment(Enum):
    MORNING = "morning"
    AFTERNOON = "afternoon"
    EVENING = "evening"
    NIGHT = "night"


# meteorological seasons
_SEASON_MONTHS = {
    Season.WINTER: (12, 1, 2),
    Season.SPRING: (3, 4, 5),
    Season.SUMMER: (6, 7, 8),
    Season.FALL: (9, 10, 11),
}

# half-open seconds-of-day spans
_SEGMENT_BOUNDS = {
    Segment.MORNING: (21600, 43200),
    Segment.AFTERNOON: (43200, 64800),
    Segment.EVENING: (64800, 86400),
    Segment.NIGHT: (0, 21600),
}

_SEGMENT_ORDER = (Segment.MORNING, Segment.AFTERNOON, Segment.EVENING, Segment.NIGHT)

_SCHEME_CELLS = {
    "hour_of_day": (24, 12),
    "day_of_week": (7, 14),
    "month_of_year": (12,),
    "week_of_year": (52,),
    "day_segment": (4,),
}

_DAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
_MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
           "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")

# bins for instance-counting never exceed 52, so any key below this
# stride packs (bin, instance) into one int64
_INSTANCE_STRIDE = 10_000_000


@dataclass(frozen=True)
class BinScheme:
    """Cyclic quantization of civil time into a fixed number of bins."""

    kind: str
    cells: int

    def __post_init__(self):
        allowed = _SCHEME_CELLS.get(self.kind)
        if allowed is None:
            raise AggregationError(f"unknown bin scheme {self.kind!r}")
        if self.cells not in allowed:
            raise AggregationError(
                f"{self.kind} supports {' or '.join(map(str, allowed))} cells, got {self.cells}")

    @classmethod
    def parse(cls, kind: str, cells=None) -> "BinScheme":
        kind = str(kind).strip().lower()
        if kind not in _SCHEME_CELLS:
            raise AggregationError(f"unknown bin scheme {kind!r}")
        return cls(kind, _SCHEME_CELLS[kind][0] if cells in (None, "") else int(cells))

    def bin_indices(self, civ: CivilIndex, lo: int, hi: int) -> np.ndarray:
        """Bin index per reading, from the cached civil decomposition."""
        sod = civ.sod[lo:hi].astype(np.int64)
        if self.kind == "hour_of_day":
            return sod // (3600 if self.cells == 24 else 7200)
        if self.kind == "day_of_week":
            wd = civ.weekday[lo:hi].astype(np.int64)
            return wd if self.cells == 7 else wd * 2 + (sod >= 43200)
        if self.kind == "month_of_year":
            return civ.month[lo:hi].astype(np.int64) - 1
        if self.kind == "week_of_year":
            # ISO week 53 folds into the last bin
            return np.minimum(civ.isoweek[lo:hi].astype(np.int64), 52) - 1
        lut = np.array([3, 0, 1, 2], dtype=np.int64)  # six-hour blocks from midnight
        return lut[sod // 21600]

    def instance_keys(self, civ: CivilIndex, lo: int, hi: int) -> np.ndarray:
        """Key identifying the period instance a reading belongs to.

        Within one bin the key is unique per instance: a particular civil day
        for daily-cyclic schemes, a year for monthly bins, an ISO year for
        weekly bins. The mean denominator counts distinct keys per bin.
        """
        if self.kind == "month_of_year":
            return civ.year[lo:hi].astype(np.int64)
        if self.kind == "week_of_year":
            return civ.isoyear[lo:hi].astype(np.int64)
        return civ.date_key[lo:hi].astype(np.int64)

    def labels(self) -> list[str]:
        if self.kind == "hour_of_day":
            if self.cells == 24:
                return [f"{h:02d}" for h in range(24)]
            return [f"{2 * h:02d}-{2 * h + 2:02d}" for h in range(12)]
        if self.kind == "day_of_week":
            if self.cells == 7:
                return list(_DAYS)
            return [f"{d} {half}" for d in _DAYS for half in ("AM", "PM")]
        if self.kind == "month_of_year":
            return list(_MONTHS)
        if self.kind == "week_of_year":
            return [f"W{w:02d}" for w in range(1, 53)]
        return [s.value for s in _SEGMENT_ORDER]


@dataclass(frozen=True)
class AggFilter:
    """Restricts readings before binning; all conditions must hold."""

    day_kind: DayKind = DayKind.ALL
    season: Optional[Season] = None
    segment: Optional[Segment] = None

    def mask(self, civ: CivilIndex, lo: int, hi: int) -> np.ndarray:
        m = np.ones(hi - lo, dtype=bool)
        if self.day_kind is DayKind.WEEKDAYS:
            m &= civ.weekday[lo:hi] < 5
        elif self.day_kind is DayKind.WEEKENDS:
            m &= civ.weekday[lo:hi] >= 5
        if self.season is not None:
            m &= np.isin(civ.month[lo:hi], _SEASON_MONTHS[self.season])
        if self.segment is not None:
            s0, s1 = _SEGMENT_BOUNDS[self.segment]
            sod = civ.sod[lo:hi]
            m &= (sod >= s0) & (sod < s1)
        return m


@dataclass(frozen=True)
class BinSummary:
    bin_index: int
    mean_kwh: float
    peak_kwh: float
    offpeak_kwh: float
    sample_count: int
    coverage: float


@dataclass(frozen=True)
class AggregateSpec:
    window: TimeWindow
    scheme: BinScheme
    filter: AggFilter = field(default_factory=AggFilter)
    plan: Optional[TariffPlan] = None


@dataclass(frozen=True)
class ComparePair:
    main: list
    baseline: list


@dataclass(frozen=True)
class SpiralRing:
    start: datetime
    values: list  # kWh per cell, None where no readings map


@dataclass(frozen=True)
class SpiralGrid:
    period: "SpiralPeriod"
    cells_per_period: int
    rings: list


class SpiralPeriod(Enum):
    DAY = "day"
    WEEK = "week"
    YEAR = "year"


_SPIRAL_CELLS = {
    SpiralPeriod.DAY: (24,),
    SpiralPeriod.WEEK: (7, 14),
    SpiralPeriod.YEAR: (12, 52),
}


def _grid_range(gts: np.ndarray, window: TimeWindow) -> tuple[int, int]:
    # same rounding as MeterSeries.index_range, applied to the full grid
    start_us, end_us = window.epoch_us()
    lo = int(np.searchsorted(gts, math.ceil(start_us / 1_000_000), side="left"))
    hi = int(np.searchsorted(gts, math.ceil(end_us / 1_000_000), side="left"))
    return lo, hi


def aggregate(series: MeterSeries, spec: AggregateSpec) -> list[BinSummary]:
    """Filtered per-bin means with peak/off-peak split.

    Each bin's mean divides the binned energy by the number of period
    instances contributing at least one reading, so gaps shrink the
    denominator instead of diluting the mean; `coverage` reports how much of
    the bin's expected grid is actually present.
    """
    scheme, filt = spec.scheme, spec.filter
    if filt.segment is not None and scheme.kind in ("hour_of_day", "day_segment"):
        warnings.warn(
            f"segment filter {filt.segment.value!r} leaves some {scheme.kind} "
            f"bins structurally empty", stacklevel=2)
    lo, hi = series.index_range(spec.window)
    civ = series.civil()
    sel = filt.mask(civ, lo, hi)
    bins = scheme.bin_indices(civ, lo, hi)
    kwh = series.energies[lo:hi]
    if spec.plan is not None:
        pmask, _ = spec.plan.classification_arrays(civ.weekday[lo:hi], civ.sod[lo:hi])
    else:
        pmask = np.zeros(hi - lo, dtype=bool)

    cells = scheme.cells
    bsel = bins[sel]
    counts = np.bincount(bsel, minlength=cells)
    peak_sum = np.bincount(bsel, weights=np.where(pmask, kwh, 0.0)[sel], minlength=cells)
    off_sum = np.bincount(bsel, weights=np.where(pmask, 0.0, kwh)[sel], minlength=cells)

    inst = scheme.instance_keys(civ, lo, hi)
    combos = np.unique(bsel * _INSTANCE_STRIDE + inst[sel])
    if len(combos):
        n_inst = np.bincount(combos // _INSTANCE_STRIDE, minlength=cells)
    else:
        n_inst = np.zeros(cells, dtype=np.int64)

    gts, _, _, gciv = series.grid()
    g_lo, g_hi = _grid_range(gts, spec.window)
    gsel = filt.mask(gciv, g_lo, g_hi)
    expected = np.bincount(scheme.bin_indices(gciv, g_lo, g_hi)[gsel], minlength=cells)

    out = []
    for b in range(cells):
        n = int(n_inst[b])
        if n == 0:
            out.append(BinSummary(b, 0.0, 0.0, 0.0, 0, 0.0))
            continue
        p = float(peak_sum[b]) / n
        o = float(off_sum[b]) / n
        cov = float(counts[b]) / float(expected[b]) if expected[b] else 0.0
        out.append(BinSummary(bin_index=b, mean_kwh=p + o, peak_kwh=p, offpeak_kwh=o,
                              sample_count=int(counts[b]), coverage=cov))
    return out


def compare(main: AggregateSpec, baseline: AggregateSpec,
            series: MeterSeries) -> ComparePair:
    """Two aligned summaries; pairing is positional, never merged."""
    if main.scheme != baseline.scheme:
        raise QuantizationMismatch(
            f"main {main.scheme.kind}({main.scheme.cells}) vs "
            f"baseline {baseline.scheme.kind}({baseline.scheme.cells})")
    return ComparePair(main=aggregate(series, main), baseline=aggregate(series, baseline))


def _midnight(d: date, tz) -> datetime:
    return datetime(d.year, d.month, d.day, tzinfo=tz)


def _iso_year_start(iso_year: int) -> date:
    jan4 = date(iso_year, 1, 4)
    return jan4 - timedelta(days=jan4.weekday())


def spiral(series: MeterSeries, window: TimeWindow, period,
           cells_per_period: int) -> SpiralGrid:
    """Ring-per-period grid; cell value is that instance's energy for the cell.

    Rings run oldest innermost over every period instance the window touches;
    cells with no readings (gaps, or parts of partially covered edge rings)
    are None. Averaging a cell across rings reproduces the matching aggregate
    bin, since both sides count instances with at least one reading.
    """
    period = period if isinstance(period, SpiralPeriod) else SpiralPeriod(str(period).lower())
    if cells_per_period not in _SPIRAL_CELLS[period]:
        raise UnsupportedPeriodCells(
            f"{period.value} period supports {_SPIRAL_CELLS[period]} cells, "
            f"got {cells_per_period}")

    tz = series.tz
    lo, hi = series.index_range(window)
    civ = series.civil()
    kwh = series.energies[lo:hi]
    sod = civ.sod[lo:hi].astype(np.int64)
    d0 = window.start.astimezone(tz).date()
    d1 = (window.end - timedelta(microseconds=1)).astimezone(tz).date()
    cells = cells_per_period

    if period is SpiralPeriod.DAY:
        ring0 = d0.toordinal()
        n_rings = d1.toordinal() - ring0 + 1
        ring_idx = civ.date_key[lo:hi] - ring0
        cell_idx = sod // 3600
        ring_starts = [_midnight(date.fromordinal(ring0 + k), tz) for k in range(n_rings)]
    elif period is SpiralPeriod.WEEK:
        monday0 = d0.toordinal() - d0.weekday()
        n_rings = (d1.toordinal() - d1.weekday() - monday0) // 7 + 1
        ring_idx = (civ.date_key[lo:hi] - civ.weekday[lo:hi] - monday0) // 7
        wd = civ.weekday[lo:hi].astype(np.int64)
        cell_idx = wd if cells == 7 else wd * 2 + (sod >= 43200)
        ring_starts = [_midnight(date.fromordinal(monday0 + 7 * k), tz) for k in range(n_rings)]
    elif cells == 12:
        y0 = d0.year
        n_rings = d1.year - y0 + 1
        ring_idx = civ.year[lo:hi].astype(np.int64) - y0
        cell_idx = civ.month[lo:hi].astype(np.int64) - 1
        ring_starts = [_midnight(date(y0 + k, 1, 1), tz) for k in range(n_rings)]
    else:
        iy0 = d0.isocalendar()[0]
        n_rings = d1.isocalendar()[0] - iy0 + 1
        ring_idx = civ.isoyear[lo:hi].astype(np.int64) - iy0
        cell_idx = np.minimum(civ.isoweek[lo:hi].astype(np.int64), 52) - 1
        ring_starts = [_midnight(_iso_year_start(iy0 + k), tz) for k in range(n_rings)]

    flat = ring_idx.astype(np.int64) * cells + cell_idx
    size = n_rings * cells
    sums = np.bincount(flat, weights=kwh, minlength=size)
    counts = np.bincount(flat, minlength=size)

    rings = []
    for k in range(n_rings):
        base = k * cells
        vals = [float(sums[base + c]) if counts[base + c] else None for c in range(cells)]
        rings.append(SpiralRing(start=ring_starts[k], values=vals))
    return SpiralGrid(period=period, cells_per_period=cells, rings=rings)
