"""Time-of-use rate plans: peak/off-peak classification and dollar costing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from fractions import Fraction
from math import fsum
from zoneinfo import ZoneInfo

import numpy as np

from .meter import MeterSeries, Reading, TimeWindow

DAY_NAMES = ("MON", "TUE", "WED", "THU", "FRI", "SAT", "SUN")
_DAY_INDEX = {name: i for i, name in enumerate(DAY_NAMES)}


class TariffError(ValueError):
    """Invalid plan definition or plan file."""


class PeakLabel(Enum):
    PEAK = "peak"
    OFFPEAK = "offpeak"


def day_index(name: str) -> int:
    try:
        return _DAY_INDEX[name.strip().upper()[:3]]
    except KeyError:
        raise TariffError(f"unknown day-of-week {name!r}")


def parse_time_of_day(text: str) -> int:
    """'HH:MM' or 'HH:MM:SS' to seconds past midnight. '24:00' marks end of day."""
    parts = text.strip().split(":")
    if len(parts) not in (2, 3) or not all(p.isdigit() for p in parts):
        raise TariffError(f"bad time-of-day {text!r}")
    h, m = int(parts[0]), int(parts[1])
    s = int(parts[2]) if len(parts) == 3 else 0
    total = h * 3600 + m * 60 + s
    if total > 86400 or m > 59 or s > 59:
        raise TariffError(f"bad time-of-day {text!r}")
    return total


def _fmt_tod(seconds: int) -> str:
    return f"{seconds // 3600:02d}:{seconds % 3600 // 60:02d}"


@dataclass(frozen=True)
class TariffPeriod:
    """A peak span: applies on `days`, half-open [start_s, end_s) civil seconds."""

    days: frozenset
    start_s: int
    end_s: int
    rate: Fraction

    def __post_init__(self):
        if not self.days:
            raise TariffError("period needs at least one day")
        if not 0 <= self.start_s < self.end_s <= 86400:
            raise TariffError("period start must precede end within one day "
                              "(split overnight peaks into two periods)")
        if self.rate < 0:
            raise TariffError("negative rate")


@dataclass(frozen=True)
class TariffPlan:
    """Peak periods over a weekly cycle; everything else is off-peak.

    A flat plan is the degenerate case with zero periods. Seasonal variants
    are separate plans chosen per query, not encoded here.
    """

    plan_id: str
    name: str
    offpeak_rate: Fraction
    periods: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.offpeak_rate < 0:
            raise TariffError("negative off-peak rate")
        for day in range(7):
            spans = sorted((p.start_s, p.end_s) for p in self.periods if day in p.days)
            for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
                if s2 < e1:
                    raise TariffError(
                        f"overlapping periods on {DAY_NAMES[day]}: "
                        f"{_fmt_tod(s1)}-{_fmt_tod(e1)} and {_fmt_tod(s2)}-{_fmt_tod(e2)}")

    def classify_parts(self, weekday: int, sod: int) -> tuple[PeakLabel, Fraction]:
        """Classification from civil parts; rate returned exact."""
        for p in self.periods:
            if weekday in p.days and p.start_s <= sod < p.end_s:
                return PeakLabel.PEAK, p.rate
        return PeakLabel.OFFPEAK, self.offpeak_rate

    def classification_arrays(self, weekday: np.ndarray, sod: np.ndarray):
        """Vectorized classification: (peak mask, float $/kWh rates)."""
        mask = np.zeros(len(weekday), dtype=bool)
        rates = np.full(len(weekday), float(self.offpeak_rate))
        for p in self.periods:
            m = np.isin(weekday, list(p.days)) & (sod >= p.start_s) & (sod < p.end_s)
            mask |= m
            rates[m] = float(p.rate)
        return mask, rates


def classify(plan: TariffPlan, t: datetime, zone: str) -> tuple[PeakLabel, float]:
    """Label an instant by its civil day/time in `zone`; total and deterministic."""
    local = t.astimezone(ZoneInfo(zone))
    label, rate = plan.classify_parts(local.weekday(),
                                      local.hour * 3600 + local.minute * 60 + local.second)
    return label, float(rate)


def label_slice(plan: TariffPlan, readings: list[Reading], zone: str) -> list[tuple[Reading, PeakLabel]]:
    return [(r, classify(plan, r.timestamp, zone)[0]) for r in readings]


@dataclass(frozen=True)
class CostSummary:
    total_usd: float
    peak_usd: float
    offpeak_usd: float
    peak_kwh: float
    offpeak_kwh: float


def cost(plan: TariffPlan, series: MeterSeries, window: TimeWindow) -> CostSummary:
    """Per-reading costing over a window.

    The peak/off-peak figures partition the totals exactly: sub-sums are
    order-independent (fsum) and the totals are defined as their sum.
    """
    lo, hi = series.index_range(window)
    kwh = series.energies[lo:hi]
    civ = series.civil()
    mask, rates = plan.classification_arrays(civ.weekday[lo:hi], civ.sod[lo:hi])
    usd = kwh * rates
    peak_kwh = fsum(kwh[mask].tolist())
    offpeak_kwh = fsum(kwh[~mask].tolist())
    peak_usd = fsum(usd[mask].tolist())
    offpeak_usd = fsum(usd[~mask].tolist())
    return CostSummary(total_usd=peak_usd + offpeak_usd,
                       peak_usd=peak_usd, offpeak_usd=offpeak_usd,
                       peak_kwh=peak_kwh, offpeak_kwh=offpeak_kwh)


def plan_from_dict(doc: dict) -> TariffPlan:
    try:
        periods = tuple(
            TariffPeriod(days=frozenset(day_index(d) for d in p["days"]),
                         start_s=parse_time_of_day(p["start"]),
                         end_s=parse_time_of_day(p["end"]),
                         rate=_as_rate(p["rate"]))
            for p in doc.get("periods", ()))
        return TariffPlan(plan_id=str(doc["plan_id"]), name=str(doc.get("name", doc["plan_id"])),
                          offpeak_rate=_as_rate(doc["offpeak_rate"]), periods=periods)
    except KeyError as e:
        raise TariffError(f"tariff document missing field {e.args[0]!r}")


def decimal_fraction(v) -> Fraction:
    """Exact decimal meaning of a number: 0.3 becomes 3/10, not the nearest
    binary float. str(float) is the shortest round-tripping decimal."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(str(v))
    return Fraction(v)


_as_rate = decimal_fraction


def load_plan(source) -> TariffPlan:
    """Read a tariff JSON document from a path, stream, or str."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        try:
            with open(source, "r", encoding="utf-8") as f:
                text = f.read()
        except (OSError, ValueError):
            text = source
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return plan_from_dict(json.loads(text, parse_float=Fraction))


def flat_plan(rate=0, plan_id: str = "flat") -> TariffPlan:
    return TariffPlan(plan_id=plan_id, name=plan_id, offpeak_rate=_as_rate(rate))
