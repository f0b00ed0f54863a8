from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from escout.meter import MeterSeries, TimeWindow
from escout.tariff import plan_from_dict

UTC = timezone.utc

# Monday, so day-of-week fixtures line up without offset bookkeeping
T0 = datetime(2010, 1, 4, tzinfo=UTC)


def make_series(start, n, interval=900, tz="UTC", energies=None, drop=(),
                household_id="household"):
    """Series straight from arrays; energies default to 0.1 kWh each."""
    ts = np.arange(n, dtype=np.int64) * interval + int(start.timestamp())
    kwh = np.full(n, 0.1) if energies is None else np.asarray(energies, dtype=float)
    if len(drop):
        keep = np.ones(n, dtype=bool)
        keep[np.asarray(drop)] = False
        ts, kwh = ts[keep], kwh[keep]
    return MeterSeries(household_id, interval, tz, ts, kwh)


def dyadic_energies(n, rng):
    """Multiples of 1/1024: any float summation order is exact, so 'exact'
    equality checks cannot hinge on accumulation order."""
    return rng.integers(0, 2048, n) / 1024.0


def span_window(start, **kw) -> TimeWindow:
    return TimeWindow(start, start + timedelta(**kw))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260817)


@pytest.fixture(scope="session")
def series_90d(rng):
    """90 days of 15-min dyadic readings with a scattering of gaps and one
    missing full day (Jan 20)."""
    n = 90 * 96
    drop = set(rng.choice(n, size=n // 25, replace=False).tolist())
    day_off = (datetime(2010, 1, 20, tzinfo=UTC) - T0) // timedelta(seconds=900)
    drop.update(range(day_off, day_off + 96))
    drop.discard(0)
    drop.discard(n - 1)  # keep the extent anchored
    return make_series(T0, n, energies=dyadic_energies(n, rng), drop=sorted(drop))


@pytest.fixture(scope="session")
def window_90d():
    return span_window(T0, days=90)


@pytest.fixture(scope="session")
def series_1y(rng):
    n = 365 * 96
    return make_series(T0, n, energies=dyadic_energies(n, rng))


@pytest.fixture()
def tou_plan():
    """Weekday-afternoon peak at $0.30, everything else (weekends included)
    off-peak at $0.10."""
    return plan_from_dict({
        "plan_id": "tou-basic",
        "name": "weekday afternoon peak",
        "offpeak_rate": 0.10,
        "periods": [{"days": ["MON", "TUE", "WED", "THU", "FRI"],
                     "start": "12:00", "end": "18:00", "rate": 0.30}],
    })


def random_plan(rng, plan_id="rand"):
    """Random non-overlapping plan with dyadic rates."""
    n_periods = int(rng.integers(0, 4))
    cuts = sorted(rng.choice(24, size=2 * n_periods, replace=False).tolist()) \
        if n_periods else []
    periods = []
    for i in range(n_periods):
        day_count = int(rng.integers(1, 8))
        days = rng.choice(7, size=day_count, replace=False).tolist()
        periods.append({
            "days": [("MON", "TUE", "WED", "THU", "FRI", "SAT", "SUN")[d] for d in days],
            "start": f"{cuts[2 * i]:02d}:00",
            "end": f"{cuts[2 * i + 1]:02d}:00",
            "rate": {"n": int(rng.integers(0, 1024))},
        })
    doc = {"plan_id": plan_id, "name": plan_id,
           "offpeak_rate": {"n": int(rng.integers(0, 1024))}, "periods": periods}

    # encode dyadic rates exactly
    from fractions import Fraction
    doc["offpeak_rate"] = Fraction(doc["offpeak_rate"]["n"], 1024)
    for p in doc["periods"]:
        p["rate"] = Fraction(p["rate"]["n"], 1024)
    return plan_from_dict(doc)
