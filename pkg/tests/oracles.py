"""Independent reference implementations the engine is checked against.

Everything here is a deliberately naive single pass over raw readings with
datetime arithmetic: no numpy, no shared engine code. Where a contract fixes
a formula (mean = peak part + off-peak part, cost steps laid from each
operation-span start), the oracle implements the same contract from scratch.
"""

from __future__ import annotations

from datetime import datetime, timedelta
from fractions import Fraction
from zoneinfo import ZoneInfo

SEASON_MONTHS = {
    "winter": (12, 1, 2),
    "spring": (3, 4, 5),
    "summer": (6, 7, 8),
    "fall": (9, 10, 11),
}

SEGMENT_HOURS = {
    "morning": range(6, 12),
    "afternoon": range(12, 18),
    "evening": range(18, 24),
    "night": range(0, 6),
}


def classify_local(plan, local: datetime):
    """(is_peak, exact rate) by scanning the plan's period table directly."""
    wd = local.weekday()
    sod = local.hour * 3600 + local.minute * 60 + local.second
    for p in plan.periods:
        if wd in p.days and p.start_s <= sod < p.end_s:
            return True, p.rate
    return False, plan.offpeak_rate


def passes_filter(local: datetime, day_kind="all", season=None, segment=None) -> bool:
    if day_kind == "weekdays" and local.weekday() >= 5:
        return False
    if day_kind == "weekends" and local.weekday() < 5:
        return False
    if season is not None and local.month not in SEASON_MONTHS[season]:
        return False
    if segment is not None and local.hour not in SEGMENT_HOURS[segment]:
        return False
    return True


def bin_of(local: datetime, kind: str, cells: int) -> int:
    if kind == "hour_of_day":
        return local.hour if cells == 24 else local.hour // 2
    if kind == "day_of_week":
        if cells == 7:
            return local.weekday()
        return local.weekday() * 2 + (1 if local.hour >= 12 else 0)
    if kind == "month_of_year":
        return local.month - 1
    if kind == "week_of_year":
        return min(local.isocalendar()[1], 52) - 1
    if kind == "day_segment":
        for i, name in enumerate(("morning", "afternoon", "evening", "night")):
            if local.hour in SEGMENT_HOURS[name]:
                return i
        raise AssertionError
    raise AssertionError(kind)


def instance_of(local: datetime, kind: str):
    if kind == "month_of_year":
        return local.year
    if kind == "week_of_year":
        return local.isocalendar()[0]
    return local.date()


def aggregate_oracle(reading_locals, grid_locals, kind, cells,
                     day_kind="all", season=None, segment=None, plan=None):
    """Brute-force regrouping.

    reading_locals: [(local datetime, kwh)] for readings inside the window;
    grid_locals: [local datetime] for every grid slot inside window∩extent.
    Returns per-bin dicts matching BinSummary fields.
    """
    peak = [0.0] * cells
    off = [0.0] * cells
    count = [0] * cells
    instances = [set() for _ in range(cells)]
    for local, kwh in reading_locals:
        if not passes_filter(local, day_kind, season, segment):
            continue
        b = bin_of(local, kind, cells)
        if plan is not None and classify_local(plan, local)[0]:
            peak[b] += kwh
        else:
            off[b] += kwh
        count[b] += 1
        instances[b].add(instance_of(local, kind))
    expected = [0] * cells
    for local in grid_locals:
        if passes_filter(local, day_kind, season, segment):
            expected[bin_of(local, kind, cells)] += 1
    out = []
    for b in range(cells):
        n = len(instances[b])
        if n == 0:
            out.append(dict(bin_index=b, mean_kwh=0.0, peak_kwh=0.0,
                            offpeak_kwh=0.0, sample_count=0, coverage=0.0))
            continue
        p = peak[b] / n
        o = off[b] / n
        cov = count[b] / expected[b] if expected[b] else 0.0
        out.append(dict(bin_index=b, mean_kwh=p + o, peak_kwh=p, offpeak_kwh=o,
                        sample_count=count[b], coverage=cov))
    return out


def reading_locals_for(series, window):
    """Localized (datetime, kwh) pairs for readings inside the window."""
    tz = ZoneInfo(series.timezone)
    return [(r.timestamp.astimezone(tz), r.energy) for r in series.slice(window)]


def grid_locals_for(series, window):
    """Local datetimes of every grid slot (present or not) inside window∩extent."""
    if len(series) == 0:
        return []
    tz = ZoneInfo(series.timezone)
    first = int(series.epoch_seconds[0])
    last = int(series.epoch_seconds[-1])
    w_start = window.start.timestamp()
    w_end = window.end.timestamp()
    out = []
    t = first
    while t <= last:
        if w_start <= t < w_end:
            out.append(datetime.fromtimestamp(t, tz))
        t += series.interval
    return out


def window_total_oracle(series, window):
    """Chronological float sum of readings inside the window."""
    return sum(r.energy for r in series.slice(window))


def event_covers(event, local: datetime) -> bool:
    """Is an instant inside a weekly usage event (overnight wraps)?"""
    sod = local.hour * 3600 + local.minute * 60 + local.second
    if not event.overnight:
        return local.weekday() in event.days and event.start_s <= sod < event.end_s
    if local.weekday() in event.days and sod >= event.start_s:
        return True
    prev = (local.weekday() - 1) % 7
    return prev in event.days and sod < event.end_s


def device_energy_sim(device, window, zone, step_s=60) -> Fraction:
    """Stepwise simulation: walk the window and integrate power.

    Valid when every event boundary falls on the step grid relative to civil
    midnight (the fixtures use whole minutes).
    """
    tz = ZoneInfo(zone)
    rated = device.rated_power
    standby = device.standby_power
    cls = device.usage_class.value
    total = Fraction(0)
    step = timedelta(seconds=step_s)
    t = window.start
    while t < window.end:
        local = t.astimezone(tz)
        if cls == "always_on":
            power = rated
        else:
            on = any(event_covers(ev, local) for ev in device.events)
            if cls == "habitual":
                # literal sum: overlapping events stack
                power = rated * sum(1 for ev in device.events if event_covers(ev, local))
            else:
                power = rated if on else standby
        total += power * Fraction(step_s, 3600)
        t += step
    return total


def occurrences_oracle(event, window, zone):
    """Clipped absolute spans for an event, scanning one civil day at a time."""
    tz = ZoneInfo(zone)
    d = window.start.astimezone(tz).date() - timedelta(days=1)
    last = (window.end - timedelta(microseconds=1)).astimezone(tz).date()
    out = []
    while d <= last:
        if d.weekday() in event.days:
            start_naive = datetime(d.year, d.month, d.day) + timedelta(seconds=event.start_s)
            dur = (event.end_s - event.start_s) % 86400
            end_naive = start_naive + timedelta(seconds=dur)
            s = start_naive.replace(tzinfo=tz)
            e = end_naive.replace(tzinfo=tz) if not event.overnight else \
                (datetime(d.year, d.month, d.day) + timedelta(days=1) +
                 timedelta(seconds=event.end_s)).replace(tzinfo=tz)
            s = max(s, window.start)
            e = min(e, window.end)
            if s < e:
                out.append((s, e))
        d += timedelta(days=1)
    return out


def device_cost_oracle(device, window, plan, zone, step_s=900) -> Fraction:
    """Per-contract cost: steps laid from each operation-span start, priced
    at the step's starting instant, accumulated exactly."""
    tz = ZoneInfo(zone)
    cls = device.usage_class.value
    if cls == "always_on":
        spans = [(device.rated_power, window.start, window.end)]
    else:
        occs = []
        for ev in device.events:
            occs.extend(occurrences_oracle(ev, window, zone))
        if cls == "habitual":
            spans = [(device.rated_power, s, e) for s, e in occs]
        else:
            merged = []
            for s, e in sorted(occs):
                if merged and s <= merged[-1][1]:
                    merged[-1] = (merged[-1][0], max(merged[-1][1], e))
                else:
                    merged.append((s, e))
            spans = []
            cursor = window.start
            for s, e in merged:
                if cursor < s:
                    spans.append((device.standby_power, cursor, s))
                spans.append((device.rated_power, s, e))
                cursor = e
            if cursor < window.end:
                spans.append((device.standby_power, cursor, window.end))
    total = Fraction(0)
    for power, s, e in spans:
        if power == 0:
            continue
        t = s
        while t < e:
            nxt = min(t + timedelta(seconds=step_s), e)
            rate = classify_local(plan, t.astimezone(tz))[1]
            seconds = Fraction(int((nxt - t).total_seconds() * 1_000_000), 1_000_000)
            total += power * rate * seconds / 3600
            t = nxt
    return total
