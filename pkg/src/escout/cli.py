"""Operator command line: validate data, one-shot reports, what-if runs, serve."""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import household as hh
from .aggregate import AggregationError, BinScheme
from .context import ContextError, ingest_calendar, ingest_weather
from .meter import MeterError, ingest_csv
from .service import (BadRequest, aggregate_payload, load_config,
                      parse_window, whatif_payload, _parse_filter)
from .tariff import TariffError, load_plan


@click.group(context_settings={"auto_envvar_prefix": "ESCOUT"})
def main():
    """Household smart-meter analytics engine."""


def _load_series(meter: str, interval: int, tz: str):
    try:
        with open(meter, "rb") as f:
            return ingest_csv(f, interval, tz)
    except MeterError as e:
        raise click.ClickException(f"{meter}: {e}")


def _load_plan_file(path):
    if path is None:
        return None
    try:
        return load_plan(path)
    except (TariffError, json.JSONDecodeError) as e:
        raise click.ClickException(f"{path}: {e}")


def _parse_window_flag(text: str):
    parts = text.split("..")
    if len(parts) != 2:
        raise click.UsageError(f"--window must be START..END, got {text!r}")
    try:
        return parse_window(parts[0].strip(), parts[1].strip())
    except (BadRequest, ValueError) as e:
        raise click.UsageError(str(e))


def _parse_filter_flag(text: str):
    day_kind, season, segment = "all", None, None
    for part in (text or "all").split(","):
        part = part.strip().lower()
        if not part:
            continue
        if "=" in part:
            key, _, value = part.partition("=")
            if key == "season":
                season = value
            elif key == "segment":
                segment = value
            else:
                raise click.UsageError(f"unknown filter key {key!r}")
        else:
            day_kind = part
    try:
        return _parse_filter(day_kind, season, segment)
    except BadRequest as e:
        raise click.UsageError(str(e))


@main.command()
@click.option("--meter", required=True, type=click.Path(exists=True, dir_okay=False),
              help="meter CSV (timestamp,kwh)")
@click.option("--interval", default=900, show_default=True, type=int,
              help="meter interval in seconds")
@click.option("--tz", default="UTC", show_default=True, help="household time zone")
@click.option("--weather", type=click.Path(exists=True, dir_okay=False),
              help="weather CSV to validate")
@click.option("--calendar", type=click.Path(exists=True, dir_okay=False),
              help="calendar .ics to validate")
def ingest(meter, interval, tz, weather, calendar):
    """Validate data files; print row counts, gaps, and coverage."""
    series = _load_series(meter, interval, tz)
    extent = series.extent
    coverage = series.coverage(extent) if extent else 0.0
    click.echo(f"{len(series)} readings, coverage {coverage:.2f}")
    if extent is not None:
        click.echo(f"extent {extent.start.isoformat()} .. {extent.end.isoformat()}")
    for gap in series.gaps():
        click.echo(f"gap {gap.start.isoformat()} .. {gap.end.isoformat()}")
    if weather:
        try:
            with open(weather, "rb") as f:
                samples = ingest_weather(f, tz)
        except ContextError as e:
            raise click.ClickException(f"{weather}: {e}")
        click.echo(f"{len(samples)} weather samples")
    if calendar:
        try:
            with open(calendar, "rb") as f:
                events = ingest_calendar(f, tz)
        except ContextError as e:
            raise click.ClickException(f"{calendar}: {e}")
        click.echo(f"{len(events)} calendar events")


@main.command()
@click.option("--meter", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--interval", default=900, show_default=True, type=int)
@click.option("--tz", default="UTC", show_default=True)
@click.option("--window", "window_text", required=True, metavar="START..END",
              help="RFC 3339 window, e.g. 2010-05-01T00:00:00+00:00..2010-06-01T00:00:00+00:00")
@click.option("--scheme", default="hour_of_day", show_default=True,
              help="hour_of_day, day_of_week, month_of_year, week_of_year, day_segment")
@click.option("--cells", type=int, help="bin count for the scheme")
@click.option("--filter", "filter_text", default="all", show_default=True,
              help="day kind plus optional season=/segment=, e.g. weekdays,season=winter")
@click.option("--plan", "plan_path", type=click.Path(exists=True, dir_okay=False),
              help="tariff JSON for the peak/off-peak split")
@click.option("--format", "fmt", default="table", show_default=True,
              type=click.Choice(["table", "json", "csv"]))
def report(meter, interval, tz, window_text, scheme, cells, filter_text,
           plan_path, fmt):
    """Aggregate report over a window (same payload as the HTTP API)."""
    try:
        bin_scheme = BinScheme.parse(scheme, cells)
    except AggregationError as e:
        raise click.UsageError(str(e))
    window = _parse_window_flag(window_text)
    filt = _parse_filter_flag(filter_text)
    series = _load_series(meter, interval, tz)
    plan = _load_plan_file(plan_path)
    payload = aggregate_payload(series, plan, window, bin_scheme, filt)

    if fmt == "json":
        click.echo(json.dumps(payload, indent=2))
        return
    if fmt == "csv":
        click.echo("bin_index,label,mean_kwh,peak_kwh,offpeak_kwh,sample_count,coverage")
        for b in payload["bins"]:
            click.echo(f"{b['bin_index']},{b['label']},{b['mean_kwh']!r},"
                       f"{b['peak_kwh']!r},{b['offpeak_kwh']!r},"
                       f"{b['sample_count']},{b['coverage']!r}")
        return
    click.echo(f"{'label':<10} {'mean kWh':>10} {'peak':>10} {'offpeak':>10} "
               f"{'samples':>8} {'coverage':>9}")
    for b in payload["bins"]:
        click.echo(f"{b['label']:<10} {b['mean_kwh']:>10.4f} {b['peak_kwh']:>10.4f} "
                   f"{b['offpeak_kwh']:>10.4f} {b['sample_count']:>8} "
                   f"{b['coverage']:>9.3f}")


@main.command()
@click.option("--base", "base_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="base profile JSON")
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON list of edit ops applied to a clone of the base")
@click.option("--window", "window_text", required=True, metavar="START..END")
@click.option("--tz", default="UTC", show_default=True)
@click.option("--plan-a", "plan_a_path", type=click.Path(exists=True, dir_okay=False),
              help="tariff for the base profile")
@click.option("--plan-b", "plan_b_path", type=click.Path(exists=True, dir_okay=False),
              help="tariff for the what-if profile (defaults to --plan-a)")
@click.option("--step", default=900, show_default=True, type=int,
              help="cost integration step in seconds")
@click.option("--format", "fmt", default="table", show_default=True,
              type=click.Choice(["table", "json"]))
def whatif(base_path, scenario_path, window_text, tz, plan_a_path, plan_b_path,
           step, fmt):
    """Clone a base profile, apply a scenario patch, and report the deltas."""
    window = _parse_window_flag(window_text)
    try:
        base = hh.load_profile(base_path)
    except (hh.ModelError, json.JSONDecodeError) as e:
        raise click.ClickException(f"{base_path}: {e}")
    try:
        doc = json.loads(Path(scenario_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise click.ClickException(f"{scenario_path}: {e}")
    ops = doc.get("ops") if isinstance(doc, dict) else doc
    if not isinstance(ops, list):
        raise click.ClickException(f"{scenario_path}: expected a JSON list of ops")
    plan_a = _load_plan_file(plan_a_path)
    plan_b = _load_plan_file(plan_b_path) if plan_b_path else plan_a
    try:
        whatif_profile = hh.apply_patch(hh.clone_profile(base), ops)
        payload = whatif_payload(base, whatif_profile, window, tz,
                                 plan_a, plan_b, step)
    except hh.ModelError as e:
        raise click.ClickException(str(e))

    if fmt == "json":
        click.echo(json.dumps(payload, indent=2))
        return
    click.echo(f"base   {payload['base']['kwh']:>12.4f} kWh "
               f"{payload['base']['usd']:>10.4f} $")
    click.echo(f"whatif {payload['whatif']['kwh']:>12.4f} kWh "
               f"{payload['whatif']['usd']:>10.4f} $")
    click.echo(f"delta  {payload['delta_kwh']:>12.4f} kWh "
               f"{payload['delta_usd']:>10.4f} $")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="service config JSON; ESCOUT_* env vars override")
def serve(config_path):
    """Run the HTTP service until interrupted."""
    from .service import run
    try:
        config = load_config(config_path)
    except (OSError, ValueError) as e:
        raise click.ClickException(str(e))
    run(config)


if __name__ == "__main__":
    main()
