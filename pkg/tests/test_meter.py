from datetime import datetime, timedelta
from zoneinfo import ZoneInfo

import pytest
from hypothesis import given, settings, strategies as st

from escout.meter import (DuplicateTimestamp, InvalidMaxPoints, MalformedRow,
                          MeterError, NegativeEnergy, OffGridTimestamp,
                          TimeWindow, downsample, ingest_csv)
from conftest import T0, make_series, span_window
from oracles import window_total_oracle


def csv_text(rows, header="timestamp,kwh"):
    return "\n".join([header] + rows)


def hourly_rows(start, n, kwh="0.25"):
    return [f"{(start + timedelta(hours=i)).isoformat()},{kwh}" for i in range(n)]


class TestIngest:
    def test_happy_path(self):
        series = ingest_csv(csv_text(hourly_rows(T0, 24)), 3600, "UTC")
        assert len(series) == 24
        assert series.interval == 3600
        assert series.timestamp_at(0) == T0

    def test_out_of_order_rows_are_sorted(self):
        rows = hourly_rows(T0, 5)
        series = ingest_csv(csv_text(list(reversed(rows))), 3600, "UTC")
        ts = series.epoch_seconds
        assert list(ts) == sorted(ts)

    def test_comments_and_blank_lines_skipped(self):
        text = "# leading comment\n\ntimestamp,kwh\n# mid comment\n" + \
            f"{T0.isoformat()},0.5\n"
        assert len(ingest_csv(text, 900, "UTC")) == 1

    def test_missing_header(self):
        with pytest.raises(MalformedRow, match="header"):
            ingest_csv(f"{T0.isoformat()},0.5", 900, "UTC")

    def test_wrong_field_count(self):
        with pytest.raises(MalformedRow, match="line 2"):
            ingest_csv(csv_text([f"{T0.isoformat()},0.5,extra"]), 900, "UTC")

    def test_bad_timestamp(self):
        with pytest.raises(MalformedRow, match="timestamp"):
            ingest_csv(csv_text(["not-a-time,0.5"]), 900, "UTC")

    def test_subsecond_timestamp_rejected(self):
        with pytest.raises(MalformedRow, match="sub-second"):
            ingest_csv(csv_text(["2010-01-04T00:00:00.250+00:00,0.5"]), 900, "UTC")

    def test_negative_energy_carries_line_number(self):
        rows = hourly_rows(T0, 2) + [f"{(T0 + timedelta(hours=2)).isoformat()},-0.1"]
        with pytest.raises(NegativeEnergy) as err:
            ingest_csv(csv_text(rows), 3600, "UTC")
        assert err.value.line_no == 4

    def test_non_finite_energy(self):
        with pytest.raises(MalformedRow, match="non-finite"):
            ingest_csv(csv_text([f"{T0.isoformat()},nan"]), 900, "UTC")

    def test_duplicate_timestamp(self):
        rows = [f"{T0.isoformat()},0.1", f"{T0.isoformat()},0.2"]
        with pytest.raises(DuplicateTimestamp):
            ingest_csv(csv_text(rows), 900, "UTC")

    def test_off_grid_timestamp(self):
        rows = [f"{T0.isoformat()},0.1",
                f"{(T0 + timedelta(minutes=7)).isoformat()},0.1"]
        with pytest.raises(OffGridTimestamp):
            ingest_csv(csv_text(rows), 900, "UTC")

    def test_naive_timestamps_read_in_household_zone(self):
        series = ingest_csv(csv_text(["2010-07-04T12:00:00,0.1"]), 900,
                            "America/New_York")
        assert series.timestamp_at(0).utcoffset() == timedelta(hours=-4)

    def test_zulu_suffix(self):
        series = ingest_csv(csv_text(["2010-01-04T00:00:00Z,0.1"]), 900, "UTC")
        assert series.timestamp_at(0) == T0

    def test_interval_bounds(self):
        with pytest.raises(MeterError):
            ingest_csv(csv_text([]), 30, "UTC")
        with pytest.raises(MeterError):
            ingest_csv(csv_text([]), 7200, "UTC")

    def test_accepts_byte_stream(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text(csv_text(hourly_rows(T0, 3)))
        with p.open("rb") as f:
            assert len(ingest_csv(f, 3600, "UTC")) == 3


class TestWindow:
    def test_rejects_naive_bounds(self):
        with pytest.raises(ValueError):
            TimeWindow(datetime(2010, 1, 1), T0)

    def test_rejects_empty_window(self):
        with pytest.raises(ValueError):
            TimeWindow(T0, T0)

    def test_slice_half_open(self):
        series = make_series(T0, 8, interval=900)
        w = TimeWindow(T0 + timedelta(minutes=15), T0 + timedelta(minutes=45))
        got = [r.timestamp for r in series.slice(w)]
        assert got == [T0 + timedelta(minutes=15), T0 + timedelta(minutes=30)]

    def test_window_total_matches_oracle(self, series_90d, window_90d):
        assert series_90d.window_total(window_90d) == pytest.approx(
            window_total_oracle(series_90d, window_90d), rel=1e-12)

    def test_coverage_full(self):
        series = make_series(T0, 96)
        assert series.coverage(span_window(T0, days=1)) == 1.0

    def test_coverage_clamped_and_partial(self):
        series = make_series(T0, 96, drop=range(48, 96))
        assert series.coverage(span_window(T0, days=1)) == pytest.approx(0.5)
        # wider window than data: fraction shrinks, never exceeds 1
        assert series.coverage(span_window(T0, days=2)) == pytest.approx(0.25)

    def test_gaps(self):
        series = make_series(T0, 96, drop=range(10, 14))
        gaps = series.gaps()
        assert len(gaps) == 1
        assert gaps[0].start == T0 + timedelta(minutes=150)
        assert gaps[0].end == T0 + timedelta(minutes=210)

    def test_extent(self):
        series = make_series(T0, 96)
        assert series.extent.start == T0
        assert series.extent.end == T0 + timedelta(days=1)
        assert make_series(T0, 0).extent is None


class TestDownsample:
    def test_full_resolution_when_few_readings(self):
        series = make_series(T0, 10)
        fm = downsample(series, span_window(T0, days=1), 100)
        assert len(fm.buckets) == 10
        assert fm.bucket_span == 900.0
        assert all(b.count == 1 for b in fm.buckets)

    def test_bucketed_mode_respects_max_points(self, series_90d, window_90d):
        fm = downsample(series_90d, window_90d, 500)
        assert 2 <= len(fm.buckets) <= 500
        # bucket starts advance by one uniform span
        spans = {(b2.bucket_start - b1.bucket_start).total_seconds()
                 for b1, b2 in zip(fm.buckets, fm.buckets[1:])}
        assert spans == {fm.bucket_span}

    def test_conservation_exact_on_dyadic(self, series_1y):
        w = span_window(T0, days=365)
        fm = downsample(series_1y, w, 777)
        assert fm.total_kwh == series_1y.window_total(w)

    def test_partition_by_construction(self, series_90d, window_90d, tou_plan):
        fm = downsample(series_90d, window_90d, 321, plan=tou_plan)
        for b in fm.buckets:
            assert b.sum_kwh == b.peak_kwh + b.offpeak_kwh
            assert b.sum_usd == b.peak_usd + b.offpeak_usd

    def test_no_plan_leaves_usd_absent(self, series_90d, window_90d):
        fm = downsample(series_90d, window_90d, 50)
        assert all(b.sum_usd is None for b in fm.buckets)

    def test_empty_window(self, series_90d):
        w = span_window(T0 + timedelta(days=400), days=1)
        fm = downsample(series_90d, w, 100)
        assert fm.buckets == []
        assert series_90d.coverage(w) == 0.0

    def test_max_points_validation(self, series_90d, window_90d):
        with pytest.raises(InvalidMaxPoints):
            downsample(series_90d, window_90d, 1)

    def test_bucket_counts_cover_all_readings(self, series_90d, window_90d):
        fm = downsample(series_90d, window_90d, 97)
        lo, hi = series_90d.index_range(window_90d)
        assert sum(b.count for b in fm.buckets) == hi - lo

    def test_deterministic(self, series_90d, window_90d):
        a = downsample(series_90d, window_90d, 123)
        b = downsample(series_90d, window_90d, 123)
        assert a == b

    @given(start_qh=st.integers(0, 365 * 96 - 2),
           length_qh=st.integers(1, 365 * 96),
           max_points=st.integers(2, 5000))
    @settings(max_examples=60, deadline=None)
    def test_conservation_property(self, series_1y, start_qh, length_qh,
                                   max_points):
        w = TimeWindow(T0 + timedelta(minutes=15 * start_qh),
                       T0 + timedelta(minutes=15 * (start_qh + length_qh)))
        fm = downsample(series_1y, w, max_points)
        assert fm.total_kwh == pytest.approx(series_1y.window_total(w),
                                             rel=1e-9, abs=1e-12)
        assert len(fm.buckets) <= max_points

    def test_dst_spring_forward_window(self):
        # 2010-03-14 02:00 does not exist in New York; totals must still conserve
        start = datetime(2010, 3, 13, 12, 0, tzinfo=ZoneInfo("America/New_York"))
        series = make_series(start, 192, interval=900, tz="America/New_York")
        w = TimeWindow(start, start + timedelta(days=2))
        fm = downsample(series, w, 48)
        assert fm.total_kwh == pytest.approx(series.window_total(w), rel=1e-12)
