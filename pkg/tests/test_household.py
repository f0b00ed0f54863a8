import json
import math
from datetime import timedelta
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from escout.household import (BalanceState, DeviceProfile, HouseholdProfile,
                              InvariantViolation, ModelError, ProfileLabel,
                              UnknownDevice, UnknownEvent, UsageClass,
                              UsageEvent, add_device, add_event, apply_patch,
                              balance, balance_state, clone_profile,
                              compare_profiles, device_cost, device_energy,
                              device_from_dict, event_from_dict, load_catalog,
                              load_profile, occurrences, profile_energy,
                              profile_from_dict, profile_to_dict,
                              remove_device, remove_event, save_profile,
                              update_device)
from escout.meter import TimeWindow
from escout.tariff import plan_from_dict
from conftest import T0, span_window
from oracles import device_cost_oracle, device_energy_sim, occurrences_oracle

FRIDAY = 4
SATURDAY = 5


def habitual(device_id="washer", rated=0.5, events=()):
    return DeviceProfile(device_id=device_id, name=device_id,
                         category="appliance", usage_class=UsageClass.HABITUAL,
                         rated_power=rated, events=list(events))


def ev(start_h, end_h, days):
    return UsageEvent(start_s=start_h * 3600, end_s=end_h * 3600,
                      days=frozenset(days))


class TestDeviceEnergy:
    def test_habitual_washer_four_weeks(self):
        dev = habitual(events=[ev(14, 16, {FRIDAY})])
        assert device_energy(dev, span_window(T0, days=28), "UTC") == 4.0

    def test_always_plugged_tv_one_day(self):
        tv = DeviceProfile(device_id="tv", name="tv", category="vampire",
                           usage_class=UsageClass.ALWAYS_PLUGGED,
                           rated_power=0.1, standby_power=0.005,
                           events=[ev(20, 22, set(range(7)))])
        window = span_window(T0, days=1)
        got = device_energy(tv, window, "UTC")
        assert got == pytest.approx(0.31, abs=1e-12)
        assert Fraction(str(got)) == device_energy_sim(tv, window, "UTC", step_s=3600)

    def test_always_on_fridge(self):
        fridge = DeviceProfile(device_id="fridge", name="fridge",
                               category="appliance",
                               usage_class=UsageClass.ALWAYS_ON,
                               rated_power=0.125)
        assert device_energy(fridge, span_window(T0, days=2), "UTC") == 6.0

    def test_habitual_overlapping_events_stack(self):
        dev = habitual(events=[ev(14, 16, {FRIDAY}), ev(15, 17, {FRIDAY})])
        window = span_window(T0, days=7)
        assert device_energy(dev, window, "UTC") == pytest.approx(2.0)
        assert Fraction(str(device_energy(dev, window, "UTC"))) == \
            device_energy_sim(dev, window, "UTC", step_s=900)

    def test_always_plugged_merges_overlaps(self):
        dev = DeviceProfile(device_id="d", name="d", category="other",
                            usage_class=UsageClass.ALWAYS_PLUGGED,
                            rated_power=1.0, standby_power=0.0,
                            events=[ev(14, 16, {FRIDAY}), ev(15, 17, {FRIDAY})])
        # merged on-time is 3 h, not 4
        assert device_energy(dev, span_window(T0, days=7), "UTC") == 3.0

    def test_matches_simulation_on_mixed_profile(self):
        devices = [
            habitual("washer", 0.5, [ev(14, 16, {FRIDAY})]),
            DeviceProfile(device_id="tv", name="tv", category="vampire",
                          usage_class=UsageClass.ALWAYS_PLUGGED,
                          rated_power=0.1, standby_power=0.005,
                          events=[ev(20, 22, set(range(7)))]),
            DeviceProfile(device_id="heater", name="heater", category="hvac",
                          usage_class=UsageClass.HABITUAL, rated_power=1.5,
                          events=[ev(6, 8, {0, 2, 4}), ev(22, 23, {5, 6})]),
        ]
        window = span_window(T0 + timedelta(hours=7), days=10)
        for dev in devices:
            got = device_energy(dev, window, "UTC")
            want = device_energy_sim(dev, window, "UTC", step_s=900)
            assert got == float(want)

    def test_window_additivity(self):
        dev = habitual(events=[ev(14, 16, {FRIDAY}), ev(9, 11, {1, 3})])
        mid = T0 + timedelta(days=3, hours=10, minutes=15)
        whole = device_energy(dev, span_window(T0, days=7), "UTC")
        left = device_energy(dev, TimeWindow(T0, mid), "UTC")
        right = device_energy(dev, TimeWindow(mid, T0 + timedelta(days=7)), "UTC")
        assert left + right == pytest.approx(whole, rel=1e-12)

    def test_time_shift_invariance(self):
        friday = habitual(events=[ev(14, 16, {FRIDAY})])
        monday = habitual(events=[ev(9, 11, {0})])
        w = span_window(T0, days=7)
        assert device_energy(friday, w, "UTC") == device_energy(monday, w, "UTC")


class TestOccurrences:
    def test_simple_week(self):
        spans = occurrences(ev(14, 16, {FRIDAY}), span_window(T0, days=7), "UTC")
        assert len(spans) == 1
        assert spans[0][0] == T0 + timedelta(days=4, hours=14)
        assert spans[0][1] - spans[0][0] == timedelta(hours=2)

    def test_overnight_wraps_into_window(self):
        # Sunday 22:00-02:00 reaches into a window starting Monday midnight
        night = UsageEvent(start_s=22 * 3600, end_s=2 * 3600, days={6})
        spans = occurrences(night, span_window(T0, days=1), "UTC")
        assert spans == [(T0, T0 + timedelta(hours=2))]

    def test_overnight_attributed_to_start_day(self):
        # Friday 23:00-01:00 occurs on Fridays even though it ends Saturday
        night = UsageEvent(start_s=23 * 3600, end_s=1 * 3600, days={FRIDAY})
        w = span_window(T0, days=7)
        spans = occurrences(night, w, "UTC")
        assert len(spans) == 1
        assert spans[0][0].weekday() == FRIDAY

    def test_clipping_at_window_edges(self):
        spans = occurrences(ev(14, 16, {FRIDAY}),
                            span_window(T0 + timedelta(days=4, hours=15), hours=1),
                            "UTC")
        assert spans == [(T0 + timedelta(days=4, hours=15),
                          T0 + timedelta(days=4, hours=16))]

    def test_matches_oracle_across_shapes(self):
        events = [ev(14, 16, {FRIDAY}),
                  UsageEvent(start_s=22 * 3600, end_s=2 * 3600, days={4, 5}),
                  ev(0, 5, {0, 6})]
        windows = [span_window(T0, days=7),
                   span_window(T0 + timedelta(hours=23), days=3),
                   span_window(T0 + timedelta(days=4, hours=15), hours=10)]
        for e in events:
            for w in windows:
                assert occurrences(e, w, "UTC") == occurrences_oracle(e, w, "UTC")

    def test_dst_wall_clock(self):
        from zoneinfo import ZoneInfo
        from datetime import datetime
        zone = "America/New_York"
        start = datetime(2010, 3, 12, tzinfo=ZoneInfo(zone))
        daily = ev(19, 20, set(range(7)))
        spans = occurrences(daily, span_window(start, days=5), zone)
        assert len(spans) == 5
        for s, e in spans:
            assert s.astimezone(ZoneInfo(zone)).hour == 19
            assert e - s == timedelta(hours=1)


class TestDeviceCost:
    def wk_plan(self, peak="0.30", off="0.10"):
        return plan_from_dict({
            "plan_id": "p", "name": "p", "offpeak_rate": Fraction(off),
            "periods": [{"days": ["MON", "TUE", "WED", "THU", "FRI"],
                         "start": "12:00", "end": "18:00",
                         "rate": Fraction(peak)}]})

    def test_peak_event_costs_peak_rate(self):
        dev = habitual(events=[ev(14, 16, {FRIDAY})])
        cost = device_cost(dev, span_window(T0, days=7), self.wk_plan(), "UTC")
        assert cost == pytest.approx(0.30)  # 1 kWh fully inside the peak span

    def test_matches_stepped_oracle(self):
        plan = self.wk_plan()
        devices = [
            habitual("w", 0.5, [ev(14, 16, {FRIDAY})]),
            DeviceProfile(device_id="tv", name="tv", category="v",
                          usage_class=UsageClass.ALWAYS_PLUGGED,
                          rated_power=0.1, standby_power=0.005,
                          events=[ev(17, 19, set(range(7)))]),
            DeviceProfile(device_id="f", name="f", category="a",
                          usage_class=UsageClass.ALWAYS_ON, rated_power=0.125),
        ]
        w = span_window(T0 + timedelta(hours=5), days=9)
        for dev in devices:
            got = device_cost(dev, w, plan, "UTC")
            assert got == float(device_cost_oracle(dev, w, plan, "UTC"))

    def test_span_straddling_rate_change(self):
        # 11:00-13:00 event: one hour off-peak, one hour peak
        dev = habitual("d", 1.0, [ev(11, 13, {0})])
        got = device_cost(dev, span_window(T0, days=1), self.wk_plan(), "UTC")
        assert got == float(device_cost_oracle(dev, span_window(T0, days=1),
                                               self.wk_plan(), "UTC"))
        assert got == pytest.approx(0.40)

    def test_no_plan_is_free(self):
        dev = habitual(events=[ev(14, 16, {FRIDAY})])
        assert device_cost(dev, span_window(T0, days=7), None, "UTC") == 0.0

    def test_cost_dominance(self):
        # moving event hours from peak to off-peak never raises the bill
        plan = self.wk_plan()
        w = span_window(T0, days=7)
        peak_dev = habitual(events=[ev(13, 15, {2})])
        shifted = [habitual(events=[ev(h, h + 2, {d})])
                   for d in range(7) for h in (0, 6, 13, 19)]
        base = device_cost(peak_dev, w, plan, "UTC")
        assert all(device_cost(d, w, plan, "UTC") <= base for d in shifted)


class TestProfileEnergy:
    def sample_profile(self):
        return HouseholdProfile(profile_id="home", devices=[
            habitual("washer", 0.5, [ev(14, 16, {FRIDAY})]),
            DeviceProfile(device_id="fridge", name="fridge", category="appliance",
                          usage_class=UsageClass.ALWAYS_ON, rated_power=0.125),
            DeviceProfile(device_id="tv", name="tv", category="vampire",
                          usage_class=UsageClass.ALWAYS_PLUGGED,
                          rated_power=0.1, standby_power=0.005,
                          events=[ev(20, 22, set(range(7)))]),
        ])

    def test_total_is_sum_of_devices(self):
        w = span_window(T0, days=7)
        pe = profile_energy(self.sample_profile(), w, "UTC")
        assert pe.kwh == sum(w_.energy_kwh for w_ in pe.per_device)
        assert set(pe.per_category) == {"appliance", "vampire"}
        assert pe.per_category["appliance"] == pytest.approx(
            pe.per_device[0].energy_kwh + pe.per_device[1].energy_kwh)

    def test_weight_geometry(self):
        pe = profile_energy(self.sample_profile(), span_window(T0, days=7),
                            "UTC", area_scale=3.5)
        for w_ in pe.per_device:
            assert w_.area == pytest.approx(3.5 * w_.energy_kwh)
            assert w_.radius == pytest.approx(math.sqrt(w_.area / math.pi))

    def test_area_scale_validation(self):
        with pytest.raises(ModelError, match="area_scale"):
            profile_energy(self.sample_profile(), span_window(T0, days=1),
                           "UTC", area_scale=0)


class TestBalance:
    def test_within_tolerance(self):
        st_ = balance_state(100.0, 96.0)
        assert st_ == BalanceState(100.0, 96.0, 4.0, 0.04, True, 0.05)

    def test_spy_mode_ratio(self):
        st_ = balance_state(100.0, 80.0)
        assert st_.imbalance_ratio == pytest.approx(0.2)
        assert not st_.balanced

    def test_boundary_is_balanced(self):
        assert balance_state(100.0, 95.0).balanced          # ratio == tolerance
        assert not balance_state(100.0, 95.0 - 1e-9).balanced

    def test_zero_measured_guard(self):
        st_ = balance_state(0.0, 1.0)
        assert not st_.balanced
        with pytest.raises(ModelError):
            balance_state(-1.0, 1.0)

    def test_profile_balance(self):
        profile = HouseholdProfile(profile_id="h", devices=[
            DeviceProfile(device_id="a", name="a", category="x",
                          usage_class=UsageClass.ALWAYS_ON, rated_power=1.0)])
        st_ = balance(profile, 25.0, span_window(T0, days=1), "UTC")
        assert st_.modeled_kwh == 24.0
        assert st_.residual_kwh == 1.0
        assert st_.balanced  # 4% residual


class TestScenarios:
    def laundry_setup(self):
        plan = plan_from_dict({
            "plan_id": "tou", "name": "tou", "offpeak_rate": 0.10,
            "periods": [{"days": ["MON", "TUE", "WED", "THU", "FRI"],
                         "start": "12:00", "end": "18:00", "rate": 0.30}]})
        base = HouseholdProfile(profile_id="home", devices=[
            habitual("washer", 0.5, [ev(14, 16, {FRIDAY})])])
        return plan, base

    def test_laundry_friday_to_saturday(self):
        plan, base = self.laundry_setup()
        whatif = clone_profile(base, "home-whatif")
        whatif.device("washer").events[0] = ev(14, 16, {SATURDAY})
        delta = compare_profiles(base, whatif, span_window(T0, days=7), "UTC",
                                 base_plan=plan, whatif_plan=plan)
        assert delta.delta_kwh == 0.0
        assert delta.delta_usd == -0.2  # 1 kWh moved off a 0.20 $/kWh premium
        # magnitude cross-check against the stepped cost oracle
        w = span_window(T0, days=7)
        want = device_cost_oracle(whatif.device("washer"), w, plan, "UTC") - \
            device_cost_oracle(base.device("washer"), w, plan, "UTC")
        assert delta.delta_usd == float(want)

    def test_cfl_swap(self):
        base = HouseholdProfile(profile_id="home", devices=[
            habitual("bulbs", 0.6, [ev(18, 22, set(range(7)))])])
        whatif = clone_profile(base)
        update_device(whatif, "bulbs", rated_power=0.14)
        delta = compare_profiles(base, whatif, span_window(T0, days=30), "UTC")
        assert delta.delta_kwh == -55.2

    def test_clone_is_isolated(self):
        _, base = self.laundry_setup()
        vclone = clone_profile(base)
        assert vclone.label is ProfileLabel.WHATIF
        assert vclone.profile_id != base.profile_id
        vclone.device("washer").events.append(ev(9, 10, {0}))
        remove_device(vclone, "washer")
        assert [d.device_id for d in base.devices] == ["washer"]
        assert len(base.device("washer").events) == 1

    def test_identical_profiles_zero_delta(self):
        plan, base = self.laundry_setup()
        delta = compare_profiles(base, clone_profile(base),
                                 span_window(T0, days=7), "UTC",
                                 base_plan=plan, whatif_plan=plan)
        assert (delta.delta_kwh, delta.delta_usd) == (0.0, 0.0)


class TestEdits:
    def sample(self):
        return HouseholdProfile(profile_id="h", devices=[
            habitual("washer", 0.5, [ev(14, 16, {FRIDAY})])])

    def test_add_remove_device(self):
        p = self.sample()
        add_device(p, habitual("dryer", 1.0))
        assert [d.device_id for d in p.devices] == ["washer", "dryer"]
        remove_device(p, "washer")
        assert [d.device_id for d in p.devices] == ["dryer"]
        with pytest.raises(UnknownDevice):
            remove_device(p, "washer")

    def test_duplicate_device_id_rejected(self):
        p = self.sample()
        with pytest.raises(InvariantViolation, match="already"):
            add_device(p, habitual("washer"))

    def test_update_device_validates(self):
        p = self.sample()
        update_device(p, "washer", rated_power=0.8)
        assert p.device("washer").rated_power == Fraction(4, 5)
        with pytest.raises(InvariantViolation):
            update_device(p, "washer", standby_power=0.9)  # habitual, no standby
        with pytest.raises(InvariantViolation, match="unknown device fields"):
            update_device(p, "washer", wattage=900)
        assert p.device("washer").rated_power == Fraction(4, 5)  # unchanged

    def test_event_edits(self):
        p = self.sample()
        add_event(p, "washer", ev(9, 10, {0}))
        assert len(p.device("washer").events) == 2
        remove_event(p, "washer", 0)
        assert p.device("washer").events == [ev(9, 10, {0})]
        with pytest.raises(UnknownEvent):
            remove_event(p, "washer", 5)

    def test_event_validation(self):
        with pytest.raises(InvariantViolation):
            UsageEvent(start_s=10, end_s=10, days={0})
        with pytest.raises(InvariantViolation):
            UsageEvent(start_s=0, end_s=3600, days=set())
        with pytest.raises(InvariantViolation):
            UsageEvent(start_s=0, end_s=3600, days={7})

    def test_device_power_invariants(self):
        with pytest.raises(InvariantViolation, match="rated_power"):
            DeviceProfile(device_id="d", name="d", category="x",
                          usage_class=UsageClass.ALWAYS_PLUGGED,
                          rated_power=0.1, standby_power=0.2)
        with pytest.raises(InvariantViolation, match="always-plugged"):
            DeviceProfile(device_id="d", name="d", category="x",
                          usage_class=UsageClass.HABITUAL,
                          rated_power=0.5, standby_power=0.01)


class TestPatch:
    def sample(self):
        return HouseholdProfile(profile_id="h", devices=[
            habitual("washer", 0.5, [ev(14, 16, {FRIDAY})])])

    def test_patch_returns_new_profile(self):
        p = self.sample()
        out = apply_patch(p, [
            {"op": "add_device", "device": {
                "device_id": "heater", "usage_class": "habitual",
                "rated_power": 1.5,
                "events": [{"start": "06:00", "end": "08:00", "days": ["MON"]}]}},
            {"op": "update_device", "device_id": "washer",
             "fields": {"rated_power": 0.8}},
        ])
        assert [d.device_id for d in out.devices] == ["washer", "heater"]
        assert out.device("washer").rated_power == Fraction(4, 5)
        assert p.device("washer").rated_power == Fraction(1, 2)  # untouched

    def test_patch_is_atomic(self):
        p = self.sample()
        ops = [{"op": "remove_device", "device_id": "washer"},
               {"op": "remove_device", "device_id": "ghost"}]
        with pytest.raises(UnknownDevice):
            apply_patch(p, ops)
        assert [d.device_id for d in p.devices] == ["washer"]

    def test_patch_event_ops(self):
        p = self.sample()
        out = apply_patch(p, [
            {"op": "add_event", "device_id": "washer",
             "event": {"start": "21:00", "end": "23:00", "days": ["SAT"]}},
            {"op": "remove_event", "device_id": "washer", "event_index": 0},
        ])
        assert out.device("washer").events == [ev(21, 23, {SATURDAY})]

    def test_patch_validation(self):
        p = self.sample()
        with pytest.raises(ModelError, match="unknown patch op"):
            apply_patch(p, [{"op": "rename"}])
        with pytest.raises(ModelError, match="'op'"):
            apply_patch(p, ["nope"])
        with pytest.raises(ModelError, match="needs 'device_id'"):
            apply_patch(p, [{"op": "remove_device"}])

    def test_empty_patch_is_identity(self):
        p = self.sample()
        out = apply_patch(p, [])
        assert profile_to_dict(out) == profile_to_dict(p)


class TestCodecs:
    def test_roundtrip(self, tmp_path):
        p = HouseholdProfile(profile_id="h", label=ProfileLabel.BASE, devices=[
            habitual("washer", 0.5, [ev(14, 16, {FRIDAY})]),
            DeviceProfile(device_id="tv", name="TV set", category="vampire",
                          usage_class=UsageClass.ALWAYS_PLUGGED,
                          rated_power=0.1, standby_power=0.005,
                          events=[ev(20, 22, set(range(7)))]),
        ], plan_ref="tou")
        path = tmp_path / "profile.json"
        save_profile(p, path)
        back = load_profile(path)
        assert profile_to_dict(back) == profile_to_dict(p)
        assert back.device("tv").standby_power == Fraction(1, 200)

    def test_rates_parse_decimally(self):
        dev = device_from_dict({"device_id": "d", "usage_class": "habitual",
                                "rated_power": 0.3})
        assert dev.rated_power == Fraction(3, 10)

    def test_event_document_forms(self):
        by_name = event_from_dict({"start": "22:00", "end": "02:00",
                                   "days": ["FRI", "SAT"]})
        by_index = event_from_dict({"start": 22 * 3600, "end": 2 * 3600,
                                    "days": [4, 5]})
        assert by_name == by_index
        assert by_name.overnight

    def test_errors(self):
        with pytest.raises(ModelError, match="usage class"):
            device_from_dict({"device_id": "d", "usage_class": "sometimes",
                              "rated_power": 1})
        with pytest.raises(ModelError, match="missing field"):
            device_from_dict({"device_id": "d", "usage_class": "habitual"})
        with pytest.raises(ModelError):
            profile_from_dict({"devices": []})
        with pytest.raises(ModelError, match="start, end, and days"):
            event_from_dict({"start": "10:00"})

    def test_load_catalog(self, tmp_path):
        path = tmp_path / "catalog.json"
        path.write_text(json.dumps([
            {"name": "Fridge", "category": "appliance",
             "usage_class": "always_on", "rated_power": 0.12},
            {"name": "Kettle", "rated_power": 2.0},
        ]))
        cat = load_catalog(path)
        assert cat[0]["usage_class"] == "always_on"
        assert cat[1] == {"name": "Kettle", "category": "other",
                          "usage_class": "habitual", "rated_power": 2.0,
                          "standby_power": 0.0}
        path.write_text("{}")
        with pytest.raises(ModelError, match="list"):
            load_catalog(path)


@given(rated_milli=st.integers(1, 3000),
       start_h=st.integers(0, 22), dur_h=st.integers(1, 12),
       day=st.integers(0, 6))
@settings(max_examples=40, deadline=None)
def test_habitual_energy_matches_simulation(rated_milli, start_h, dur_h, day):
    end_h = (start_h + dur_h) % 24
    if end_h == start_h:
        return
    dev = habitual("d", Fraction(rated_milli, 1000),
                   [UsageEvent(start_s=start_h * 3600, end_s=end_h * 3600,
                               days={day})])
    w = span_window(T0, days=14)
    assert device_energy(dev, w, "UTC") == float(
        device_energy_sim(dev, w, "UTC", step_s=3600))
