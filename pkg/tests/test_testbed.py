"""Zone dynamics, synthetic boundary conditions, and dataset persistence."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from xmpc.errors import DeserializationError, InvalidInputError, SimulationDivergedError
from xmpc.testbed import (
    CSV_COLUMNS,
    DT_SECONDS,
    EVENT_HOUR_MAX,
    EVENT_HOUR_MIN,
    EVENT_LIMIT_MAX_W,
    EVENT_LIMIT_MIN_W,
    NORMAL_POWER_LIMIT_W,
    Disturbance,
    ExcitationData,
    TestbedConfig,
    ZoneState,
    events_in_calendar,
    generate_dr_calendar,
    load_calendar,
    load_config,
    power_limit_at,
    run_excitation,
    save_calendar,
    save_config,
    step,
    synth_disturbances,
)

CFG = TestbedConfig()


def heat_input_w(temp_c: float, d: Disturbance, cfg: TestbedConfig = CFG) -> float:
    """Independent restatement of the zone heat balance for oracle use."""
    conduction = (d.oa_temp_c - temp_c) / cfg.thermal_resistance
    gains = d.oa_radiation_wm2 * cfg.solar_gain_area + d.occupancy * cfg.internal_gain_per_person
    return conduction + gains


class TestStep:
    def test_free_float_without_cooling(self):
        # oa below zone, no gains: the zone drifts down and the coil stays off.
        d = Disturbance(20.0, 0.0, 0.0)
        nxt, hvac = step(ZoneState(0, 24.0), d, 26.0, CFG)
        expected = 24.0 + DT_SECONDS / CFG.thermal_capacitance * (20.0 - 24.0) / CFG.thermal_resistance
        assert hvac.cooling_rate_w == 0.0
        assert nxt.zone_temp_c == pytest.approx(expected, rel=1e-12)
        assert nxt.hour == 1

    def test_hold_at_setpoint_matches_heat_balance(self):
        # Starting on the setpoint, the coil must remove exactly the heat input:
        # (35-24)/0.005 + 300*0.7 + 3*100 = 2710 W.
        d = Disturbance(35.0, 300.0, 3.0)
        nxt, hvac = step(ZoneState(5, 24.0), d, 24.0, CFG)
        assert nxt.zone_temp_c == pytest.approx(24.0, abs=1e-12)
        assert hvac.cooling_rate_w == pytest.approx(2710.0, rel=1e-9)
        assert hvac.cooling_rate_w == pytest.approx(heat_input_w(24.0, d), rel=1e-12)

    def test_capacity_clamp(self):
        # A 4 K pull-down in one hour needs far more than the coil can deliver.
        d = Disturbance(35.0, 300.0, 3.0)
        nxt, hvac = step(ZoneState(0, 26.0), d, 22.0, CFG)
        free_float = 26.0 + DT_SECONDS / CFG.thermal_capacitance * heat_input_w(26.0, d)
        assert hvac.cooling_rate_w == CFG.cooling_capacity
        assert nxt.zone_temp_c == pytest.approx(
            free_float - DT_SECONDS / CFG.thermal_capacitance * CFG.cooling_capacity, rel=1e-12
        )
        assert nxt.zone_temp_c > 22.0

    def test_heating_floor(self):
        d = Disturbance(0.0, 0.0, 0.0)
        nxt, hvac = step(ZoneState(0, 20.5), d, 26.0, CFG)
        assert hvac.cooling_rate_w == 0.0
        assert nxt.zone_temp_c == CFG.heating_setpoint

    def test_setpoint_out_of_range(self):
        d = Disturbance(30.0, 0.0, 0.0)
        with pytest.raises(InvalidInputError):
            step(ZoneState(0, 24.0), d, 35.0, CFG)
        with pytest.raises(InvalidInputError):
            step(ZoneState(0, 24.0), d, 19.0, CFG)

    def test_non_finite_input(self):
        with pytest.raises(InvalidInputError):
            step(ZoneState(0, float("nan")), Disturbance(30.0, 0.0, 0.0), 24.0, CFG)
        with pytest.raises(InvalidInputError):
            step(ZoneState(0, 24.0), Disturbance(math.inf, 0.0, 0.0), 24.0, CFG)

    def test_divergence_guard(self):
        # A tiny capacitance makes one Euler step overshoot the plausible band.
        cfg = TestbedConfig(thermal_capacitance=1e3)
        with pytest.raises(SimulationDivergedError):
            step(ZoneState(0, 26.0), Disturbance(59.0, 0.0, 0.0), 26.0, cfg)

    @given(
        temp=st.floats(18.0, 32.0),
        oa=st.floats(5.0, 45.0),
        radiation=st.floats(0.0, 900.0),
        occupancy=st.floats(0.0, 10.0),
        setpoint=st.floats(20.0, 30.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_energy_balance_property(self, temp, oa, radiation, occupancy, setpoint):
        d = Disturbance(oa, radiation, occupancy)
        q_in = heat_input_w(temp, d)
        free_float = temp + DT_SECONDS / CFG.thermal_capacitance * q_in
        assume(free_float >= CFG.heating_setpoint)  # floor clamp breaks the balance

        nxt, hvac = step(ZoneState(0, temp), d, setpoint, CFG)
        q = hvac.cooling_rate_w
        assert 0.0 <= q <= CFG.cooling_capacity
        # C * dT/dt must equal heat input minus cooling in every branch.
        lhs = CFG.thermal_capacitance * (nxt.zone_temp_c - temp) / DT_SECONDS
        assert lhs == pytest.approx(q_in - q, abs=1e-6 * max(1.0, abs(q_in)))
        # When the coil modulates (neither off nor saturated) it lands on the setpoint.
        if 0.0 < q < CFG.cooling_capacity:
            assert nxt.zone_temp_c == pytest.approx(setpoint, abs=1e-9)

    @given(
        temp=st.floats(20.0, 30.0),
        oa=st.floats(10.0, 40.0),
        delta=st.floats(0.1, 5.0),
        setpoint=st.floats(22.0, 26.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_cooling_monotone_in_oa_temp(self, temp, oa, delta, setpoint):
        d_lo = Disturbance(oa, 200.0, 2.0)
        d_hi = Disturbance(oa + delta, 200.0, 2.0)
        _, hvac_lo = step(ZoneState(0, temp), d_lo, setpoint, CFG)
        _, hvac_hi = step(ZoneState(0, temp), d_hi, setpoint, CFG)
        assert hvac_hi.cooling_rate_w >= hvac_lo.cooling_rate_w - 1e-9


class TestSynthDisturbances:
    def test_profile_shape_and_peaks(self):
        cfg = TestbedConfig(oa_temp_jitter=0.0, clearness_min=1.0)
        profile = synth_disturbances(0, cfg)
        assert len(profile) == 24
        oa = [d.oa_temp_c for d in profile]
        rad = [d.oa_radiation_wm2 for d in profile]
        # Sinusoid peaks at 14:00 at the configured max, bottoms 10 K lower at 02:00.
        assert oa[14] == pytest.approx(cfg.oa_temp_max, abs=1e-9)
        assert oa[2] == pytest.approx(cfg.oa_temp_max - cfg.oa_temp_swing, abs=1e-9)
        assert max(oa) == oa[14]
        # Radiation: zero outside 06..18, half-sine peak at noon.
        assert all(r == 0.0 for r in rad[:6])
        assert all(r == 0.0 for r in rad[19:])
        assert rad[12] == pytest.approx(cfg.radiation_peak_wm2, abs=1e-9)
        assert all(r >= 0.0 for r in rad)

    def test_occupancy_schedule(self):
        profile = synth_disturbances(0, CFG)  # day 0 is a Monday
        occ = [d.occupancy for d in profile]
        assert occ[CFG.occupied_start_hour] == CFG.occupants
        assert occ[CFG.occupied_end_hour - 1] == CFG.occupants
        assert occ[CFG.occupied_end_hour] == 0.0
        assert occ[0] == 0.0
        weekend = synth_disturbances(5, CFG)
        assert all(d.occupancy == 0.0 for d in weekend)

    def test_determinism_and_day_variation(self):
        a = synth_disturbances(3, CFG)
        b = synth_disturbances(3, CFG)
        assert a == b
        c = synth_disturbances(4, CFG)
        assert a[14].oa_temp_c != c[14].oa_temp_c

    def test_seed_changes_weather(self):
        other = TestbedConfig(rng_seed=99)
        assert synth_disturbances(0, CFG)[14].oa_temp_c != synth_disturbances(0, other)[14].oa_temp_c


class TestDrCalendar:
    def test_probability_zero_means_no_events(self):
        cal = generate_dr_calendar(10, 0.0, seed=1)
        assert len(cal) == 240
        assert all(v == NORMAL_POWER_LIMIT_W for v in cal.values())
        assert events_in_calendar(cal) == []

    def test_probability_one_means_one_event_per_day(self):
        cal = generate_dr_calendar(14, 1.0, seed=2)
        events = events_in_calendar(cal)
        assert len(events) == 14
        assert sorted(e.day for e in events) == list(range(14))
        for e in events:
            assert EVENT_HOUR_MIN <= e.start_hour <= EVENT_HOUR_MAX
            assert EVENT_LIMIT_MIN_W <= e.power_limit_w <= EVENT_LIMIT_MAX_W
            assert e.duration_hours == 1

    def test_event_bounds_across_seeds(self):
        for seed in range(20):
            for e in events_in_calendar(generate_dr_calendar(30, 0.5, seed=seed)):
                assert EVENT_HOUR_MIN <= e.start_hour <= EVENT_HOUR_MAX
                assert EVENT_LIMIT_MIN_W <= e.power_limit_w <= EVENT_LIMIT_MAX_W

    def test_determinism(self):
        assert generate_dr_calendar(7, 0.5, seed=3) == generate_dr_calendar(7, 0.5, seed=3)
        assert generate_dr_calendar(7, 1.0, seed=3) != generate_dr_calendar(7, 1.0, seed=4)

    def test_power_limit_lookup_off_calendar(self):
        cal = generate_dr_calendar(2, 1.0, seed=0)
        assert power_limit_at(cal, 9999) == NORMAL_POWER_LIMIT_W

    def test_invalid_probability(self):
        with pytest.raises(InvalidInputError):
            generate_dr_calendar(5, 1.5, seed=0)

    def test_calendar_roundtrip(self, tmp_path):
        cal = generate_dr_calendar(5, 1.0, seed=11)
        path = tmp_path / "calendar.json"
        save_calendar(cal, path)
        assert load_calendar(path) == cal

    def test_calendar_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(DeserializationError):
            load_calendar(path)


class TestExcitation:
    def test_rows_form_consistent_transitions(self, excitation):
        # Re-derive each row's outcome from its own features; the dataset must
        # be exactly the trajectory it claims to be.
        rows = excitation.rows
        assert len(excitation) == 31 * 24
        for i in range(0, len(rows), 37):  # spot-check a spread of rows
            t, sp, tz, oa, rad, occ, tz_next, q = rows[i]
            nxt, hvac = step(ZoneState(int(t), tz), Disturbance(oa, rad, occ), sp, CFG)
            assert nxt.zone_temp_c == pytest.approx(tz_next, rel=1e-12)
            assert hvac.cooling_rate_w == pytest.approx(q, rel=1e-12, abs=1e-9)

    def test_chained_states(self, excitation):
        tz = excitation["zone_temp_c"]
        tz_next = excitation["next_zone_temp_c"]
        assert np.array_equal(tz[1:], tz_next[:-1])
        hours = excitation["time_hour"]
        assert np.array_equal(hours, np.arange(len(excitation)))

    def test_setpoints_cover_grid(self, excitation):
        assert set(np.unique(excitation["setpoint_c"])) == {22.0, 23.0, 24.0, 25.0, 26.0}

    def test_determinism(self, testbed_cfg):
        a = run_excitation(2, testbed_cfg, seed=42)
        b = run_excitation(2, testbed_cfg, seed=42)
        assert np.array_equal(a.rows, b.rows)
        c = run_excitation(2, testbed_cfg, seed=43)
        assert not np.array_equal(a.rows, c.rows)

    def test_unknown_column(self, excitation):
        with pytest.raises(KeyError):
            excitation.column("bogus")

    def test_csv_roundtrip_byte_stable(self, tmp_path, testbed_cfg):
        data = run_excitation(2, testbed_cfg, seed=1)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        data.to_csv(p1)
        loaded = ExcitationData.from_csv(p1)
        assert loaded.rows.shape == data.rows.shape
        assert np.allclose(loaded.rows, data.rows, atol=5e-7)
        loaded.to_csv(p2)
        assert p1.read_bytes() == p2.read_bytes()
        header = p1.read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)

    def test_csv_errors(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        with pytest.raises(DeserializationError):
            ExcitationData.from_csv(empty)

        bad_header = tmp_path / "bad_header.csv"
        bad_header.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(DeserializationError, match="header"):
            ExcitationData.from_csv(bad_header)

        short_row = tmp_path / "short.csv"
        short_row.write_text(",".join(CSV_COLUMNS) + "\n1,2,3\n")
        with pytest.raises(DeserializationError, match=":2"):
            ExcitationData.from_csv(short_row)

        no_rows = tmp_path / "no_rows.csv"
        no_rows.write_text(",".join(CSV_COLUMNS) + "\n")
        with pytest.raises(DeserializationError, match="no data"):
            ExcitationData.from_csv(no_rows)

    def test_invalid_day_count(self, testbed_cfg):
        with pytest.raises(InvalidInputError):
            run_excitation(0, testbed_cfg, seed=0)


class TestConfigPersistence:
    def test_roundtrip(self, tmp_path):
        cfg = TestbedConfig(rng_seed=5, occupants=7)
        path = tmp_path / "cfg.json"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"rng_seed": 1, "wall_color": "blue"}')
        with pytest.raises(DeserializationError, match="wall_color"):
            load_config(path)

    def test_invalid_values_rejected(self):
        with pytest.raises(InvalidInputError):
            TestbedConfig(thermal_resistance=0.0)
        with pytest.raises(InvalidInputError):
            TestbedConfig(cooling_capacity=-10.0)
        with pytest.raises(InvalidInputError):
            TestbedConfig(occupied_start_hour=18, occupied_end_hour=9)
