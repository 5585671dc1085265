"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""

import time

import numpy as np

from feedersim.cli import RunConfig, cmd_run
from feedersim.engine import run
from feedersim.protection import (ProtectionState, ThermalParams, ThermalState, OverloadParams,
                                  VoltageProtectionParams, step_overload_protection,
                                  step_thermal_protection, step_voltage_protection)
from feedersim.scenario import builtin_scenario_path
from feedersim.templates import builtin_templates, composition_summary
from feedersim.trace import TRACE_FILES, compare_runs

from acceptance_log import record
from conftest import RUNTIMES
from oracles import LiteralVoltageProtection, first_order_crossing
from scripted import DEVICE, fixed, single_device

DT = 0.001


def random_protection_case(rng):
    v_tr = rng.uniform(0.3, 0.9)
    p = VoltageProtectionParams(
        V_tr=v_tr, T_tr=rng.uniform(0.0, 0.08), V_rec=min(v_tr + rng.uniform(0.0, 0.2), 1.1),
        T_rec=rng.uniform(0.0, 0.08), max_trip_count=int(rng.integers(1, 5)),
        work_time=float(rng.choice([0.0, 0.0, 0.02])))
    n_seg = int(rng.integers(2, 9))
    levels = rng.uniform(0.0, 1.2, n_seg)
    # bias some levels onto the thresholds themselves to exercise strict comparisons
    snap = rng.random(n_seg)
    levels = np.where(snap < 0.1, p.V_tr, np.where(snap < 0.2, p.V_rec, levels))
    lengths = rng.integers(1, 150, n_seg)
    return p, np.repeat(levels, lengths)


def test_c1_protection_matches_literal_interpreter():
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    mismatches, tripped, reconnected = 0, 0, 0
    for _ in range(1000):
        p, trace = random_protection_case(rng)
        ref = LiteralVoltageProtection(p.activated, p.work_time, p.V_tr, p.T_tr, p.V_rec,
                                       p.T_rec, p.max_trip_count)
        s = ProtectionState()
        prev = False
        for k, v in enumerate(trace):
            v = float(v)
            s = step_voltage_protection(p, s, v, k * DT, DT)
            ref.loop(v)
            if (s.prot_trip != ref.ProtTrip or s.trip_counter != ref.TripCounter
                    or abs(s.trip_timer - ref.trip_timer) > 1e-9):
                mismatches += 1
                break
            tripped += s.prot_trip and not prev
            reconnected += prev and not s.prot_trip
            prev = s.prot_trip
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 10.0 and tripped > 0 and reconnected > 0
    record(1, "voltage protection equals literal interpreter on 1000 random traces", ok,
           f"{mismatches} mismatching traces, {tripped} trips, {reconnected} reconnects, "
           f"{elapsed:.2f} s")
    assert ok


def thermal_trip_time_stepped(dt):
    p = ThermalParams(T_th=0.15, T_therm=10.0, R_stall=0.054)
    s = ThermalState()
    for k in range(int(round(20.0 / dt))):
        s = step_thermal_protection(p, s, 2.0, True, dt)
        if s.tripped:
            return k * dt  # stamped with the step time, as the event log does
    return None


def test_c2_thermal_trip_time():
    expected = first_order_crossing(0.054 * 2.0 ** 2, 0.15, 10.0)
    got = thermal_trip_time_stepped(DT)
    ok = got is not None and abs(got - expected) <= 2 * DT and round(expected, 2) == 11.86
    record(2, "thermal trip at 11.86 s within 2 dt", ok,
           f"stepped {got:.4f} s, closed form {expected:.4f} s")
    assert ok


def test_c3_overload_trip_time():
    p = OverloadParams(I_tr=3.0, T_tr=0.04)
    s = ProtectionState()
    trip = None
    for k in range(2000):
        t = round(k * DT, 9)
        i = 3.5 if t >= 1.222 else 1.0
        s = step_overload_protection(p, s, i, DT, t)
        if s.prot_trip and trip is None:
            trip = t  # stamped with the step time, as the event log does
    ok = trip is not None and abs(trip - 1.262) <= DT + 1e-9 and s.prot_trip
    record(3, "overload trip at 1.262 s within 1 dt", ok, f"trip at {trip:.4f} s")
    assert ok


CATEGORY_TOTALS = {"Static": (1471.45, 30.00), "MA": (1986.26, 40.50), "MB": (470.99, 9.60),
           "MC": (196.00, 4.00), "MD": (780.14, 15.91), "Total": (4904.84, None)}


def test_c4_table_composition():
    summary = composition_summary(builtin_templates())
    wrong = []
    for cat, (kw, pct) in CATEGORY_TOTALS.items():
        if round(summary[cat]["kw"], 2) != kw:
            wrong.append(f"{cat} kW {summary[cat]['kw']:.3f}")
        if pct is not None and round(summary[cat]["percent"], 2) != pct:
            wrong.append(f"{cat} % {summary[cat]['percent']:.3f}")
    ok = not wrong
    record(4, "category composition matches the reference category totals", ok,
           ", ".join(wrong) or f"total {summary['Total']['kw']:.2f} kW")
    assert ok


def test_c5_scenario_ordering(scenario_a, trace_a, trace_b):
    sag = scenario_a.source.sag_schedule[0]
    ta, tb = RUNTIMES["scenario_A"], RUNTIMES["scenario_B"]
    report = compare_runs(trace_a, trace_b, window=2.0)
    ok = (abs(sag.t_end - sag.t_start - 0.1) < 1e-12 and sag.v_depressed == 0.35
          and scenario_a.duration == 10.0 and scenario_a.dt == DT
          and report.a_not_below_b and report.window_fraction_higher > 0.5
          and ta < 60 and tb < 60)
    record(5, "head voltage A >= B through the 2 s recovery window", ok,
           f"min diff {report.window_min_difference:+.4f} pu, A higher "
           f"{100 * report.window_fraction_higher:.1f}% of steps, runtimes "
           f"{ta:.1f} s / {tb:.1f} s")
    assert ok


def test_c6_contactor_then_overload_sequence():
    sc = single_device("MB", ["P2", "P4"], sags=[(1.0, 1.5, 0.3)], duration=6.0,
                       ranges={"P4": fixed(V_tr=0.5, T_tr=2 / 60, V_rec=0.7, T_rec=0.1),
                               "P2": fixed(I_tr=3.0, T_tr=0.04)},
                       max_trip_count={"P4": 10})
    tr = run(sc)
    seq = [f"{e.kind}:{e.cause}" for e in tr.device_events(DEVICE)
           if e.kind in ("trip", "reconnect")]
    j = tr.device_ids.index(DEVICE)
    last = tr.device_events(DEVICE)[-1].time
    permanent = not tr.connected[tr.time >= last, j].any()
    ok = seq == ["trip:P4", "reconnect:P4", "trip:P2"] and permanent
    record(6, "single MB motor shows trip:P4, reconnect:P4, trip:P2 (permanent)", ok,
           " -> ".join(seq))
    assert ok


def test_c7_trip_count_latch():
    sags = [(1.0, 1.6, 0.5), (3.0, 3.6, 0.5), (5.0, 5.6, 0.5), (7.0, 7.3, 0.2)]
    sc = single_device("MA", ["P1"], sags=sags, duration=9.0,
                       ranges={"P1": fixed(V_tr=0.85, T_tr=0.4, V_rec=0.95, T_rec=0.01)},
                       max_trip_count={"P1": 2}, motors={"MA": {"loading": 0.3}})
    tr = run(sc)
    seq = [f"{e.kind}:{e.cause}" for e in tr.device_events(DEVICE)
           if e.kind in ("trip", "reconnect")]
    j = tr.device_ids.index(DEVICE)
    second = [e.time for e in tr.device_events(DEVICE) if e.kind == "trip"][1]
    ok = (seq == ["trip:P1", "reconnect:P1", "trip:P1"]
          and not tr.connected[tr.time >= second, j].any())
    record(7, "P1 with max_trip_count 2 reconnects once then latches off", ok, " -> ".join(seq))
    assert ok


def test_c8_power_conservation(trace_a):
    worst = float(np.max(trace_a.mismatch))
    ok = len(trace_a.mismatch) == len(trace_a) and worst < 1e-5
    record(8, "source = loads + losses on every step of scenario A", ok,
           f"max |mismatch| {worst:.2e} pu")
    assert ok


def test_c9_byte_identical_outputs(tmp_path):
    path = builtin_scenario_path("scenario_A")
    outs = [tmp_path / "first", tmp_path / "second"]
    codes = [cmd_run(RunConfig(path, out, seed=42, deterministic=True)) for out in outs]
    same = [(outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in TRACE_FILES]
    ok = codes == [0, 0] and all(same)
    record(9, "two runs with the same seed give byte-identical CSVs", ok,
           ", ".join(f"{f}: {'same' if s else 'DIFFERENT'}" for f, s in zip(TRACE_FILES, same)))
    assert ok


def test_c10_step_size_robustness():
    coarse = thermal_trip_time_stepped(0.001)
    fine = thermal_trip_time_stepped(0.0005)
    ok = coarse is not None and fine is not None and abs(coarse - fine) <= 0.001 + 1e-12
    record(10, "thermal trip time moves by at most 1 ms when dt halves", ok,
           f"{coarse:.4f} s vs {fine:.4f} s")
    assert ok

