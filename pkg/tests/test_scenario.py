import copy
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedersim.protection import CYCLE
from feedersim.scenario import (DEFAULT_RANGES, Placement, ScenarioError, build_devices,
                                builtin_scenario_dict, builtin_scenario_path, load_scenario,
                                placement_summary, sample_protection_params, scale_to_target,
                                scenario_from_dict, total_kw, with_overrides)
from feedersim.templates import builtin_templates, composition_summary, template_by_name

CATEGORY_TOTALS = {"Static": (1471.45, 30.00), "MA": (1986.26, 40.50), "MB": (470.99, 9.60),
           "MC": (196.00, 4.00), "MD": (780.14, 15.91), "Total": (4904.84, 100.0)}


def test_composition_matches_category_totals():
    summary = composition_summary(builtin_templates())
    for cat, (kw, pct) in CATEGORY_TOTALS.items():
        assert round(summary[cat]["kw"], 2) == kw, cat
        assert round(summary[cat]["percent"], 2) == pct, cat


def test_template_rows():
    school = template_by_name("school")
    assert len(school.devices) == 12
    chiller = school.devices[0]
    assert (chiller.appliance, chiller.motor_type, chiller.rating) == ("Chiller", "MA", 350.0)
    assert chiller.protections == {"P1", "P4", "P5"}
    hotel = template_by_name("Hotel")
    assert hotel.devices[0].protections == {"P4"}
    assert round(hotel.total_kw, 2) == 1904.93
    with pytest.raises(KeyError):
        template_by_name("hospital")


def test_uniform_scaling():
    placements = [Placement(t, "n", 1.0, t.name) for t in builtin_templates()]
    doubled = scale_to_target(placements, 2 * 4.904842)
    summary = placement_summary(doubled)
    assert round(summary["MA"]["kw"], 2) == 3972.52
    for cat in ("Static", "MA", "MB", "MC", "MD"):
        assert summary[cat]["percent"] == pytest.approx(
            composition_summary(builtin_templates())[cat]["percent"], rel=1e-12)
    assert total_kw(doubled) == pytest.approx(2 * 4904.842, rel=1e-12)
    with pytest.raises(ValueError):
        scale_to_target(placements, 0)


def test_device_ids_are_unique():
    placements = [Placement(t, "n", 1.0, t.name) for t in builtin_templates()] * 1
    ids = [d.id for d in build_devices(placements)]
    assert len(ids) == len(set(ids)) == 44


def devices():
    return build_devices([Placement(t, "n", 1.0, t.name) for t in builtin_templates()])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32))
def test_sampled_values_stay_in_ranges(seed):
    table = sample_protection_params(devices(), DEFAULT_RANGES, seed)
    for prot in table.values():
        for ptype, p in prot.voltage.items():
            r = DEFAULT_RANGES[ptype]
            assert r["V_tr"][0] <= p.V_tr <= r["V_tr"][1]
            assert r["T_tr"][0] <= p.T_tr <= r["T_tr"][1]
            assert r["V_rec"][0] <= p.V_rec <= r["V_rec"][1]
            assert r["T_rec"][0] <= p.T_rec <= r["T_rec"][1]
        if prot.thermal is not None:
            assert 0.054 <= prot.thermal.R_stall <= 0.086


def test_sampling_is_deterministic():
    a = sample_protection_params(devices(), rng_seed=7)
    b = sample_protection_params(devices(), rng_seed=7)
    c = sample_protection_params(devices(), rng_seed=8)
    assert a == b
    assert a != c


def test_p4_ranges_in_cycles():
    r = DEFAULT_RANGES["P4"]
    assert r["T_tr"] == pytest.approx((1 / 60, 5 / 60))
    assert r["T_rec"] == pytest.approx((2 * CYCLE, 8.5 * CYCLE))


def test_disabling_a_type_keeps_other_draws():
    all_on = sample_protection_params(devices(), rng_seed=3)
    only_p3 = sample_protection_params(devices(), rng_seed=3,
                                       enabled={p: p == "P3" for p in ("P1", "P2", "P3", "P4", "P5")})
    for dev, prot in only_p3.items():
        assert all(not p.activated for p in prot.voltage.values())
        if prot.thermal is not None:
            assert prot.thermal == all_on[dev].thermal


def test_load_shipped_scenario():
    sc = load_scenario(builtin_scenario_path("scenario_A"))
    assert len(sc.devices()) == 44
    assert len(sc.feeder.nodes) == 8
    assert sc.rng_seed == 42
    assert total_kw(sc.buildings) == pytest.approx(4904.84, abs=1e-6)
    assert sc.source.sag_schedule[0].v_depressed == 0.35
    b = load_scenario(builtin_scenario_path("scenario_B.json"))
    assert b.protection_overrides == {"P1": False, "P2": False, "P3": True, "P4": False,
                                      "P5": False}


def write(tmp_path, data, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def test_zip_sum_rejected(tmp_path):
    data = builtin_scenario_dict()
    data["buildings"]["zip"] = {"a_z": 0.5, "a_i": 0.3, "a_p": 0.3}
    with pytest.raises(ScenarioError) as info:
        load_scenario(write(tmp_path, data))
    assert any("zip" in p and "1.1" in p for p in info.value.problems)


def test_missing_seed_defaults_with_warning(tmp_path):
    data = builtin_scenario_dict()
    del data["simulation"]["rng_seed"]
    sc = load_scenario(write(tmp_path, data))
    assert sc.rng_seed == 0
    assert any("rng_seed" in w for w in sc.warnings)
    assert with_overrides(sc, seed=5).warnings == []


def test_unknown_keys_rejected():
    data = builtin_scenario_dict()
    data["simulation"]["dtt"] = 0.001
    with pytest.raises(ScenarioError, match="dtt"):
        scenario_from_dict(data)


def test_json_syntax_error_location(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "name": "x",\n  "feeder": {,\n}')
    with pytest.raises(ScenarioError) as info:
        load_scenario(p)
    assert "line 3" in str(info.value) and "column" in str(info.value)
    assert str(p) in str(info.value)


def test_missing_file():
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario("/nonexistent/scenario.json")


def test_all_violations_listed():
    data = copy.deepcopy(builtin_scenario_dict())
    data["simulation"]["dt"] = -1
    data["source"]["sags"].append({"t_start": 1.05, "t_end": 1.2, "v": 0.5})
    data["buildings"]["placements"][0]["node"] = "nowhere"
    data["feeder"]["branches"][0]["r"] = -0.5
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(data)
    text = "\n".join(info.value.problems)
    for needle in ("dt", "overlap", "nowhere", "resistance"):
        assert needle in text, needle


def test_sag_inside_settling_rejected():
    data = builtin_scenario_dict()
    data["source"]["sags"][0]["t_start"] = 0.1
    with pytest.raises(ScenarioError, match="settling"):
        scenario_from_dict(data)


def test_overrides():
    sc = scenario_from_dict(builtin_scenario_dict())
    out = with_overrides(sc, seed=9, duration=2.0, dt=0.0005)
    assert (out.rng_seed, out.duration, out.dt) == (9, 2.0, 0.0005)
    assert sc.duration == 10.0
    with pytest.raises(ScenarioError):
        with_overrides(sc, dt=-1.0)
