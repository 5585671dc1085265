import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedersim.network import (Branch, CapBank, ConfigError, FeederModel, Sag, SolverError,
                               SourceModel, ZipLoad, apply_sag, build_admittance,
                               capbank_admittance, power_balance, solve_network, zip_current,
                               zip_power)

from oracles import divider_voltage

Z = 0.01 + 0.06j


def two_node(**kw):
    return FeederModel(nodes=["a", "b"], branches=[Branch("a", "b", Z)], **kw)


def no_devices(v):
    return np.zeros_like(v)


def test_two_node_admittance():
    Y = build_admittance(two_node())
    y = 1 / Z
    np.testing.assert_allclose(Y, [[y, -y], [-y, y]], rtol=1e-15)


def test_capbank_gates_one_diagonal_entry():
    cap = CapBank("c1", "b", q_kvar=500.0)
    feeder = two_node(cap_banks=[cap])
    on = build_admittance(feeder, {"c1": True})
    off = build_admittance(feeder, {"c1": False})
    diff = on - off
    assert np.count_nonzero(diff) == 1
    assert diff[1, 1] == pytest.approx(capbank_admittance(cap, 10.0))
    assert diff[1, 1] == pytest.approx(0.05j)


def test_transformer_tap_model():
    t = Branch("a", "b", 0.05j, tap=1.05)
    yff, yft, ytt = t.admittances()
    y = 1 / 0.05j
    assert (yff, yft, ytt) == pytest.approx((y / 1.05 ** 2, -y / 1.05, y))


def test_topology_problems():
    loop = FeederModel(nodes=["a", "b", "c"], branches=[Branch("a", "b", Z), Branch("b", "c", Z),
                                                        Branch("c", "a", Z)])
    with pytest.raises(ConfigError, match="loop|tree|radial"):
        build_admittance(loop)
    island = FeederModel(nodes=["a", "b", "c"], branches=[Branch("a", "b", Z)])
    assert island.problems()
    negative = FeederModel(nodes=["a", "b"], branches=[Branch("a", "b", -0.1 + 0.1j)])
    assert negative.problems()


def test_zip_power():
    load = ZipLoad(1.0 + 0j, 0.4, 0.3, 0.3)
    assert zip_power(load, 0.8).real == pytest.approx(0.796, abs=1e-12)
    assert zip_power(load, 1.0) == load.S0
    with pytest.raises(ValueError, match="sum"):
        ZipLoad(1.0, 0.5, 0.3, 0.3)


@given(v=st.floats(0.05, 1.3), ang=st.floats(-3, 3))
def test_zip_current_delivers_zip_power(v, ang):
    vc = v * np.exp(1j * ang)
    s0 = 0.8 + 0.3j
    i = zip_current(s0, 0.4, 0.3, 0.3, np.array([vc]))[0]
    assert vc * np.conj(i) == pytest.approx(zip_power(ZipLoad(s0), v), rel=1e-12)


def test_divider_with_stiff_source():
    z_load = 2.0 + 0.5j
    Y = build_admittance(two_node())
    src = SourceModel(mode="stiff", E_th=1.0 + 0j, Z_th=0j)
    sol = solve_network(Y, src, no_devices, 0.0, shunt=np.array([0, 1 / z_load]))
    assert abs(sol.voltages[1] - divider_voltage(1.0, Z, z_load)) < 1e-8
    assert sol.voltages[0] == 1.0


def test_no_load_voltage_equals_source():
    Y = build_admittance(two_node())
    src = SourceModel(E_th=1.02 + 0j)
    sol = solve_network(Y, src, no_devices, 0.0)
    np.testing.assert_allclose(sol.voltages, [1.02, 1.02], atol=1e-12)


@given(scale=st.floats(0.1, 2.0))
def test_thevenin_linearity(scale):
    Y = build_admittance(two_node())
    shunt = np.array([0, 1 / (1.5 + 0.4j)])
    base = solve_network(Y, SourceModel(E_th=1.0 + 0j), no_devices, 0.0, shunt=shunt)
    scaled = solve_network(Y, SourceModel(E_th=scale + 0j), no_devices, 0.0, shunt=shunt)
    np.testing.assert_allclose(scaled.voltages, scale * base.voltages, rtol=1e-10)
    z_total = 0.004 + 0.04j + Z + 1.5 + 0.4j
    assert base.voltages[1] == pytest.approx((1.5 + 0.4j) / z_total, rel=1e-10)


def test_apply_sag():
    src = SourceModel(E_th=1.0 + 0j, sag_schedule=[Sag(1.0, 1.1, 0.35)])
    assert apply_sag(src, 0.5) == 1.0
    assert apply_sag(src, 1.05) == pytest.approx(0.35)
    assert apply_sag(src, 1.0) == pytest.approx(0.35)
    assert apply_sag(src, 1.1) == 1.0
    assert apply_sag(SourceModel(), 3.0) == SourceModel().E_th


def test_overlapping_sags_rejected():
    src = SourceModel(sag_schedule=[Sag(1.0, 1.2, 0.5), Sag(1.1, 1.3, 0.4)])
    problems = src.problems()
    assert any("overlap" in p for p in problems)
    assert any("1.1" in p and "1.2" in p for p in problems)
    with pytest.raises(ConfigError):
        src.validate()


def radial3():
    return FeederModel(nodes=["h", "m", "e"], branches=[Branch("h", "m", Z), Branch("m", "e", Z)])


def zip_devices(s0):
    def f(v):
        return zip_current(s0, 0.4, 0.3, 0.3, v)
    return f


@settings(max_examples=50)
@given(e=st.floats(0.6, 1.1), drop=st.floats(0.01, 0.2))
def test_sag_propagation_is_monotone(e, drop):
    Y = build_admittance(radial3())
    dev = zip_devices(np.array([0, 0.1 + 0.03j, 0.1 + 0.03j]))
    hi = solve_network(Y, SourceModel(E_th=complex(e)), dev, 0.0, tol=1e-12, max_iter=200)
    lo = solve_network(Y, SourceModel(E_th=complex(e - drop)), dev, 0.0, tol=1e-12, max_iter=200)
    assert np.all(np.abs(lo.voltages) < np.abs(hi.voltages))


def test_solve_is_idempotent():
    Y = build_admittance(radial3())
    dev = zip_devices(np.array([0, 0.3 + 0.1j, 0.3 + 0.1j]))
    src = SourceModel()
    a = solve_network(Y, src, dev, 0.0, tol=1e-12, max_iter=200)
    b = solve_network(Y, src, dev, 0.0, v0=a.voltages, tol=1e-12, max_iter=200)
    np.testing.assert_allclose(b.voltages, a.voltages, atol=1e-12)
    assert b.iterations <= 2


def test_stalled_motor_drags_voltage_down():
    # a stall-like low impedance at the far node depresses every voltage
    Y = build_admittance(radial3())
    src = SourceModel()
    light = solve_network(Y, src, no_devices, 0.0, shunt=np.array([0, 0, 1 / (1.0 + 0.3j)]))
    heavy = solve_network(Y, src, no_devices, 0.0, shunt=np.array([0, 0, 1 / (0.054 + 0.092j)]))
    assert np.all(np.abs(heavy.voltages) < np.abs(light.voltages))
    assert abs(heavy.voltages[2]) < 0.7


def test_solver_error_carries_last_iterate():
    Y = build_admittance(radial3())
    dev = zip_devices(np.array([0, 0.3, 40.0]))  # far beyond the transfer limit
    with pytest.raises(SolverError) as info:
        solve_network(Y, SourceModel(), dev, 0.0, max_iter=20)
    assert info.value.voltages.shape == (3,)


@pytest.mark.parametrize("mode", ["stiff", "thevenin"])
def test_power_balance(mode):
    feeder = FeederModel(nodes=["h", "m", "e"], branches=[Branch("h", "m", Z), Branch("m", "e", Z)],
                         cap_banks=[CapBank("c", "e", 300.0)])
    Yb = build_admittance(feeder, {"c": False})
    cap = np.array([0, 0, capbank_admittance(feeder.cap_banks[0], feeder.base_mva)])
    src = SourceModel(mode=mode, Z_th=0j if mode == "stiff" else 0.004 + 0.04j)
    dev = zip_devices(np.array([0.1, 0.3 + 0.1j, 0.3 + 0.1j]))
    # the solver sees capacitors inside Y; the balance books them as consumption
    Y = build_admittance(feeder, {"c": True})
    sol = solve_network(Y, src, dev, 0.0, tol=1e-12, max_iter=200)
    bal = power_balance(Yb, cap, sol, src)
    assert abs(bal["mismatch"]) < 1e-9
    assert bal["losses"].real > 0
    assert bal["loads"].real == pytest.approx(
        sum(zip_power(ZipLoad(s), abs(v)).real for s, v in
            zip([0.1, 0.3 + 0.1j, 0.3 + 0.1j], sol.voltages)), rel=1e-9)
