import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ebfsi.gas import (
    GasModel,
    NonPhysicalStateError,
    PrimitiveState,
    ConservativeState,
    cons_array_to_prim,
    conductivity,
    prim_array_to_cons,
    sound_speed,
    sutherland_viscosity,
    temperature,
    to_conservative,
    to_primitive,
    viscous_stress,
    vreman_eddy_viscosity,
)

CO2 = GasModel()
AIR = GasModel(R=287.0, gamma=1.4, mu_v_ratio=0.0)

finite_floats = st.floats(min_value=-50.0, max_value=50.0)
pos_floats = st.floats(min_value=1e-3, max_value=1e3)


def test_energy_zero_velocity():
    st_ = to_conservative(PrimitiveState(1.0, [0.0, 0.0], 1.0), AIR)
    assert st_.E == pytest.approx(2.5, rel=1e-14)
    assert np.all(st_.mom == 0.0)


def test_energy_scenario_one_freestream():
    gas = CO2
    rho, p = 0.0067, 260.0
    a = sound_speed(PrimitiveState(rho, [0.0, 0.0], p), gas)
    v = 1.8 * a
    W = to_conservative(PrimitiveState(rho, [v, 0.0], p), gas)
    assert a == pytest.approx(227.2, rel=1e-3)
    assert v == pytest.approx(408.9, rel=1e-3)
    assert W.E == pytest.approx(1348.0, rel=1e-3)


@settings(max_examples=200, deadline=None)
@given(rho=pos_floats, ma_x=st.floats(-5, 5), ma_y=st.floats(-5, 5), p=pos_floats)
def test_roundtrip_primitive_conservative(rho, ma_x, ma_y, p):
    a = float(np.sqrt(CO2.gamma * p / rho))
    V = PrimitiveState(rho, [ma_x * a, ma_y * a], p)
    back = to_primitive(to_conservative(V, CO2), CO2)
    assert back.rho == pytest.approx(rho, rel=1e-12)
    assert back.p == pytest.approx(p, rel=1e-12)
    np.testing.assert_allclose(back.v, V.v, rtol=1e-12, atol=1e-12 * a)


def test_to_primitive_zero_momentum():
    st_ = ConservativeState(2.0, [0.0, 0.0], 7.0)
    back = to_primitive(st_, AIR)
    assert np.all(back.v == 0.0)
    assert back.rho == 2.0


def test_to_primitive_reports_nonphysical():
    with pytest.raises(NonPhysicalStateError):
        ConservativeState(1.0, [10.0, 0.0], 1.0)  # negative internal energy
    W = np.array([[1.0, 0.0, 0.0, -1.0]])
    with pytest.raises(NonPhysicalStateError):
        cons_array_to_prim(W, AIR, check=True)


def test_array_roundtrip():
    rng = np.random.default_rng(7)
    V = np.column_stack([
        rng.uniform(0.1, 10, 100), rng.normal(0, 5, 100),
        rng.normal(0, 5, 100), rng.uniform(0.1, 10, 100),
    ])
    back = cons_array_to_prim(prim_array_to_cons(V, CO2), CO2)
    np.testing.assert_allclose(back, V, rtol=1e-12, atol=1e-14)


def test_temperature_scenario_one():
    T = temperature(PrimitiveState(0.0067, [0.0, 0.0], 260.0), CO2)
    assert T == pytest.approx(205.98, rel=1e-3)


def test_temperature_linearity_and_unit():
    T1 = temperature(PrimitiveState(2.0, [0.0], 100.0), CO2)
    T2 = temperature(PrimitiveState(2.0, [0.0], 200.0), CO2)
    assert T2 == pytest.approx(2.0 * T1, rel=1e-14)
    assert temperature(PrimitiveState(1.0, [0.0], CO2.R), CO2) == pytest.approx(1.0, rel=1e-14)


def test_sound_speed_formula_and_scaling():
    # gamma * p / rho = 1 gives a = 1
    g = GasModel(R=1.0, gamma=1.25)
    assert sound_speed(PrimitiveState(1.0, [0.0], 0.8), g) == pytest.approx(1.0, rel=1e-14)
    a1 = sound_speed(PrimitiveState(1.0, [0.0], 2.0), CO2)
    a2 = sound_speed(PrimitiveState(3.0, [0.0], 6.0), CO2)
    assert a1 == pytest.approx(a2, rel=1e-14)


def test_sutherland_reference_point():
    mu = sutherland_viscosity(240.0, CO2)
    assert mu == pytest.approx(1.57e-6 * np.sqrt(240.0) / 2.0, rel=1e-14)
    assert mu == pytest.approx(1.216e-5, rel=1e-3)


def test_sutherland_four_t0():
    T = 4.0 * CO2.T0
    mu = sutherland_viscosity(T, CO2)
    assert mu == pytest.approx(CO2.mu0 * 2.0 * np.sqrt(CO2.T0) / 1.25, rel=1e-14)


@settings(max_examples=100, deadline=None)
@given(T=st.floats(min_value=1.0, max_value=2000.0), dT=st.floats(min_value=1e-3, max_value=100.0))
def test_sutherland_monotone(T, dT):
    assert sutherland_viscosity(T + dT, CO2) > sutherland_viscosity(T, CO2)


def test_conductivity_cp_and_linearity():
    assert CO2.cp == pytest.approx(759.3, rel=1e-3)
    assert conductivity(0.0, CO2) == 0.0
    mu = 2.3e-5
    assert conductivity(3.0 * mu, CO2) == pytest.approx(3.0 * conductivity(mu, CO2), rel=1e-14)
    assert conductivity(mu, CO2) == pytest.approx(CO2.cp * mu / CO2.Pr, rel=1e-14)


def test_viscous_stress_zero_and_shear():
    assert np.all(viscous_stress(np.zeros((2, 2)), 1.0, 0.0) == 0.0)
    s = 0.7
    grad = np.zeros((2, 2))
    grad[0, 1] = s  # d v_x / d y
    tau = viscous_stress(grad, 2.0, 5.0)
    assert tau[0, 1] == pytest.approx(2.0 * s, rel=1e-14)
    assert tau[1, 0] == pytest.approx(2.0 * s, rel=1e-14)
    assert tau[0, 0] == 0.0 and tau[1, 1] == 0.0


def test_viscous_stress_dilatation():
    # uniform dilatation with the bulk-viscosity ratio of the default gas
    d = 0.3
    mu = 1.3e-5
    mu_v = 1000.0 * mu
    grad = np.eye(2) * (d / 2.0)
    tau = viscous_stress(grad, mu, mu_v)
    diag = 2.0 * mu * d / 2.0 + (mu_v - 2.0 / 3.0 * mu) * d
    assert tau[0, 0] == pytest.approx(diag, rel=1e-14)
    assert tau[1, 1] == pytest.approx(diag, rel=1e-14)
    assert tau[0, 1] == 0.0


@settings(max_examples=100, deadline=None)
@given(g=st.lists(finite_floats, min_size=4, max_size=4), mu=pos_floats, mu_v=pos_floats)
def test_viscous_stress_symmetric_linear(g, mu, mu_v):
    grad = np.array(g).reshape(2, 2)
    tau = viscous_stress(grad, mu, mu_v)
    np.testing.assert_allclose(tau, tau.T, rtol=0, atol=1e-12 * (1 + np.abs(tau).max()))
    tau2 = viscous_stress(2.0 * grad, mu, mu_v)
    np.testing.assert_allclose(tau2, 2.0 * tau, rtol=1e-12, atol=1e-12)


def test_vreman_quiescent_and_laminar_shear():
    assert vreman_eddy_viscosity(np.zeros((2, 2)), 1.0, 0.1, CO2) == 0.0
    grad = np.zeros((2, 2))
    grad[0, 1] = 3.0  # single nonzero gradient entry
    assert vreman_eddy_viscosity(grad, 1.0, 0.1, CO2) == pytest.approx(0.0, abs=1e-16)


def test_vreman_nonnegative_and_delta_scaling():
    rng = np.random.default_rng(3)
    for _ in range(50):
        grad = rng.normal(size=(2, 2))
        m1 = vreman_eddy_viscosity(grad, 1.2, 0.1, CO2)
        m2 = vreman_eddy_viscosity(grad, 1.2, 0.2, CO2)
        assert m1 >= 0.0
        assert m2 == pytest.approx(4.0 * m1, rel=1e-10, abs=1e-300)
