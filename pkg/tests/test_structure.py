import dataclasses

import numpy as np
import pytest
from scipy.optimize import root

from ebfsi.structure import (
    ContactPair,
    Material,
    StructuralState,
    StructureError,
    beam_internal_force,
    central_difference_step,
    critical_dt,
    folded_arc,
    make_model,
    membrane_internal_force,
    penalty_self_contact,
    strain_energy,
    total_energy,
    von_mises,
    zero_state,
)

FABRIC = Material(E=9.448e8, nu=0.4, rho=1154.25, thickness=7.6073e-5)
CORD = Material(E=2.951e10, nu=0.4, rho=1154.25, area=7.917e-6, inertia=4.99e-12)


def rot(ang):
    c, s = np.cos(ang), np.sin(ang)
    return np.array([[c, -s], [s, c]])


def membrane_model():
    nodes = np.array([[0.0, 0.0], [1.0, 0.1], [0.3, 0.9]])
    return make_model(nodes, membranes=[[0, 1, 2]], mem_material=FABRIC)


def beam_model():
    nodes = np.array([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])
    return make_model(nodes, beams=[[0, 1], [1, 2]], beam_material=CORD)


def test_membrane_undeformed_zero():
    model = membrane_model()
    f, st = membrane_internal_force(model, np.zeros((3, 2)))
    scale = FABRIC.E * FABRIC.thickness
    assert np.abs(f).max() < 1e-14 * scale
    assert np.abs(st["S"]).max() < 1e-14 * FABRIC.E
    assert np.abs(st["vm"]).max() < 1e-14 * FABRIC.E


def test_membrane_objectivity():
    model = membrane_model()
    rng = np.random.default_rng(0)
    scale = FABRIC.E * FABRIC.thickness  # force per length scale
    for _ in range(20):
        R = rot(rng.uniform(-np.pi, np.pi))
        t = rng.normal(size=2)
        u = model.nodes @ R.T - model.nodes + t
        f, _ = membrane_internal_force(model, u)
        assert np.abs(f).max() < 1e-10 * scale


def test_membrane_uniaxial_small_strain():
    # stretch along x with free lateral contraction: S_xx ~ E * eps
    eps = 1e-4
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    model = make_model(nodes, membranes=[[0, 1, 2], [1, 3, 2]], mem_material=FABRIC)
    u = np.zeros((4, 2))
    u[:, 0] = eps * nodes[:, 0]
    u[:, 1] = -FABRIC.nu * eps * nodes[:, 1]
    _, st = membrane_internal_force(model, u)
    for S in st["S"]:
        assert S[0, 0] == pytest.approx(FABRIC.E * eps, rel=0.01)
        assert abs(S[1, 1]) < 0.01 * abs(S[0, 0])


def test_membrane_energy_gradient_fd():
    model = membrane_model()
    rng = np.random.default_rng(1)
    u0 = 0.01 * rng.standard_normal((3, 2))
    f0, _ = membrane_internal_force(model, u0)
    st0 = zero_state(model)
    eps = 1e-7
    scale = np.abs(f0).max()
    for n in range(3):
        for c in range(2):
            up = u0.copy(); up[n, c] += eps
            um = u0.copy(); um[n, c] -= eps
            fd = (strain_energy(model, dataclasses.replace(st0, u=up))
                  - strain_energy(model, dataclasses.replace(st0, u=um))) / (2 * eps)
            assert fd == pytest.approx(f0[n, c], abs=1e-6 * scale)


def test_membrane_inversion_reported():
    model = membrane_model()
    u = np.zeros((3, 2))
    u[2] = [0.0, -2.0]  # flips the triangle
    with pytest.raises(StructureError):
        membrane_internal_force(model, u)


def test_beam_undeformed_and_axial():
    model = beam_model()
    f, mom = beam_internal_force(model, np.zeros((3, 2)), np.zeros(3))
    assert np.abs(f).max() == 0.0 and np.abs(mom).max() == 0.0
    # pure axial stretch: truss limit EA * delta / L
    delta = 1e-5
    u = np.zeros((3, 2))
    u[:, 0] = delta * model.nodes[:, 0]  # uniform strain per element
    f, mom = beam_internal_force(model, u, np.zeros(3))
    EA = CORD.E * CORD.area
    assert f[2, 0] == pytest.approx(EA * delta, rel=1e-9)
    assert f[0, 0] == pytest.approx(-EA * delta, rel=1e-9)


def test_beam_objectivity():
    model = beam_model()
    rng = np.random.default_rng(2)
    scale = CORD.E * CORD.area
    for _ in range(20):
        ang = rng.uniform(-np.pi, np.pi)
        R = rot(ang)
        t = rng.normal(size=2)
        u = model.nodes @ R.T - model.nodes + t
        th = np.full(3, ang)
        f, mom = beam_internal_force(model, u, th)
        assert np.abs(f).max() < 1e-10 * scale
        assert np.abs(mom).max() < 1e-10 * scale


def test_beam_energy_gradient_fd():
    model = beam_model()
    rng = np.random.default_rng(3)
    u0 = 0.01 * rng.standard_normal((3, 2))
    th0 = 0.05 * rng.standard_normal(3)
    f0, m0 = beam_internal_force(model, u0, th0)
    gen = np.column_stack([f0, m0])
    scale = np.abs(gen).max()
    st0 = zero_state(model)
    eps = 1e-7
    for n in range(3):
        for c in range(3):
            def energy(d):
                up = u0.copy(); tp = th0.copy()
                if c < 2:
                    up[n, c] += d
                else:
                    tp[n] += d
                return strain_energy(model, dataclasses.replace(st0, u=up, th=tp))
            fd = (energy(eps) - energy(-eps)) / (2 * eps)
            assert fd == pytest.approx(gen[n, c], abs=1e-6 * scale)


def test_cantilever_tip_deflection_beam_theory():
    # 50 elements, small tip load; corotational solution must match
    # P L^3 / (3 E I) within 1 percent.
    n = 50
    L = 1.0
    mat = Material(E=1.0e9, nu=0.3, rho=1000.0, area=1e-4, inertia=1e-8)
    nodes = np.column_stack([np.linspace(0, L, n + 1), np.zeros(n + 1)])
    fixed = np.zeros((n + 1, 3), dtype=bool)
    fixed[0] = True
    model = make_model(nodes, beams=np.column_stack([np.arange(n), np.arange(1, n + 1)]),
                       beam_material=mat, fixed=fixed)
    EI = mat.E * mat.inertia
    P = 3.0 * EI * (1e-3 * L) / L**3  # target deflection about 1e-3 L
    free = ~model.fixed.reshape(-1)

    def resid(q):
        u = np.zeros((n + 1, 3))
        u.reshape(-1)[free] = q
        f, mom = beam_internal_force(model, u[:, :2], u[:, 2])
        gen = np.column_stack([f, mom])
        gen[-1, 1] -= P
        return gen.reshape(-1)[free]

    # damped Newton with a finite-difference Jacobian (the generalized force
    # scales differ too much for hybr's internal scaling)
    # (the axial-force roundoff floor is about EA * eps / L, so the residual
    # tolerance stays well above machine noise)
    q = np.zeros(free.sum())
    for _ in range(30):
        r0 = resid(q)
        if np.abs(r0).max() < 1e-8 * P:
            break
        J = np.empty((q.size, q.size))
        for k in range(q.size):
            dq = 1e-7 * (1.0 + abs(q[k]))
            qp = q.copy()
            qp[k] += dq
            J[:, k] = (resid(qp) - r0) / dq
        q = q - np.linalg.solve(J, r0)
    assert np.abs(resid(q)).max() < 1e-6 * P
    u = np.zeros((n + 1, 3))
    u.reshape(-1)[free] = q
    tip = u[-1, 1]
    assert tip == pytest.approx(P * L**3 / (3 * EI), rel=0.01)


def test_central_difference_free_flight_exact():
    model = beam_model()
    st = zero_state(model)
    fext = np.zeros((3, 3))
    fext[:, 1] = 2.0 * model.mass[:, 1]  # uniform acceleration 2 in y
    dt = 0.4 * critical_dt(model)
    for _ in range(50):
        st = central_difference_step(st, fext, model, dt)
    assert np.abs(st.u[:, 1] - 0.5 * 2.0 * st.t**2).max() < 1e-12 * abs(st.u[:, 1]).max()


def test_central_difference_zero_force_rest():
    model = beam_model()
    st = zero_state(model)
    st2 = central_difference_step(st, np.zeros((3, 3)), model, 0.3 * critical_dt(model))
    assert np.abs(st2.u).max() == 0.0
    assert np.abs(st2.v).max() == 0.0


def test_central_difference_momentum_conserved_free():
    model = beam_model()
    rng = np.random.default_rng(5)
    st = dataclasses.replace(zero_state(model), v=rng.normal(size=(3, 2)),
                             u=0.001 * rng.normal(size=(3, 2)))
    p0 = (model.mass[:, :2] * st.v).sum(axis=0)
    dt = 0.3 * critical_dt(model)
    for _ in range(200):
        st = central_difference_step(st, np.zeros((3, 3)), model, dt)
    p1 = (model.mass[:, :2] * st.v).sum(axis=0)
    np.testing.assert_allclose(p1, p0, rtol=1e-12, atol=1e-14)


def test_central_difference_dt_guard():
    model = beam_model()
    with pytest.raises(StructureError):
        central_difference_step(zero_state(model), np.zeros((3, 3)), model,
                                10.0 * critical_dt(model))


def test_oscillator_energy_drift_windowed():
    # Axial spring-mass; pointwise leapfrog energy oscillates at (w dt)^2 / 4
    # amplitude, so drift is measured between period-averaged windows.
    fixed = np.zeros((2, 3), dtype=bool)
    fixed[0] = True
    fixed[1, 1] = True
    fixed[1, 2] = True
    model = make_model(np.array([[0.0, 0.0], [1.0, 0.0]]), beams=[[0, 1]],
                       beam_material=CORD, fixed=fixed)
    k = CORD.E * CORD.area
    omega = np.sqrt(k / model.mass[1, 0])
    dt = 0.1 / omega
    st = dataclasses.replace(zero_state(model), u=np.array([[0.0, 0.0], [1e-4, 0.0]]))
    E0 = total_energy(model, st)
    energies = []
    for _ in range(10000):
        st = central_difference_step(st, np.zeros((2, 3)), model, dt, check_dt=False)
        energies.append(total_energy(model, st))
    energies = np.asarray(energies)
    period = int(round(2 * np.pi / omega / dt))
    drift = abs(energies[-period:].mean() - energies[:period].mean()) / E0
    assert drift < 1e-3
    assert np.abs(energies - E0).max() / E0 < 5e-3


def test_contact_separated_zero_and_equilibrium():
    # Node pressed toward a fixed segment by a constant force relaxes to the
    # static penetration F / k_c.
    kc = 500.0
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.2]])
    fixed = np.zeros((3, 3), dtype=bool)
    fixed[0] = fixed[1] = True
    fixed[2, 0] = True
    fixed[2, 2] = True
    pair = ContactPair(nodes=np.array([2]), segments=np.array([[0, 1]]),
                       outward=1.0, stiffness=kc)
    model = make_model(nodes, beams=[[0, 1], [0, 2]],
                       beam_material=Material(E=1e4, nu=0.3, rho=1e4, area=1e-6,
                                              inertia=1e-12),
                       fixed=fixed, contact_pairs=[pair])
    st = zero_state(model)
    f = penalty_self_contact(model, st)
    assert np.abs(f).max() == 0.0  # separated

    F = 1.0
    fext = np.zeros((3, 3))
    fext[2, 1] = -F
    # time step and damping from the contact-spring frequency (the penalty
    # spring is stiffer than any element here)
    m2 = model.mass[2, 0]
    om_c = np.sqrt(kc / m2)
    dt = 0.2 / om_c
    cdamp = 2.0 * om_c
    for _ in range(8000):
        fd = fext.copy()
        fd[:, :2] -= cdamp * model.mass[:, :2] * st.v
        st = central_difference_step(st, fd, model, dt, check_dt=False)
    g = st.u[2, 1] + 0.2  # node height above the segment
    assert g < 0
    # equilibrium: spring term only (the soft tie beam contributes a little)
    assert -g == pytest.approx(F / kc, rel=0.05)
    # contact never pulls
    fc = penalty_self_contact(model, st)
    assert fc[2, 1] > 0.0


def test_von_mises_closed_forms():
    assert von_mises(np.array([[3.0e5, 0.0], [0.0, 0.0]])) == pytest.approx(3.0e5, rel=1e-12)
    assert von_mises(np.diag([7.0, 7.0, 7.0])) == pytest.approx(0.0, abs=1e-9)
    s = 5.0
    assert von_mises(np.array([[0.0, s], [s, 0.0]])) == pytest.approx(np.sqrt(3) * s, rel=1e-12)


def test_folded_arc_zero_angles_identity():
    model, st = folded_arc(2.0, 60.0, 24, [0.0, 0.0], CORD, hinge_every=6)
    assert np.abs(st.u).max() < 1e-12
    assert strain_energy(model, st) < 1e-18


def test_folded_arc_prestress_localized_at_hinges():
    model, st = folded_arc(2.0, 60.0, 24, [23.5, 27.5], CORD, hinge_every=6)
    f, mom = beam_internal_force(model, st.u, st.th)
    gen = np.abs(np.column_stack([f, mom])).max(axis=1)
    scale = gen.max()
    loaded = set(np.nonzero(gen > 1e-8 * scale)[0])
    hinges = {6, 12, 18}
    near_hinges = set()
    for h in hinges:
        near_hinges.update((h - 1, h, h + 1))
    assert loaded <= near_hinges
    assert strain_energy(model, st) > 0.0


def test_folded_arc_invalid_angles():
    with pytest.raises(StructureError):
        folded_arc(2.0, 60.0, 24, [95.0], CORD)
    with pytest.raises(StructureError):
        folded_arc(2.0, 60.0, 24, [-5.0], CORD)


def test_folded_release_energy_conserved():
    model, st = folded_arc(1.0, 50.0, 18, [15.0, 20.0], CORD, hinge_every=6)
    E0 = total_energy(model, st)
    assert E0 > 0
    dt = 0.3 * critical_dt(model)
    u_init = st.u.copy()
    for _ in range(4000):
        st = central_difference_step(st, np.zeros((model.num_nodes, 3)), model, dt,
                                     check_dt=False)
    E1 = total_energy(model, st)
    assert abs(E1 - E0) / E0 < 0.01
    # it moved (unfolding), and strain energy fell toward the reference shape
    assert np.abs(st.u - u_init).max() > 1e-6
    assert strain_energy(model, st) < 0.9 * E0
