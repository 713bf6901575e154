"""Geometrically nonlinear structural dynamics in 2D.

Elements:
  * corotational Euler-Bernoulli beams (large rotation, small strain) whose
    internal forces are the exact gradient of an elongation + local-rotation
    strain energy, so objectivity and energy consistency hold to roundoff;
  * total-Lagrangian plane-stress St. Venant-Kirchhoff membrane triangles.

Time integration is the explicit central-difference scheme in its
velocity-Verlet form (same trajectory, velocities synchronized at integer
steps) with a lumped mass matrix. Self-contact is a one-sided node-to-segment
penalty between declared candidate pairs. Rotations are nodal scalars; per
element the local rotation increment must stay below pi.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Material",
    "StructuralModel",
    "StructuralState",
    "ContactPair",
    "StructureError",
    "make_model",
    "zero_state",
    "membrane_internal_force",
    "beam_internal_force",
    "assemble_internal",
    "strain_energy",
    "critical_dt",
    "central_difference_step",
    "penalty_self_contact",
    "von_mises",
    "folded_arc",
    "total_energy",
]


class StructureError(ValueError):
    """Invalid structural model or state."""


@dataclass(frozen=True)
class Material:
    """Elastic material record; thickness applies to membranes, area/inertia
    to beams."""

    E: float
    nu: float
    rho: float
    thickness: float = None
    area: float = None
    inertia: float = None

    def __post_init__(self):
        if not (self.E > 0.0):
            raise StructureError("Young's modulus must be positive")
        if not (0.0 <= self.nu < 0.5):
            raise StructureError("Poisson ratio must lie in [0, 0.5)")
        if not (self.rho > 0.0):
            raise StructureError("density must be positive")


@dataclass(frozen=True)
class ContactPair:
    """One-sided node-to-segment candidates: nodes may not penetrate the
    segments from the side the outward normal points to."""

    nodes: np.ndarray          # (k,) node ids
    segments: np.ndarray       # (m, 2) node id pairs
    outward: float = 1.0       # +1: outward normal is left of segment direction
    stiffness: float = 1.0e3


@dataclass(frozen=True)
class StructuralModel:
    """Immutable model: reference geometry, elements, materials, constraints."""

    nodes: np.ndarray          # (nn, 2) reference coordinates
    beams: np.ndarray          # (nb, 2)
    membranes: np.ndarray      # (nm, 3)
    fixed: np.ndarray          # (nn, 3) constrained dofs (ux, uy, theta)
    contact_pairs: tuple = ()
    # Precomputed element data.
    beam_L0: np.ndarray = None
    beam_beta0: np.ndarray = None
    beam_EA: np.ndarray = None
    beam_EI: np.ndarray = None
    beam_rhoA: np.ndarray = None
    beam_A: np.ndarray = None
    mem_Bm: np.ndarray = None       # (nm, 2, 2) inverse reference edge matrix
    mem_area0: np.ndarray = None
    mem_lam: np.ndarray = None      # plane-stress Lame parameter
    mem_mu: np.ndarray = None
    mem_th: np.ndarray = None
    mem_rho: np.ndarray = None
    mass: np.ndarray = None         # (nn, 3) lumped translational x2 + rotary

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]


@dataclass(frozen=True)
class StructuralState:
    """Kinematic state at time t with synchronized velocities.

    u: displacements; th: nodal rotations; v, om: velocities; a, al: last
    accelerations (reused by the next leapfrog step); element stress records
    from the latest force evaluation.
    """

    u: np.ndarray
    th: np.ndarray
    v: np.ndarray
    om: np.ndarray
    a: np.ndarray = None
    al: np.ndarray = None
    t: float = 0.0
    mem_stress: dict = None    # arrays: S, E, F, J, vm per membrane element

    def positions(self, model: StructuralModel) -> np.ndarray:
        return model.nodes + self.u


def zero_state(model: StructuralModel) -> StructuralState:
    nn = model.num_nodes
    return StructuralState(
        u=np.zeros((nn, 2)), th=np.zeros(nn), v=np.zeros((nn, 2)), om=np.zeros(nn)
    )


def make_model(nodes, beams=None, membranes=None, beam_material: Material = None,
               mem_material: Material = None, fixed=None,
               contact_pairs=()) -> StructuralModel:
    """Build a model and precompute element data and the lumped mass matrix.

    Beam rotary inertia is lumped as rho A L^3 / 24 per end node. Zero-length
    beams and degenerate membrane triangles are rejected here.
    """
    nodes = np.asarray(nodes, dtype=float)
    nn = nodes.shape[0]
    beams = np.asarray(beams, dtype=np.int64) if beams is not None else np.zeros((0, 2), np.int64)
    membranes = (
        np.asarray(membranes, dtype=np.int64) if membranes is not None else np.zeros((0, 3), np.int64)
    )
    if fixed is None:
        fixed = np.zeros((nn, 3), dtype=bool)
    else:
        fixed = np.asarray(fixed, dtype=bool)

    mass = np.zeros((nn, 3))
    if len(beams):
        mat = beam_material
        if mat is None or mat.area is None or mat.inertia is None:
            raise StructureError("beam material needs area and inertia")
        d = nodes[beams[:, 1]] - nodes[beams[:, 0]]
        L0 = np.hypot(d[:, 0], d[:, 1])
        if np.any(L0 <= 0.0):
            raise StructureError("zero-length beam element")
        beta0 = np.arctan2(d[:, 1], d[:, 0])
        beam_EA = np.full(len(beams), mat.E * mat.area)
        beam_EI = np.full(len(beams), mat.E * mat.inertia)
        beam_rhoA = np.full(len(beams), mat.rho * mat.area)
        beam_A = np.full(len(beams), mat.area)
        half = 0.5 * beam_rhoA * L0
        rot = beam_rhoA * L0**3 / 24.0
        for k in range(2):
            np.add.at(mass[:, 0], beams[:, k], half)
            np.add.at(mass[:, 1], beams[:, k], half)
            np.add.at(mass[:, 2], beams[:, k], rot)
    else:
        L0 = beta0 = beam_EA = beam_EI = beam_rhoA = beam_A = np.zeros(0)

    if len(membranes):
        mat = mem_material
        if mat is None or mat.thickness is None:
            raise StructureError("membrane material needs a thickness")
        X = nodes[membranes]
        Dm = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=-1)  # (nm,2,2)
        det = Dm[:, 0, 0] * Dm[:, 1, 1] - Dm[:, 0, 1] * Dm[:, 1, 0]
        if np.any(det <= 0.0):
            raise StructureError("degenerate or inverted reference membrane")
        area0 = 0.5 * det
        Bm = np.empty_like(Dm)
        Bm[:, 0, 0] = Dm[:, 1, 1] / det
        Bm[:, 1, 1] = Dm[:, 0, 0] / det
        Bm[:, 0, 1] = -Dm[:, 0, 1] / det
        Bm[:, 1, 0] = -Dm[:, 1, 0] / det
        mu = mat.E / (2.0 * (1.0 + mat.nu))
        lam_ps = mat.E * mat.nu / (1.0 - mat.nu**2)  # plane-stress Lame
        mem_lam = np.full(len(membranes), lam_ps)
        mem_mu = np.full(len(membranes), mu)
        mem_th = np.full(len(membranes), mat.thickness)
        mem_rho = np.full(len(membranes), mat.rho)
        mnode = mat.rho * mat.thickness * area0 / 3.0
        for k in range(3):
            np.add.at(mass[:, 0], membranes[:, k], mnode)
            np.add.at(mass[:, 1], membranes[:, k], mnode)
    else:
        Bm = np.zeros((0, 2, 2))
        area0 = mem_lam = mem_mu = mem_th = mem_rho = np.zeros(0)

    # Give rotation-free nodes a unit dummy inertia so divisions stay finite;
    # their rotation dof is never driven.
    no_rot = mass[:, 2] == 0.0
    mass[no_rot, 2] = 1.0
    if np.any(mass[:, 0] == 0.0):
        raise StructureError("node without mass (not referenced by any element)")

    return StructuralModel(
        nodes=nodes, beams=beams, membranes=membranes, fixed=fixed,
        contact_pairs=tuple(contact_pairs),
        beam_L0=L0, beam_beta0=beta0, beam_EA=beam_EA, beam_EI=beam_EI,
        beam_rhoA=beam_rhoA, beam_A=beam_A,
        mem_Bm=Bm, mem_area0=area0, mem_lam=mem_lam, mem_mu=mem_mu,
        mem_th=mem_th, mem_rho=mem_rho, mass=mass,
    )


def _wrap_pi(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def membrane_internal_force(model: StructuralModel, u: np.ndarray):
    """Plane-stress SVK internal forces and stress records for all membranes.

    Returns (f (nn, 2), stress dict). E = (F^T F - I)/2; S = lam tr(E) I +
    2 mu E with the plane-stress Lame parameter; nodal forces are the exact
    energy gradient. Raises StructureError on element inversion (det F <= 0).
    """
    nn = model.num_nodes
    f = np.zeros((nn, 2))
    nm = len(model.membranes)
    if nm == 0:
        return f, {"S": np.zeros((0, 2, 2)), "E": np.zeros((0, 2, 2)),
                   "F": np.zeros((0, 2, 2)), "J": np.zeros(0), "vm": np.zeros(0)}
    x = model.nodes + u
    X = x[model.membranes]
    ds = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=-1)
    F = ds @ model.mem_Bm
    J = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    if np.any(J <= 0.0):
        raise StructureError(f"inverted membrane element(s): {np.nonzero(J <= 0)[0][:5]}")
    Ft = np.swapaxes(F, -1, -2)
    Eg = 0.5 * (Ft @ F - np.eye(2))
    trE = Eg[:, 0, 0] + Eg[:, 1, 1]
    S = model.mem_lam[:, None, None] * trE[:, None, None] * np.eye(2) + 2.0 * model.mem_mu[:, None, None] * Eg
    P = F @ S
    coeff = (model.mem_area0 * model.mem_th)[:, None, None]
    H = coeff * (P @ np.swapaxes(model.mem_Bm, -1, -2))  # columns: forces on nodes 1, 2
    f1 = H[:, :, 0]
    f2 = H[:, :, 1]
    f0 = -(f1 + f2)
    for k, fk in enumerate((f0, f1, f2)):
        np.add.at(f, model.membranes[:, k], fk)
    sigma = (F @ S @ Ft) / J[:, None, None]
    vm = np.sqrt(
        sigma[:, 0, 0] ** 2 + sigma[:, 1, 1] ** 2
        - sigma[:, 0, 0] * sigma[:, 1, 1] + 3.0 * sigma[:, 0, 1] ** 2
    )
    return f, {"S": S, "E": Eg, "F": F, "J": J, "vm": vm}


def beam_internal_force(model: StructuralModel, u: np.ndarray, th: np.ndarray):
    """Corotational Euler-Bernoulli internal forces/moments for all beams.

    Local measures: elongation L - L0 and end rotations relative to the
    rotated chord; forces are the exact gradient of the quadratic local
    energy, so rigid motions produce exactly zero force.
    """
    nn = model.num_nodes
    f = np.zeros((nn, 2))
    m = np.zeros(nn)
    if len(model.beams) == 0:
        return f, m
    i, j = model.beams[:, 0], model.beams[:, 1]
    x = model.nodes + u
    d = x[j] - x[i]
    L = np.hypot(d[:, 0], d[:, 1])
    beta = np.arctan2(d[:, 1], d[:, 0])
    chi = beta - model.beam_beta0
    th1 = _wrap_pi(th[i] - chi)
    th2 = _wrap_pi(th[j] - chi)
    ubar = L - model.beam_L0
    N = model.beam_EA * ubar / model.beam_L0
    M1 = model.beam_EI / model.beam_L0 * (4.0 * th1 + 2.0 * th2)
    M2 = model.beam_EI / model.beam_L0 * (2.0 * th1 + 4.0 * th2)
    r = d / L[:, None]
    tvec = np.column_stack([-r[:, 1], r[:, 0]])
    fj = N[:, None] * r - ((M1 + M2) / L)[:, None] * tvec
    np.add.at(f, j, fj)
    np.add.at(f, i, -fj)
    np.add.at(m, i, M1)
    np.add.at(m, j, M2)
    return f, m


def assemble_internal(model: StructuralModel, state: StructuralState):
    """Total internal generalized forces (nn, 3) and membrane stress records."""
    fm, stress = membrane_internal_force(model, state.u)
    fb, mb = beam_internal_force(model, state.u, state.th)
    out = np.zeros((model.num_nodes, 3))
    out[:, :2] = fm + fb
    out[:, 2] = mb
    return out, stress


def strain_energy(model: StructuralModel, state: StructuralState) -> float:
    """Stored elastic energy of beams and membranes."""
    total = 0.0
    if len(model.beams):
        i, j = model.beams[:, 0], model.beams[:, 1]
        x = model.nodes + state.u
        d = x[j] - x[i]
        L = np.hypot(d[:, 0], d[:, 1])
        beta = np.arctan2(d[:, 1], d[:, 0])
        chi = beta - model.beam_beta0
        th1 = _wrap_pi(state.th[i] - chi)
        th2 = _wrap_pi(state.th[j] - chi)
        ubar = L - model.beam_L0
        total += float(np.sum(0.5 * model.beam_EA * ubar**2 / model.beam_L0))
        total += float(np.sum(model.beam_EI / model.beam_L0
                              * (2.0 * th1**2 + 2.0 * th1 * th2 + 2.0 * th2**2)))
    if len(model.membranes):
        x = model.nodes + state.u
        X = x[model.membranes]
        ds = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=-1)
        F = ds @ model.mem_Bm
        Ft = np.swapaxes(F, -1, -2)
        Eg = 0.5 * (Ft @ F - np.eye(2))
        trE = Eg[:, 0, 0] + Eg[:, 1, 1]
        EE = np.sum(Eg * Eg, axis=(1, 2))
        psi = 0.5 * model.mem_lam * trE**2 + model.mem_mu * EE
        total += float(np.sum(model.mem_area0 * model.mem_th * psi))
    return total


def kinetic_energy(model: StructuralModel, state: StructuralState) -> float:
    ke = 0.5 * np.sum(model.mass[:, :2] * state.v**2)
    rot_active = model.mass[:, 2] * (state.om**2)
    ke += 0.5 * float(np.sum(rot_active[_rotational_nodes(model)]))
    return float(ke)


def total_energy(model: StructuralModel, state: StructuralState) -> float:
    return strain_energy(model, state) + kinetic_energy(model, state)


def _rotational_nodes(model: StructuralModel) -> np.ndarray:
    mask = np.zeros(model.num_nodes, dtype=bool)
    if len(model.beams):
        mask[model.beams.ravel()] = True
    return mask


def critical_dt(model: StructuralModel) -> float:
    """Estimated critical explicit step 2/omega_max over all elements."""
    omegas = [0.0]
    if len(model.beams):
        c = np.sqrt(model.beam_EA / model.beam_rhoA)
        omegas.append(float(np.max(2.0 * c / model.beam_L0)))
        with np.errstate(divide="ignore", invalid="ignore"):
            wb = 12.0 * np.sqrt(model.beam_EI / model.beam_rhoA) / model.beam_L0**2
        omegas.append(float(np.max(wb)))
    if len(model.membranes):
        lam, mu = model.mem_lam, model.mem_mu
        cd = np.sqrt((lam + 2.0 * mu) / model.mem_rho)
        X = model.nodes[model.membranes]
        emax = np.max(
            [np.hypot(*(X[:, (k + 1) % 3] - X[:, k]).T) for k in range(3)], axis=0
        )
        hmin = 2.0 * model.mem_area0 / emax
        omegas.append(float(np.max(2.0 * cd / hmin)))
    w = max(omegas)
    if w == 0.0:
        raise StructureError("model has no elements")
    return 2.0 / w


def penalty_self_contact(model: StructuralModel, state: StructuralState) -> np.ndarray:
    """One-sided node-to-segment penalty forces over declared candidate pairs.

    A node at signed gap g < 0 behind a segment's outward normal receives
    k_c |g| along that normal; the opposite reaction is distributed to the
    segment nodes with the linear shape weights. Separated pairs contribute
    exactly zero.
    """
    f = np.zeros((model.num_nodes, 2))
    x = model.nodes + state.u
    for pair in model.contact_pairs:
        nodes = np.asarray(pair.nodes, dtype=np.int64)
        segs = np.asarray(pair.segments, dtype=np.int64)
        if nodes.size == 0 or segs.size == 0:
            continue
        p = x[nodes][:, None, :]            # (k, 1, 2)
        a = x[segs[:, 0]][None, :, :]       # (1, m, 2)
        b = x[segs[:, 1]][None, :, :]
        ab = b - a
        L2 = np.sum(ab * ab, axis=-1)
        s = np.clip(np.sum((p - a) * ab, axis=-1) / L2, 0.0, 1.0)
        proj = a + s[..., None] * ab
        n = np.stack([-ab[..., 1], ab[..., 0]], axis=-1)
        n = pair.outward * n / np.sqrt(L2)[..., None]
        g = np.sum((p - proj) * n, axis=-1)   # (k, m)
        pen = g < 0.0
        # A node may touch several segments; accumulate all penetrations.
        if not np.any(pen):
            continue
        kidx, midx = np.nonzero(pen)
        # Skip self-references (node is an endpoint of the segment).
        own = (nodes[kidx] == segs[midx, 0]) | (nodes[kidx] == segs[midx, 1])
        kidx, midx = kidx[~own], midx[~own]
        if kidx.size == 0:
            continue
        nrm = n[0]
        force = pair.stiffness * (-g[kidx, midx])[:, None] * nrm[midx]
        np.add.at(f, nodes[kidx], force)
        w2 = s[kidx, midx][:, None]
        np.add.at(f, segs[midx, 0], -(1.0 - w2) * force)
        np.add.at(f, segs[midx, 1], -w2 * force)
    return f


def central_difference_step(state: StructuralState, f_ext: np.ndarray,
                            model: StructuralModel, dt: float,
                            prescribed=None, contact: bool = True,
                            check_dt: bool = True) -> StructuralState:
    """Advance one explicit step (velocity-Verlet form of central difference).

    f_ext: (nn, 3) external generalized forces held constant over the step.
    prescribed: optional (mask (nn, 3), u_fun(t) -> (nn, 2), th values ignored
    when unconstrained) ... supplied as (mask, u_target, v_target) arrays at
    the END of the step. Raises StructureError when dt exceeds the estimated
    critical step.
    """
    if check_dt:
        dt_cr = critical_dt(model)
        if dt > dt_cr:
            raise StructureError(f"dt={dt} above estimated critical step {dt_cr}")
    nn = model.num_nodes
    minv = 1.0 / model.mass

    def accel(st: StructuralState):
        f_int, stress = assemble_internal(model, st)
        f_tot = np.asarray(f_ext, dtype=float) - f_int
        if contact and model.contact_pairs:
            f_tot[:, :2] += penalty_self_contact(model, st)
        a = f_tot[:, :2] * minv[:, :2]
        al = f_tot[:, 2] * minv[:, 2]
        a[model.fixed[:, :2]] = 0.0
        al[model.fixed[:, 2]] = 0.0
        al[~_rotational_nodes(model)] = 0.0
        return a, al, stress

    if state.a is None:
        a0, al0, _ = accel(state)
    else:
        a0, al0 = state.a, state.al

    v_half = state.v + 0.5 * dt * a0
    om_half = state.om + 0.5 * dt * al0
    u1 = state.u + dt * v_half
    th1 = state.th + dt * om_half
    u1[model.fixed[:, :2]] = state.u[model.fixed[:, :2]]
    th1[model.fixed[:, 2]] = state.th[model.fixed[:, 2]]
    if prescribed is not None:
        mask, u_tgt, v_tgt = prescribed
        u1[mask[:, :2]] = u_tgt[mask[:, :2]]
    mid = replace(state, u=u1, th=th1)
    a1, al1, stress = accel(mid)
    v1 = v_half + 0.5 * dt * a1
    om1 = om_half + 0.5 * dt * al1
    v1[model.fixed[:, :2]] = 0.0
    om1[model.fixed[:, 2]] = 0.0
    if prescribed is not None:
        mask, u_tgt, v_tgt = prescribed
        v1[mask[:, :2]] = v_tgt[mask[:, :2]]
    return StructuralState(
        u=u1, th=th1, v=v1, om=om1, a=a1, al=al1, t=state.t + dt, mem_stress=stress
    )


def von_mises(sigma: np.ndarray) -> np.ndarray:
    """Von Mises invariant of a Cauchy stress tensor.

    Accepts (..., 2, 2) (interpreted as plane stress, sigma_33 = 0) or
    (..., 3, 3) arrays.
    """
    s = np.asarray(sigma, dtype=float)
    if s.shape[-1] == 2:
        pad = np.zeros(s.shape[:-2] + (3, 3))
        pad[..., :2, :2] = s
        s = pad
    tr = np.trace(s, axis1=-2, axis2=-1)[..., None, None] / 3.0
    dev = s - tr * np.eye(3)
    return np.sqrt(1.5 * np.sum(dev * dev, axis=(-2, -1)))


def folded_arc(radius: float, span_deg: float, n_elems: int,
               fold_angles_deg, material: Material, hinge_every: int = None,
               center=(0.0, 0.0)):
    """Reference circular arc of beams plus a folded initial state with
    prestress.

    The stress-free reference arc spans span_deg degrees of a circle. The
    folded configuration rigidly rotates each gore (the chain piece between
    interior hinge nodes): measured from the unfolded direction, the gores
    alternate between +first and -second fold angle (the pattern repeats when
    more hinges than angles are requested). Gore interiors stay unstrained
    because nodal rotations follow the rigid rotation; a hinge node takes the
    mean rotation of its two gores, so exactly the hinge-adjacent elements
    carry bending prestress. Fold angles must lie in [0, 90) degrees; zero
    angles reproduce the reference with no prestress.

    Returns (model, folded_state).
    """
    fold_angles = np.atleast_1d(np.asarray(fold_angles_deg, dtype=float))
    if np.any((fold_angles < 0.0) | (fold_angles >= 90.0)):
        raise StructureError("fold angles must lie in [0, 90) degrees")
    phi = np.radians(np.linspace(-span_deg / 2.0, span_deg / 2.0, n_elems + 1))
    ref = np.column_stack([
        center[0] + radius * np.sin(phi),
        center[1] + radius * np.cos(phi),
    ])
    beams = np.column_stack([np.arange(n_elems), np.arange(1, n_elems + 1)])
    model = make_model(ref, beams=beams, beam_material=material)

    if hinge_every is None:
        hinge_every = max(n_elems // (len(fold_angles) + 1), 1)
    hinges = list(range(hinge_every, n_elems, hinge_every))
    x = ref.copy()
    gore_rot = np.zeros(n_elems + 1)
    cum = 0.0
    for k, h in enumerate(hinges):
        gore = k + 1
        target = np.radians(fold_angles[k % len(fold_angles)]) * (1.0 if gore % 2 else -1.0)
        delta = target - cum
        cum = target
        c, s = np.cos(delta), np.sin(delta)
        Rm = np.array([[c, -s], [s, c]])
        pivot = x[h].copy()
        x[h + 1 :] = (x[h + 1 :] - pivot) @ Rm.T + pivot
        gore_rot[h + 1 :] += delta
    # Hinge nodes take the mean rotation of their two gores.
    th = gore_rot.copy()
    for h in hinges:
        th[h] = 0.5 * (gore_rot[h - 1] + gore_rot[h + 1])
    nn = model.num_nodes
    state = StructuralState(
        u=x - ref, th=th, v=np.zeros((nn, 2)), om=np.zeros(nn)
    )
    return model, state
