"""Staggered fluid-structure coupling and cable master-slave kinematics.

The sub-grid cable treatment pairs every node of a geometrically resolved
slave surface (hexagonal cross-section polygons in 2D) with the closest point
of a topologically 1D beam chain; surface motion follows the beam rigidly
through the paired point's rotation, and surface loads return to the beam
nodes work-equivalently. Canopy facets coincide with beam elements, so their
surface nodes copy the structural kinematics directly.

The coupled loop is a conventional staggered scheme with midpoint motion
prediction: the interface is frozen at its predicted half-step position (with
current velocities) while the fluid advances, the new fluid state furnishes
interface loads, and the structure subcycles the central-difference integrator
under those loads. The coupling step shrinks when the structural critical step
would demand more subcycles than allowed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import embedded, fluid as fluid_mod, structure as struct_mod
from .embedded import EmbeddedSurface, classify
from .gas import GasModel, cons_array_to_prim
from .mesh import DualMesh

__all__ = [
    "MasterSlaveMap",
    "CouplingState",
    "SurfaceBinding",
    "CouplingError",
    "pair_slaves",
    "slave_kinematics",
    "slave_forces_to_master",
    "canopy_motion_transfer",
    "facet_loads_to_structure",
    "staggered_step",
]


class CouplingError(RuntimeError):
    """Model binding or transfer inconsistency."""


def _rot(th):
    c, s = np.cos(th), np.sin(th)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def _perp(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


@dataclass(frozen=True)
class MasterSlaveMap:
    """Pairing of slave surface nodes with master points on beam elements."""

    slave_nodes: np.ndarray   # (k,) surface node ids
    elem: np.ndarray          # (k,) beam element id
    s: np.ndarray             # (k,) parametric coordinate on the element
    d: np.ndarray             # (k, 2) initial offset x_S0 - x_M0


def pair_slaves(slave_xy: np.ndarray, slave_ids, model: struct_mod.StructuralModel,
                chain_elems, radius: float) -> MasterSlaveMap:
    """Pair each slave node with the closest point of the beam chain.

    Ties between equidistant elements break toward the lower element id.
    A slave farther than 10x the cross-section radius from every candidate
    element is a model error.
    """
    slave_xy = np.asarray(slave_xy, dtype=float)
    chain = np.asarray(chain_elems, dtype=np.int64)
    a = model.nodes[model.beams[chain, 0]]
    b = model.nodes[model.beams[chain, 1]]
    ab = b - a
    L2 = np.sum(ab * ab, axis=1)
    p = slave_xy[:, None, :]
    s = np.clip(np.sum((p - a[None]) * ab[None], axis=-1) / L2[None], 0.0, 1.0)
    proj = a[None] + s[..., None] * ab[None]
    dist = np.linalg.norm(p - proj, axis=-1)
    # argmin returns the first minimum, so equidistant ties break toward the
    # lower element id as long as the chain is listed in ascending order.
    if not np.all(np.diff(chain) >= 0):
        raise CouplingError("chain elements must be listed in ascending id order")
    kbest = np.argmin(dist, axis=1)
    best_d = dist[np.arange(len(slave_xy)), kbest]
    if np.any(best_d > 10.0 * radius):
        bad = np.nonzero(best_d > 10.0 * radius)[0]
        raise CouplingError(f"slave nodes too far from the beam chain: {bad[:5]}")
    elem = chain[kbest]
    spar = s[np.arange(len(slave_xy)), kbest]
    xm = model.nodes[model.beams[elem, 0]] + spar[:, None] * (
        model.nodes[model.beams[elem, 1]] - model.nodes[model.beams[elem, 0]]
    )
    return MasterSlaveMap(
        slave_nodes=np.asarray(slave_ids, dtype=np.int64),
        elem=elem,
        s=spar,
        d=slave_xy - xm,
    )


def slave_kinematics(ms: MasterSlaveMap, model: struct_mod.StructuralModel,
                     u: np.ndarray, th: np.ndarray, v: np.ndarray, om: np.ndarray):
    """Displacements and velocities of the slave nodes from the master beam.

    u_S = u_M + R(th_M) d - d and v_S = v_M + om_M x (R(th_M) d), with master
    kinematics interpolated linearly along the paired element (exact for any
    rigid motion of the element).
    """
    i = model.beams[ms.elem, 0]
    j = model.beams[ms.elem, 1]
    w = ms.s[:, None]
    u_m = (1.0 - w) * u[i] + w * u[j]
    v_m = (1.0 - w) * v[i] + w * v[j]
    th_m = (1.0 - ms.s) * th[i] + ms.s * th[j]
    om_m = (1.0 - ms.s) * om[i] + ms.s * om[j]
    Rd = np.einsum("kab,kb->ka", _rot(th_m), ms.d)
    u_s = u_m + Rd - ms.d
    v_s = v_m + om_m[:, None] * _perp(Rd)
    return u_s, v_s


def slave_forces_to_master(ms: MasterSlaveMap, f_slave: np.ndarray,
                           model: struct_mod.StructuralModel,
                           th: np.ndarray) -> np.ndarray:
    """Work-equivalent transfer of slave nodal forces to beam nodes.

    Per master point: f_M = sum f_S and m_M = sum (R d) x f_S; both are then
    distributed to the element nodes with the linear shape weights, which
    preserves virtual work for any interpolated virtual motion.
    """
    nn = model.num_nodes
    out = np.zeros((nn, 3))
    i = model.beams[ms.elem, 0]
    j = model.beams[ms.elem, 1]
    th_m = (1.0 - ms.s) * th[i] + ms.s * th[j]
    Rd = np.einsum("kab,kb->ka", _rot(th_m), ms.d)
    m_m = Rd[:, 0] * f_slave[:, 1] - Rd[:, 1] * f_slave[:, 0]
    w = ms.s
    np.add.at(out[:, 0], i, (1.0 - w) * f_slave[:, 0])
    np.add.at(out[:, 1], i, (1.0 - w) * f_slave[:, 1])
    np.add.at(out[:, 2], i, (1.0 - w) * m_m)
    np.add.at(out[:, 0], j, w * f_slave[:, 0])
    np.add.at(out[:, 1], j, w * f_slave[:, 1])
    np.add.at(out[:, 2], j, w * m_m)
    return out


@dataclass(frozen=True)
class SurfaceBinding:
    """Static correspondence between an embedded surface and the structure.

    canopy_surface_nodes[k] copies the kinematics of structural node
    canopy_struct_nodes[k]; ms_map (optional) drives the remaining (cable
    cross-section) nodes. Surface nodes bound to neither stay at their
    reference position (rigid forebody).
    """

    ref_nodes: np.ndarray
    facets: np.ndarray
    alpha: np.ndarray
    kind: np.ndarray
    elem_ref: np.ndarray
    canopy_surface_nodes: np.ndarray = None
    canopy_struct_nodes: np.ndarray = None
    ms_map: MasterSlaveMap = None

    def surface_at(self, model=None, state=None, predict_dt: float = 0.0) -> EmbeddedSurface:
        """Embedded surface at the (optionally midpoint-predicted) structural
        configuration.

        Both positions and velocities are predicted predict_dt ahead (the
        velocity through the stored acceleration when available); a frozen
        midpoint surface makes the staggered exchange time-centered.
        """
        nodes = self.ref_nodes.copy()
        vel = np.zeros_like(nodes)
        if state is not None:
            u = state.u + predict_dt * state.v
            th = state.th + predict_dt * state.om
            v = state.v if state.a is None else state.v + predict_dt * state.a
            om = state.om if state.al is None else state.om + predict_dt * state.al
            if self.canopy_surface_nodes is not None and self.canopy_surface_nodes.size:
                pos, vv = canopy_motion_transfer(self, model, u, v)
                nodes[self.canopy_surface_nodes] = pos
                vel[self.canopy_surface_nodes] = vv
            if self.ms_map is not None:
                u_s, v_s = slave_kinematics(self.ms_map, model, u, th, v, om)
                ids = self.ms_map.slave_nodes
                nodes[ids] = self.ref_nodes[ids] + u_s
                vel[ids] = v_s
        return EmbeddedSurface(
            nodes=nodes, facets=self.facets, alpha=self.alpha, kind=self.kind,
            vel=vel, elem_ref=self.elem_ref,
        )


def canopy_motion_transfer(binding: SurfaceBinding, model: struct_mod.StructuralModel,
                           u: np.ndarray, v: np.ndarray):
    """Surface nodes tied one-to-one to structural nodes track them exactly."""
    sid = binding.canopy_struct_nodes
    if sid is None or not len(sid):
        raise CouplingError("binding has no canopy correspondence")
    pos = model.nodes[sid] + u[sid]
    return pos, v[sid]


def facet_loads_to_structure(binding: SurfaceBinding, forces: np.ndarray,
                             model: struct_mod.StructuralModel,
                             th: np.ndarray) -> np.ndarray:
    """Distribute per-facet interface forces to structural generalized forces.

    Each facet's resultant is split half-and-half to its surface nodes;
    canopy-bound nodes push directly on their structural twins, slave nodes
    transfer through the master-slave map. Facets bound to neither (rigid
    forebody) are dropped.
    """
    nn = model.num_nodes
    out = np.zeros((nn, 3))
    ns = binding.ref_nodes.shape[0]
    f_nodal = np.zeros((ns, 2))
    np.add.at(f_nodal, binding.facets[:, 0], 0.5 * forces)
    np.add.at(f_nodal, binding.facets[:, 1], 0.5 * forces)
    if binding.canopy_surface_nodes is not None and binding.canopy_surface_nodes.size:
        np.add.at(out[:, 0], binding.canopy_struct_nodes,
                  f_nodal[binding.canopy_surface_nodes, 0])
        np.add.at(out[:, 1], binding.canopy_struct_nodes,
                  f_nodal[binding.canopy_surface_nodes, 1])
    if binding.ms_map is not None:
        out += slave_forces_to_master(
            binding.ms_map, f_nodal[binding.ms_map.slave_nodes], model, th
        )
    return out


@dataclass(frozen=True)
class CouplingState:
    """Staggered-stepping bookkeeping.

    f_prev holds the previous step's transferred load; the structure is driven
    by the trapezoidal average of consecutive loads, which keeps the staggered
    scheme second-order in the coupling step.
    """

    dt_fs: float
    t: float = 0.0
    step: int = 0
    max_subcycles: int = 64
    struct_safety: float = 0.8
    work_fluid_side: float = 0.0     # load . transferred interface velocity
    work_struct_side: float = 0.0    # load . actual structural displacement
    last_subcycles: int = 1
    f_prev: np.ndarray = None

    def __post_init__(self):
        if not (self.dt_fs > 0.0):
            raise ValueError("coupling step must be positive")


def staggered_step(fluid_sol, struct_state, coupling: CouplingState,
                   binding: SurfaceBinding, model, dual: DualMesh, gas: GasModel,
                   fluid_cfg, f_ext_struct=None, bins=None, prev_status=None,
                   fluid_prev=None):
    """One coupled step: motion transfer, fluid advance, loads, subcycled
    structure.

    Returns (fluid_sol, struct_state, coupling, status, diagnostics). The
    coupling step is lowered when the structural critical step would require
    more than max_subcycles substeps. With an unbound (rigid) surface the
    structure is untouched; with zero loads the structure advances exactly as
    in the uncoupled solver. fluid_prev supplies the second history level for
    the implicit fluid integrator (first step falls back to a one-level
    start).
    """
    dt = coupling.dt_fs
    has_structure = model is not None and (
        (binding.canopy_surface_nodes is not None and binding.canopy_surface_nodes.size)
        or binding.ms_map is not None
    )

    if has_structure:
        dt_cr = struct_mod.critical_dt(model) * coupling.struct_safety
        n_sub = max(1, int(np.ceil(dt / dt_cr)))
        while n_sub > coupling.max_subcycles:
            dt *= 0.5
            n_sub = max(1, int(np.ceil(dt / dt_cr)))
    else:
        n_sub = 0

    # (1) transfer surface motion, frozen at the predicted midpoint.
    surface = binding.surface_at(model, struct_state if has_structure else None,
                                 predict_dt=0.5 * dt)
    status = classify(dual, surface, bins=bins)
    W = fluid_sol.W
    if prev_status is not None:
        W = fluid_mod.refresh_uncovered(W, prev_status.active, status.active, dual)
        fluid_sol = replace(fluid_sol, W=W)

    # (2) advance the fluid over the coupling step.
    if fluid_cfg.integrator == "ssp2":
        fluid_sol = fluid_mod.advance_span(fluid_sol, dt, dual, gas, fluid_cfg, status, surface)
    else:
        fluid_sol = fluid_mod.advance_bdf2_or_fallback(
            fluid_sol, fluid_prev if fluid_prev is not None else fluid_sol,
            dt, dual, gas, fluid_cfg, status, surface,
            startup=fluid_prev is None,
        )

    diagnostics = {"t": fluid_sol.t, "dt_fs": dt, "subcycles": n_sub}
    work_f = coupling.work_fluid_side
    work_s = coupling.work_struct_side

    f_prev = coupling.f_prev
    if has_structure:
        # (3) interface loads from the new fluid state; the structure is
        # driven by the trapezoidal average of consecutive transferred loads
        # (keeps the staggered scheme second-order in dt). The one-sided wall
        # pressures are sampled with the interface velocity predicted at the
        # END of the step so the load is time-consistent with the new fluid
        # state; the geometry (and hence the crossing records) stays at the
        # midpoint configuration the fluid advanced with.
        V = cons_array_to_prim(fluid_sol.W, gas)
        end_surface = binding.surface_at(model, struct_state, predict_dt=dt)
        load_surface = surface.moved(surface.nodes, end_surface.vel)
        forces, load_diag = embedded.surface_loads(status, V, dual, load_surface, gas)
        diagnostics.update(load_diag)
        f_new = facet_loads_to_structure(binding, forces, model, struct_state.th)
        f_ext = 0.5 * (f_prev + f_new) if f_prev is not None else f_new
        f_prev = f_new
        if f_ext_struct is not None:
            f_ext = f_ext + f_ext_struct

        # Fluid-side interface work: the transmitted load against the
        # midpoint-predicted interface velocity the fluid advanced with
        # (work-equivalent to the facet-level sum through the transfer maps).
        v_pred = struct_state.v + (0.5 * dt) * struct_state.a \
            if struct_state.a is not None else struct_state.v
        om_pred = struct_state.om + (0.5 * dt) * struct_state.al \
            if struct_state.al is not None else struct_state.om
        work_f += dt * (float(np.sum(f_ext[:, :2] * v_pred))
                        + float(np.sum(f_ext[:, 2] * om_pred)))

        # (4) subcycle the structure under the frozen averaged load. The
        # stored acceleration is invalidated because the external load just
        # changed.
        u_before = struct_state.u.copy()
        th_before = struct_state.th.copy()
        struct_state = replace(struct_state, a=None, al=None)
        sub = dt / n_sub
        for _ in range(n_sub):
            struct_state = struct_mod.central_difference_step(
                struct_state, f_ext, model, sub, check_dt=False
            )
        work_s += float(np.sum(f_ext[:, :2] * (struct_state.u - u_before)))
        work_s += float(np.sum(f_ext[:, 2] * (struct_state.th - th_before)))

    coupling = replace(
        coupling, dt_fs=dt, t=coupling.t + dt, step=coupling.step + 1,
        work_fluid_side=work_f, work_struct_side=work_s, last_subcycles=max(n_sub, 1),
        f_prev=f_prev,
    )
    return fluid_sol, struct_state, coupling, status, diagnostics
