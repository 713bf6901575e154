"""Shipped verification and demonstration cases.

Each builder turns a ScenarioConfig into the meshes, surfaces, bindings and
solver configs the phased runner consumes. Case drivers for the self-contained
cases (sod, coupon, porous_membrane, piston) live here too; the embedded-body
flow cases share the phase machinery in runner.py.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import embedded, fluid as fluid_mod, mesh as mesh_mod, riemann, structure as struct_mod
from .couple import CouplingState, MasterSlaveMap, SurfaceBinding, pair_slaves, staggered_step
from .embedded import EmbeddedSurface, KIND_CABLE, KIND_CANOPY, KIND_RIGID, classify
from .fluid import FluidConfig, FluidSolution
from .gas import GasModel, cons_array_to_prim, prim_array_to_cons, sound_speed
from .mesh import adapt, build_dual, build_kuhn_grid, hessian_indicator, lsq_gradients
from .structure import ContactPair, Material, StructuralState, folded_arc, make_model, zero_state

__all__ = [
    "fluid_config_from", "drag_by_kind", "vm_stats", "mach_number",
    "initial_refinement", "shock_standoff",
    "build_sod", "run_sod",
    "build_coupon", "run_coupon",
    "build_porous_membrane", "run_porous_membrane",
    "build_piston", "run_piston",
    "build_bluffbody", "build_parachute2d",
    "circle_polygon",
]

FLOW_DIR = np.array([1.0, 0.0])  # all shipped cases blow along +x

TAG_LEFT, TAG_RIGHT, TAG_BOTTOM, TAG_TOP = 1, 2, 3, 4
ALL_FARFIELD = {1: "farfield", 2: "farfield", 3: "farfield", 4: "farfield"}
ALL_WALL = {1: "wall", 2: "wall", 3: "wall", 4: "wall"}


def fluid_config_from(cfg, boundary_kinds) -> FluidConfig:
    return FluidConfig(
        cfl=cfg.cfl, integrator=cfg.integrator, limiter=cfg.limiter,
        muscl=cfg.muscl, extrapolation=cfg.extrapolation, viscous=cfg.viscous,
        turbulence=cfg.turbulence, entropy_fix=cfg.entropy_fix,
        farfield=cfg.freestream_primitive(), boundary_kinds=dict(boundary_kinds),
    )


def mach_number(V: np.ndarray, gas: GasModel) -> np.ndarray:
    return np.hypot(V[:, 1], V[:, 2]) / np.sqrt(gas.gamma * V[:, 3] / V[:, 0])


def drag_by_kind(forces: np.ndarray, surface: EmbeddedSurface) -> dict:
    """Axial (flow-aligned) force totals split by facet kind."""
    axial = forces @ FLOW_DIR
    total = float(axial.sum())
    canopy = float(axial[surface.kind == KIND_CANOPY].sum())
    cable = float(axial[surface.kind == KIND_CABLE].sum())
    return {"drag_total": total, "drag_canopy": canopy, "drag_cable": cable}


def vm_stats(model, state: StructuralState, topk: int, clip_quantile: float = 1.0):
    """(max, top-k mean) of the von Mises field.

    Membrane elements use the plane-stress Cauchy invariant; beam elements the
    axial stress magnitude. Optional quantile clipping drops outliers above
    the given quantile before the top-k average.
    """
    vals = []
    if state.mem_stress is not None and len(state.mem_stress.get("vm", ())):
        vals.append(np.asarray(state.mem_stress["vm"]))
    if model is not None and len(model.beams):
        i, j = model.beams[:, 0], model.beams[:, 1]
        x = model.nodes + state.u
        L = np.hypot(*(x[j] - x[i]).T)
        N = model.beam_EA * (L - model.beam_L0) / model.beam_L0
        vals.append(np.abs(N) / model.beam_A)  # uniaxial: vm = |sigma_axial|
    if not vals:
        return 0.0, 0.0
    vm = np.concatenate(vals)
    if clip_quantile < 1.0 and vm.size > 4:
        vm = vm[vm <= np.quantile(vm, clip_quantile)]
    if vm.size == 0:
        return 0.0, 0.0
    k = min(topk, vm.size)
    top = np.partition(vm, -k)[-k:]
    return float(vm.max()), float(top.mean())


def initial_refinement(mesh, dual, surface, rounds, vertex_budget,
                       fields=None, extra_fraction=0.0):
    """Refine around an embedded surface: wall-adjacent and doubly-crossed
    edges plus (optionally) the largest triangles near the surface."""
    for _ in range(rounds):
        status = classify(dual, surface, validate=False)
        marked_edges = embedded.doubly_intersected_edges(dual, surface, status)
        crossed = status.edge_ncross > 0
        tri_marked = crossed[dual.tri_edge].any(axis=1)
        res = adapt(mesh, dual, tri_marked.astype(float), 0.5, fields=fields,
                    marked_edges=marked_edges, vertex_budget=vertex_budget)
        mesh, dual, fields = res.mesh, res.dual, res.fields
        if not res.refined:
            break
    return mesh, dual, fields


def shock_standoff(verts, V, gas: GasModel, nose_x: float, band: float):
    """Distance from the nose to the first subsonic point on the upstream
    stagnation line (supersonic flow along +x assumed)."""
    sel = (np.abs(verts[:, 1]) < band) & (verts[:, 0] < nose_x)
    if not np.any(sel):
        return np.nan
    x = verts[sel, 0]
    ma = mach_number(V[sel], gas)
    order = np.argsort(x)
    x, ma = x[order], ma[order]
    sub = np.nonzero(ma < 1.0)[0]
    if sub.size == 0:
        return np.nan
    return float(nose_x - x[sub[0]])


def circle_polygon(center, diameter, n=40, kind=KIND_RIGID):
    """Closed polygonal bluff body (counterclockwise)."""
    ang = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    nodes = np.column_stack([
        center[0] + 0.5 * diameter * np.cos(ang),
        center[1] + 0.5 * diameter * np.sin(ang),
    ])
    facets = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    return EmbeddedSurface(nodes=nodes, facets=facets, alpha=np.zeros(n),
                           kind=np.full(n, kind))


# ---------------------------------------------------------------------------
# sod: quasi-1D strip shock tube
# ---------------------------------------------------------------------------

def build_sod(cfg):
    n = cfg.sod_cells
    mesh = build_kuhn_grid(((0.0, 1.0), (0.0, 1.0 / n)), (n, 1))
    dual = build_dual(mesh)
    gas = cfg.gas_model()
    fcfg = fluid_config_from(cfg, ALL_WALL)
    x = mesh.verts[:, 0]
    left = np.array([1.0, 0.0, 0.0, 1.0])
    right = np.array([0.125, 0.0, 0.0, 0.1])
    V = np.where((x < 0.5)[:, None], left, right)
    return mesh, dual, gas, fcfg, prim_array_to_cons(V, gas)


def run_sod(cfg, outdir=None):
    """Advance the tube to t_end and compare with the exact solution."""
    mesh, dual, gas, fcfg, W = build_sod(cfg)
    sol = FluidSolution(W=W)
    t_end = cfg.sod_t_end
    sol = fluid_mod.advance_span(sol, t_end, dual, gas, fcfg)
    V = cons_array_to_prim(sol.W, gas)
    exact = riemann.exact_riemann((1.0, 0.0, 1.0), (0.125, 0.0, 0.1), gas)
    rho_ex, u_ex, p_ex = exact.sample((mesh.verts[:, 0] - 0.5) / t_end)
    strip_height = 1.0 / cfg.sod_cells
    l1 = float(np.sum(dual.cv_area * np.abs(V[:, 0] - rho_ex)) / strip_height)
    artifacts = {
        "l1_density": l1, "t": sol.t,
        "mesh": mesh, "dual": dual, "V": V, "rho_exact": rho_ex,
    }
    if outdir is not None:
        from . import ioformats
        ioformats.write_snapshot(f"{outdir}/sod_final.txt", mesh.verts, V,
                                 mach_number(V, gas))
        rows = [{"t": sol.t, "vm_max": 0.0, "vm_topk_mean": 0.0,
                 "drag_total": 0.0, "drag_canopy": 0.0, "drag_cable": 0.0,
                 "work_fluid": 0.0, "work_struct": 0.0}]
        ioformats.write_history(f"{outdir}/history.txt", rows)
    return artifacts


# ---------------------------------------------------------------------------
# coupon: displacement-driven plane-stress tensile test
# ---------------------------------------------------------------------------

def build_coupon(cfg):
    """Rectangular membrane; bottom vertically supported, top displacement
    driven.

    clamp mode "frictionless" supports the bottom edge vertically and pins a
    single corner laterally, which admits an exactly homogeneous uniaxial
    stress state; "full" clamps both components of every bottom node and
    reproduces artificial corner concentrations.
    """
    W, H = cfg.coupon_width, cfg.coupon_height
    nx = cfg.coupon_resolution
    ny = max(int(round(nx * H / W)), 1)
    grid = build_kuhn_grid(((0.0, W), (0.0, H)), (nx, ny))
    mat = Material(E=cfg.fabric_E, nu=cfg.fabric_nu, rho=cfg.fabric_rho,
                   thickness=cfg.fabric_th)
    nn = grid.num_vertices
    fixed = np.zeros((nn, 3), dtype=bool)
    bottom = np.nonzero(np.abs(grid.verts[:, 1]) < 1e-12)[0]
    top = np.nonzero(np.abs(grid.verts[:, 1] - H) < 1e-12)[0]
    fixed[bottom, 1] = True
    if cfg.coupon_clamp == "full":
        fixed[bottom, 0] = True
    else:
        corner = bottom[np.argmin(grid.verts[bottom, 0])]
        fixed[corner, 0] = True
    model = make_model(grid.verts, membranes=grid.tris, mem_material=mat, fixed=fixed)
    return model, grid, bottom, top


def run_coupon(cfg, outdir=None, target_strain=None, relax_tol=1e-10):
    """Quasi-static pull: ramp the top edge at the configured rate, then relax
    dynamically (mass-proportional damping) to equilibrium at the final
    stretch. Returns center-element probes.
    """
    model, grid, bottom, top = build_coupon(cfg)
    H = cfg.coupon_height
    rate = cfg.coupon_rate
    duration = cfg.coupon_duration if target_strain is None else target_strain * H / rate
    dt = 0.5 * struct_mod.critical_dt(model)
    state = zero_state(model)
    n_pull = max(int(np.ceil(duration / dt)), 1)
    dt_pull = duration / n_pull
    mask = np.zeros((model.num_nodes, 3), dtype=bool)
    mask[top, 1] = True
    f_zero = np.zeros((model.num_nodes, 3))
    # mass-proportional damping near the first axial mode keeps the pull
    # quasi-static
    c_wave = np.sqrt(cfg.fabric_E / cfg.fabric_rho)
    damp = 2.0 * np.pi * c_wave / (2.0 * H)
    for k in range(1, n_pull + 1):
        t = k * dt_pull
        u_tgt = np.zeros((model.num_nodes, 2))
        u_tgt[:, 1] = rate * t
        v_tgt = np.zeros((model.num_nodes, 2))
        v_tgt[:, 1] = rate
        f_damp = np.zeros((model.num_nodes, 3))
        f_damp[:, :2] = -damp * model.mass[:, :2] * state.v
        state = struct_mod.central_difference_step(
            state, f_damp, model, dt_pull, prescribed=(mask, u_tgt, v_tgt),
            check_dt=False,
        )
    # Relax at frozen stretch until the velocity field dies.
    u_tgt = np.zeros((model.num_nodes, 2))
    u_tgt[:, 1] = rate * duration
    v_tgt = np.zeros((model.num_nodes, 2))
    vel_scale = max(rate, 1e-12)
    for k in range(200000):
        f_damp = np.zeros((model.num_nodes, 3))
        f_damp[:, :2] = -damp * model.mass[:, :2] * state.v
        state = struct_mod.central_difference_step(
            state, f_damp, model, dt, prescribed=(mask, u_tgt, v_tgt * 0.0),
            check_dt=False,
        )
        if k % 200 == 0 and np.abs(state.v).max() < relax_tol * vel_scale:
            break
    stress = state.mem_stress
    centroids = grid.verts[grid.tris].mean(axis=1)
    center = np.array([cfg.coupon_width / 2.0, H / 2.0])
    probe = int(np.argmin(np.hypot(*(centroids - center).T)))
    F = stress["F"][probe]
    S = stress["S"][probe]
    J = stress["J"][probe]
    sigma = F @ S @ F.T / J
    artifacts = {
        "model": model, "grid": grid, "state": state,
        "applied_strain": rate * duration / H,
        "center_green_strain": stress["E"][probe],
        "center_cauchy": sigma,
        "center_vm": float(stress["vm"][probe]),
        "stress": stress,
        "centroids": centroids,
    }
    if outdir is not None:
        from . import ioformats
        vm_max, vm_top = vm_stats(model, state, cfg.vm_topk, cfg.vm_clip_quantile)
        rows = [{"t": duration, "vm_max": vm_max, "vm_topk_mean": vm_top}]
        ioformats.write_history(f"{outdir}/history.txt", rows)
        np.savetxt(f"{outdir}/coupon_vm.txt",
                   np.column_stack([centroids, stress["vm"]]),
                   header="xc yc von_mises")
    return artifacts


def svk_uniaxial_oracle(E_mod, nu, stretch):
    """Closed-form plane-stress uniaxial response of the SVK law.

    Given the axial stretch, solves the lateral Green strain from the
    zero-lateral-stress condition and returns (green_axial, second
    Piola-Kirchhoff axial, Cauchy axial).
    """
    mu = E_mod / (2.0 * (1.0 + nu))
    lam = E_mod * nu / (1.0 - nu**2)
    E_ax = 0.5 * (stretch**2 - 1.0)
    E_lat = -lam * E_ax / (lam + 2.0 * mu)
    S_ax = lam * (E_ax + E_lat) + 2.0 * mu * E_ax
    lat_stretch = np.sqrt(2.0 * E_lat + 1.0)
    J = stretch * lat_stretch
    sigma_ax = stretch**2 * S_ax / J
    return E_ax, S_ax, sigma_ax


# ---------------------------------------------------------------------------
# porous_membrane: pressurized driver against a porous wall
# ---------------------------------------------------------------------------

def build_porous_membrane(cfg, alpha=None):
    """Closed channel with a pressurized left section and a porous membrane
    spanning the mid-plane. The right section starts quiescent; with alpha = 0
    it stays exactly quiescent (no transmitted mass)."""
    Lx, Ly = 1.0, 0.25
    nx = cfg.resolution
    ny = max(nx // 4, 2)
    mesh = build_kuhn_grid(((0.0, Lx), (0.0, Ly)), (nx, ny))
    dual = build_dual(mesh)
    gas = cfg.gas_model()
    fcfg = replace(fluid_config_from(cfg, ALL_WALL), viscous=False)
    a = cfg.membrane_alpha if alpha is None else alpha
    xm = 0.5 * Lx + 0.37 * (Lx / nx)  # keep the membrane off mesh lines
    eps = 0.05 * Ly
    nodes = np.array([[xm, -eps], [xm, Ly + eps]])
    surface = EmbeddedSurface(nodes=nodes, facets=[[0, 1]], alpha=[a],
                              kind=[KIND_CANOPY])
    x = mesh.verts[:, 0]
    ratio = cfg.driver_ratio
    V = np.tile(np.array([cfg.fs_rho, 0.0, 0.0, cfg.fs_p]), (mesh.num_vertices, 1))
    V[x < xm, 0] *= ratio
    V[x < xm, 3] *= ratio
    W = prim_array_to_cons(V, gas)
    return mesh, dual, gas, fcfg, surface, W, xm


def run_porous_membrane(cfg, alpha=None, outdir=None, t_end=None):
    """Returns the time-averaged transmitted mass flux into the right section."""
    mesh, dual, gas, fcfg, surface, W, xm = build_porous_membrane(cfg, alpha)
    status = classify(dual, surface)
    right = mesh.verts[:, 0] > xm
    sol = FluidSolution(W=W)
    if t_end is None:
        a_inf = sound_speed_of(cfg)
        t_end = 1.2 / a_inf  # a couple of acoustic transits
    m0 = float(np.sum(dual.cv_area[right] * sol.W[right, 0]))
    masses = [(0.0, m0)]
    n_out = 24
    for k in range(1, n_out + 1):
        target = k * t_end / n_out
        sol = fluid_mod.advance_span(sol, target - sol.t, dual, gas, fcfg, status, surface)
        masses.append((sol.t, float(np.sum(dual.cv_area[right] * sol.W[right, 0]))))
    t_arr = np.array([m[0] for m in masses])
    m_arr = np.array([m[1] for m in masses])
    half = len(t_arr) // 2
    flux = (m_arr[-1] - m_arr[half]) / (t_arr[-1] - t_arr[half])
    if outdir is not None:
        np.savetxt(f"{outdir}/transmitted_mass.txt", np.column_stack([t_arr, m_arr]),
                   header="t mass_right")
    return {"flux": float(flux), "mass_series": (t_arr, m_arr), "sol": sol,
            "dual": dual, "mesh": mesh}


def sound_speed_of(cfg) -> float:
    gas = cfg.gas_model()
    return float(np.sqrt(gas.gamma * cfg.fs_p / cfg.fs_rho))


# ---------------------------------------------------------------------------
# piston: 1D coupled energy-audit problem
# ---------------------------------------------------------------------------

def build_piston(cfg, nx=120):
    """Closed quasi-1D tube with a movable impermeable piston at mid-length.

    The piston is a vertical facet bound to a 2-node vertical beam whose nodes
    translate along x only; the gas pressure difference across the piston is
    the only restoring force, so the system breathes on the acoustic
    timescale.
    """
    Lx, Ly = 1.0, 0.1
    mesh = build_kuhn_grid(((0.0, Lx), (0.0, Ly)), (nx, max(nx // 10, 1)))
    dual = build_dual(mesh)
    gas = cfg.gas_model()
    fcfg = replace(fluid_config_from(cfg, ALL_WALL), viscous=False)
    xp = 0.5 * Lx + 0.29 * (Lx / nx)
    eps = 0.2 * Ly
    ref_nodes = np.array([[xp, -eps], [xp, Ly + eps]])
    facets = np.array([[0, 1]])
    # Structural twin: vertical beam, x translation only.
    area = 1e-4
    length = Ly + 2 * eps
    rho_s = cfg.piston_mass / (area * length)
    mat = Material(E=1e9, nu=0.3, rho=rho_s, area=area, inertia=1e-8)
    fixed = np.zeros((2, 3), dtype=bool)
    fixed[:, 1] = True
    fixed[:, 2] = True
    model = make_model(ref_nodes, beams=[[0, 1]], beam_material=mat, fixed=fixed)
    binding = SurfaceBinding(
        ref_nodes=ref_nodes, facets=facets, alpha=np.zeros(1),
        kind=np.array([KIND_CANOPY]), elem_ref=np.array([0]),
        canopy_surface_nodes=np.array([0, 1]), canopy_struct_nodes=np.array([0, 1]),
    )
    # Pressurize the left side so the piston breathes.
    x = mesh.verts[:, 0]
    r = cfg.piston_driver_ratio
    V = np.tile(np.array([cfg.fs_rho, 0.0, 0.0, cfg.fs_p]), (mesh.num_vertices, 1))
    V[x < xp, 3] *= r
    V[x < xp, 0] *= r ** (1.0 / gas.gamma)
    W = prim_array_to_cons(V, gas)
    return mesh, dual, gas, fcfg, binding, model, W


def run_piston(cfg, outdir=None, dt=None, t_end=None, nx=120):
    """Coupled piston run; returns displacement history and work audit."""
    mesh, dual, gas, fcfg, binding, model, W = build_piston(cfg, nx=nx)
    from .embedded import build_edge_bins
    bins = build_edge_bins(dual)
    sol = FluidSolution(W=W)
    state = zero_state(model)
    coupling = CouplingState(dt_fs=dt if dt is not None else cfg.coupling_dt,
                             max_subcycles=cfg.max_subcycles,
                             struct_safety=cfg.struct_safety)
    t_end = cfg.piston_duration if t_end is None else t_end
    hist = []
    status = None
    E0 = struct_mod.total_energy(model, state)
    while coupling.t < t_end - 1e-15:
        sol, state, coupling, status, diag = staggered_step(
            sol, state, coupling, binding, model, dual, gas, fcfg,
            bins=bins, prev_status=status,
        )
        hist.append((coupling.t, float(state.u[0, 0]), float(state.v[0, 0]),
                     coupling.work_fluid_side, coupling.work_struct_side,
                     struct_mod.total_energy(model, state) - E0))
    hist = np.asarray(hist)
    if outdir is not None:
        np.savetxt(f"{outdir}/piston_history.txt", hist,
                   header="t u v work_fluid work_struct dE_struct")
    return {"history": hist, "model": model, "state": state, "coupling": coupling}


# ---------------------------------------------------------------------------
# bluffbody and parachute2d geometry builders (drivers in runner.py)
# ---------------------------------------------------------------------------

def build_bluffbody(cfg):
    mesh = build_kuhn_grid(((cfg.x0, cfg.x1), (cfg.y0, cfg.y1)), cfg.resolution)
    dual = build_dual(mesh)
    gas = cfg.gas_model()
    fcfg = fluid_config_from(cfg, ALL_FARFIELD)
    body = circle_polygon((0.0, 0.0), cfg.body_diameter)
    binding = SurfaceBinding(
        ref_nodes=body.nodes, facets=body.facets, alpha=body.alpha,
        kind=body.kind, elem_ref=body.elem_ref,
    )
    return mesh, dual, gas, fcfg, binding, None


def build_parachute2d(cfg):
    """Forebody + folded canopy arc + two suspension cables with hexagonal
    cross-section slave surfaces."""
    mesh = build_kuhn_grid(((cfg.x0, cfg.x1), (cfg.y0, cfg.y1)), cfg.resolution)
    dual = build_dual(mesh)
    gas = cfg.gas_model()
    fcfg = fluid_config_from(cfg, ALL_FARFIELD)

    body_d = cfg.body_diameter
    body = circle_polygon((0.0, 0.0), body_d)

    cord_r = 0.5 * cfg.cord_diameter
    cord_area = np.pi * cord_r**2
    cord_inertia = np.pi * cord_r**4 / 4.0
    canopy_mat = Material(E=cfg.fabric_E, nu=cfg.fabric_nu, rho=cfg.fabric_rho,
                          area=cfg.fabric_th * 1.0, inertia=cfg.fabric_th**3 / 12.0)
    arc_model, arc_state = folded_arc(
        cfg.canopy_radius, cfg.canopy_span, cfg.canopy_elems,
        [cfg.fold_inner, cfg.fold_outer], canopy_mat,
        center=(cfg.canopy_standoff, 0.0),
    )
    # Rotate the arc so its crown points downstream (+x) and the opening faces
    # the oncoming flow; rotations are invariant under the common rotation.
    c0 = np.array([cfg.canopy_standoff, 0.0])
    R90 = np.array([[0.0, 1.0], [-1.0, 0.0]])

    def rot_about(pts):
        return (pts - c0) @ R90.T + c0

    arc_ref = rot_about(arc_model.nodes)
    arc_x_folded = rot_about(arc_model.nodes + arc_state.u)
    n_arc = arc_ref.shape[0]

    # Cable chains from the confluence point to the two arc ends.
    confluence = np.array([0.6 * body_d, 0.0])
    nc = cfg.cable_elems
    cable_mat = Material(E=cfg.cord_E, nu=cfg.cord_nu, rho=cfg.cord_rho,
                         area=cord_area, inertia=cord_inertia)

    def cable_points(end_xy):
        tline = np.linspace(0.0, 1.0, nc + 1)[1:-1]
        pts = confluence + tline[:, None] * (end_xy - confluence)
        if cfg.suspension_shape == "catenary":
            sag = cfg.suspension_sag * np.linalg.norm(end_xy - confluence)
            perp = np.array([-(end_xy - confluence)[1], (end_xy - confluence)[0]])
            perp = perp / np.linalg.norm(perp)
            pts = pts + (sag * np.sin(np.pi * tline))[:, None] * perp
        return pts

    nodes = [arc_ref, confluence[None, :]]
    conf_id = n_arc
    beams = [np.column_stack([np.arange(cfg.canopy_elems),
                              np.arange(1, cfg.canopy_elems + 1)])]
    next_id = n_arc + 1
    cable_elem_ids = []
    n_beams = cfg.canopy_elems
    for end_node in (0, n_arc - 1):
        pts = cable_points(arc_ref[end_node])
        ids = [conf_id] + list(range(next_id, next_id + len(pts))) + [end_node]
        nodes.append(pts)
        next_id += len(pts)
        chain = np.column_stack([ids[:-1], ids[1:]])
        beams.append(chain)
        cable_elem_ids.append(np.arange(n_beams, n_beams + len(chain)))
        n_beams += len(chain)
    all_nodes = np.vstack(nodes)
    all_beams = np.vstack(beams)
    nn = all_nodes.shape[0]
    fixed = np.zeros((nn, 3), dtype=bool)
    fixed[conf_id] = True  # confluence point held

    # Per-element materials differ between canopy and cables; the model
    # builder takes one beam material, so build with the canopy one and patch
    # the cable element arrays afterwards.
    model = make_model(all_nodes, beams=all_beams, beam_material=canopy_mat,
                       fixed=fixed)
    cable_ids = np.concatenate(cable_elem_ids)
    EA = model.beam_EA.copy(); EA[cable_ids] = cfg.cord_E * cord_area
    EI = model.beam_EI.copy(); EI[cable_ids] = cfg.cord_E * cord_inertia
    rhoA = model.beam_rhoA.copy(); rhoA[cable_ids] = cfg.cord_rho * cord_area
    mass = np.zeros((nn, 3))
    half = 0.5 * rhoA * model.beam_L0
    rot = rhoA * model.beam_L0**3 / 24.0
    for k in range(2):
        np.add.at(mass[:, 0], all_beams[:, k], half)
        np.add.at(mass[:, 1], all_beams[:, k], half)
        np.add.at(mass[:, 2], all_beams[:, k], rot)
    mass[mass[:, 2] == 0.0, 2] = 1.0
    model = replace(model, beam_EA=EA, beam_EI=EI, beam_rhoA=rhoA, mass=mass)

    # One-sided contact between each pair of neighboring gores of the folded
    # arc (gores are the chain pieces between fold hinges).
    pairs = []
    if cfg.contact_enabled:
        hinge_every = max(cfg.canopy_elems // 3, 1)
        segs = np.column_stack([np.arange(cfg.canopy_elems),
                                np.arange(1, cfg.canopy_elems + 1)])
        bounds = list(range(0, cfg.canopy_elems, hinge_every)) + [cfg.canopy_elems]
        gores = [np.arange(bounds[k], bounds[k + 1]) for k in range(len(bounds) - 1)]
        for g in range(len(gores) - 1):
            nodes_g = np.unique(segs[gores[g]].ravel())
            segs_next = segs[gores[g + 1]]
            pairs.append(ContactPair(nodes=nodes_g, segments=segs_next,
                                     outward=1.0,
                                     stiffness=cfg.contact_stiffness))
        model = replace(model, contact_pairs=tuple(pairs))

    # Structural initial state: folded arc, straight cables.
    state0 = zero_state(model)
    u0 = state0.u.copy()
    th0 = state0.th.copy()
    u0[:n_arc] = arc_x_folded - arc_ref
    th0[:n_arc] = arc_state.th
    state0 = replace(state0, u=u0, th=th0)

    # Embedded surface: forebody + canopy facets + cable cross-section
    # hexagons at stations along each cable.
    surf_nodes = [body.nodes, arc_ref]
    surf_facets = [body.facets]
    surf_alpha = [body.alpha]
    surf_kind = [body.kind]
    surf_elem = [body.elem_ref]
    nb = body.nodes.shape[0]
    canopy_surface = nb + np.arange(n_arc)
    arc_facets = np.column_stack([canopy_surface[:-1], canopy_surface[1:]])
    surf_facets.append(arc_facets)
    surf_alpha.append(np.full(len(arc_facets), cfg.canopy_alpha))
    surf_kind.append(np.full(len(arc_facets), KIND_CANOPY))
    surf_elem.append(np.arange(cfg.canopy_elems))

    hex_nodes = []
    next_sid = nb + n_arc
    hex_facets, hex_ids = [], []
    r = cfg.cable_radius
    for cid, chain in enumerate(cable_elem_ids):
        i0 = model.beams[chain[0], 0]
        i1 = model.beams[chain[-1], 1]
        p0, p1 = all_nodes[i0], all_nodes[i1]
        for sfrac in np.linspace(0.15, 0.85, cfg.cable_stations):
            c = p0 + sfrac * (p1 - p0)
            ang = np.linspace(0, 2 * np.pi, 7)[:-1] + np.pi / 6.0
            pts = np.column_stack([c[0] + r * np.cos(ang), c[1] + r * np.sin(ang)])
            ids = next_sid + np.arange(6)
            hex_nodes.append(pts)
            hex_facets.append(np.column_stack([ids, np.roll(ids, -1)]))
            hex_ids.extend(ids)
            next_sid += 6
    ms_map = None
    if hex_nodes and cfg.cables_enabled:
        hex_xy = np.vstack(hex_nodes)
        surf_nodes.append(hex_xy)
        hf = np.vstack(hex_facets)
        surf_facets.append(hf)
        surf_alpha.append(np.zeros(len(hf)))
        surf_kind.append(np.full(len(hf), KIND_CABLE))
        surf_elem.append(np.full(len(hf), -1))
        ms_map = pair_slaves(hex_xy, np.asarray(hex_ids), model,
                             np.sort(cable_ids), r)
    binding = SurfaceBinding(
        ref_nodes=np.vstack(surf_nodes),
        facets=np.vstack(surf_facets),
        alpha=np.concatenate(surf_alpha),
        kind=np.concatenate(surf_kind),
        elem_ref=np.concatenate(surf_elem),
        canopy_surface_nodes=canopy_surface,
        canopy_struct_nodes=np.arange(n_arc),
        ms_map=ms_map,
    )
    return mesh, dual, gas, fcfg, binding, (model, state0)
