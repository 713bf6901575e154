"""Phased scenario execution: rigid precursor, fixed-surface precursor,
coupled run.

Every embedded-body case is driven through the same three phases (any of
which may have zero duration): phase A solves the flow past the rigid parts
only, phase B adds the full surface frozen in its initial configuration, and
phase C releases the coupled problem. The loop marches in coupling-step
increments for uniform bookkeeping; history rows, adaptation, and snapshots
happen at configured cadences. A checkpoint written at the end of phase B
allows bit-for-bit restart of phase C.
"""

from __future__ import annotations

import os
from dataclasses import replace

import numpy as np

from . import cases, embedded, fluid as fluid_mod, ioformats, structure as struct_mod
from .couple import CouplingState, SurfaceBinding, staggered_step
from .embedded import KIND_RIGID, build_edge_bins, classify
from .fluid import FluidSolution
from .gas import cons_array_to_prim, prim_array_to_cons
from .mesh import adapt, hessian_indicator

__all__ = ["run", "RunError", "binding_subset"]


class RunError(RuntimeError):
    """Scenario aborted; message carries phase, step, and location."""


def binding_subset(binding: SurfaceBinding, facet_mask) -> SurfaceBinding:
    """Restrict a binding to a facet subset (nodes renumbered), dropping the
    structural correspondences (used for the rigid-only precursor phase)."""
    facet_mask = np.asarray(facet_mask, dtype=bool)
    used = np.unique(binding.facets[facet_mask].ravel())
    renum = -np.ones(binding.ref_nodes.shape[0], dtype=np.int64)
    renum[used] = np.arange(used.size)
    return SurfaceBinding(
        ref_nodes=binding.ref_nodes[used],
        facets=renum[binding.facets[facet_mask]],
        alpha=binding.alpha[facet_mask],
        kind=binding.kind[facet_mask],
        elem_ref=binding.elem_ref[facet_mask],
    )


def _static_binding(binding: SurfaceBinding, model, state) -> SurfaceBinding:
    """Freeze the full surface at the given structural configuration."""
    surf = binding.surface_at(model, state, predict_dt=0.0)
    return SurfaceBinding(
        ref_nodes=surf.nodes, facets=binding.facets, alpha=binding.alpha,
        kind=binding.kind, elem_ref=binding.elem_ref,
    )


def _freestream_solution(cfg, mesh, gas) -> FluidSolution:
    V = np.tile(np.asarray(cfg.freestream_primitive()), (mesh.num_vertices, 1))
    return FluidSolution(W=prim_array_to_cons(V, gas))


def _adapt_state(cfg, mesh, dual, sol, surface, gas):
    """One adaptation round driven by the density Hessian indicator plus the
    doubly-intersected edge criterion; interpolates the solution."""
    scores = hessian_indicator(sol.W[:, 0], dual)
    thresh = float(np.quantile(scores, cfg.hessian_quantile)) if scores.size else 0.0
    marked_edges = None
    if surface is not None:
        marked_edges = embedded.doubly_intersected_edges(dual, surface)
    res = adapt(mesh, dual, scores, max(thresh, 1e-300), fields=sol.W,
                marked_edges=marked_edges, vertex_budget=cfg.vertex_budget)
    if not res.refined:
        return mesh, dual, sol, False
    return res.mesh, res.dual, FluidSolution(W=res.fields, t=sol.t), True


def _history_row(t, coupling, forces, surface, model, state, cfg):
    row = {"t": t, "work_fluid": coupling.work_fluid_side,
           "work_struct": coupling.work_struct_side}
    if forces is not None and surface is not None:
        row.update(cases.drag_by_kind(forces, surface))
    vm_max, vm_top = cases.vm_stats(model, state, cfg.vm_topk, cfg.vm_clip_quantile) \
        if (model is not None and state is not None) else (0.0, 0.0)
    row["vm_max"] = vm_max
    row["vm_topk_mean"] = vm_top
    return row


def run(cfg, outdir=None, restart_from=None):
    """Execute a scenario configuration; returns an artifacts dict.

    Self-contained cases (sod, coupon, porous_membrane, piston) dispatch to
    their drivers; embedded-body cases run the three-phase loop. Deterministic
    for a fixed configuration, including across a phase-B checkpoint restart.
    """
    cfg.validate()
    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
    np.random.seed(cfg.seed)  # cases are deterministic; seed pins any sampling

    if cfg.case == "sod":
        return cases.run_sod(cfg, outdir)
    if cfg.case == "coupon":
        return cases.run_coupon(cfg, outdir)
    if cfg.case == "porous_membrane":
        return cases.run_porous_membrane(cfg, outdir=outdir)
    if cfg.case == "piston":
        return cases.run_piston(cfg, outdir)
    if cfg.case == "bluffbody":
        mesh, dual, gas, fcfg, binding, structure = cases.build_bluffbody(cfg)
    elif cfg.case == "parachute2d":
        mesh, dual, gas, fcfg, binding, structure = cases.build_parachute2d(cfg)
    else:
        raise RunError(f"case {cfg.case!r} has no driver")

    model, state = structure if structure is not None else (None, None)
    rows = []
    diagnostics = []

    if restart_from is not None:
        chk = ioformats.load_checkpoint(restart_from)
        mesh = type(mesh)(verts=chk["verts"], tris=chk["tris"].astype(np.int64),
                          edge_tags={(int(a), int(b)): int(t)
                                     for a, b, t in chk["edge_tags"].reshape(-1, 3)})
        from .mesh import build_dual
        dual = build_dual(mesh)
        sol = FluidSolution(W=chk["W"], t=float(chk["t"]))
        coupling = CouplingState(dt_fs=float(chk["dt_fs"]), t=float(chk["t_coupling"]),
                                 step=int(chk["step"]),
                                 max_subcycles=cfg.max_subcycles,
                                 struct_safety=cfg.struct_safety,
                                 work_fluid_side=float(chk["work_fluid"]),
                                 work_struct_side=float(chk["work_struct"]),
                                 f_prev=chk["f_prev"] if "f_prev" in chk else None)
        if model is not None:
            state = struct_mod.StructuralState(
                u=chk["su"], th=chk["sth"], v=chk["sv"], om=chk["som"],
                a=chk["sa"] if "sa" in chk else None,
                al=chk["sal"] if "sal" in chk else None,
                t=float(chk["st"]),
            )
        phase_start = "C"
    else:
        sol = _freestream_solution(cfg, mesh, gas)
        coupling = CouplingState(dt_fs=cfg.coupling_dt,
                                 max_subcycles=cfg.max_subcycles,
                                 struct_safety=cfg.struct_safety)
        phase_start = "A"

    def checkpoint_path():
        return None if outdir is None else os.path.join(outdir, "checkpoint_phaseB.npz")

    def save_checkpoint():
        path = checkpoint_path()
        if path is None:
            return
        payload = {
            "verts": mesh.verts, "tris": mesh.tris,
            "edge_tags": np.array([(a, b, t) for (a, b), t in sorted(mesh.edge_tags.items())],
                                  dtype=np.int64),
            "W": sol.W, "t": np.float64(sol.t),
            "dt_fs": np.float64(coupling.dt_fs), "t_coupling": np.float64(coupling.t),
            "step": np.int64(coupling.step),
            "work_fluid": np.float64(coupling.work_fluid_side),
            "work_struct": np.float64(coupling.work_struct_side),
        }
        if model is not None and state is not None:
            payload.update({"su": state.u, "sth": state.th, "sv": state.v,
                            "som": state.om, "st": np.float64(state.t)})
            if state.a is not None:
                payload.update({"sa": state.a, "sal": state.al})
        if coupling.f_prev is not None:
            payload["f_prev"] = coupling.f_prev
        ioformats.save_checkpoint(path, **payload)

    def run_phase(name, duration, phase_binding, live_model, live_state):
        nonlocal mesh, dual, sol, coupling, state
        if duration <= 0.0:
            return
        bins = build_edge_bins(dual)
        prev_status = None
        steps = int(np.ceil(duration / coupling.dt_fs))
        t_stop = coupling.t + duration
        k = 0
        try:
            while coupling.t < t_stop - 1e-15:
                sol, new_state, coupling, prev_status, diag = staggered_step(
                    sol, live_state, coupling, phase_binding, live_model, dual,
                    gas, fcfg, bins=bins, prev_status=prev_status,
                )
                if live_state is not None:
                    live_state = new_state
                    state = new_state
                k += 1
                if cfg.cadence > 0 and k % cfg.cadence == 0:
                    surf = phase_binding.surface_at(live_model, live_state, 0.0)
                    V = cons_array_to_prim(sol.W, gas)
                    forces, _ = embedded.surface_loads(prev_status, V, dual, surf, gas)
                    rows.append(_history_row(sol.t, coupling, forces, surf,
                                             live_model, live_state, cfg))
                if cfg.adapt_every > 0 and k % cfg.adapt_every == 0:
                    surf = phase_binding.surface_at(live_model, live_state, 0.0)
                    mesh, dual, sol, refined = _adapt_state(cfg, mesh, dual, sol, surf, gas)
                    if refined:
                        bins = build_edge_bins(dual)
                        prev_status = None
        except (fluid_mod.FluidStepError, struct_mod.StructureError) as err:
            raise RunError(f"phase {name}, step {k}, t={coupling.t}: {err}") from err

    rigid_binding = binding_subset(binding, binding.kind == KIND_RIGID)

    if phase_start == "A":
        # Resolve the rigid surface, then the full initial surface.
        if rigid_binding.facets.size:
            surf_a = rigid_binding.surface_at()
            mesh, dual, fields = cases.initial_refinement(
                mesh, dual, surf_a, cfg.wall_refine_levels, cfg.vertex_budget,
                fields=sol.W)
            sol = FluidSolution(W=fields, t=sol.t)
        run_phase("A", cfg.phase_rigid, rigid_binding, None, None)

        static_full = _static_binding(binding, model, state) if model is not None else binding
        if cfg.phase_fixed > 0.0 or cfg.phase_coupled > 0.0:
            surf_b = static_full.surface_at()
            mesh, dual, fields = cases.initial_refinement(
                mesh, dual, surf_b, cfg.wall_refine_levels, cfg.vertex_budget,
                fields=sol.W)
            sol = FluidSolution(W=fields, t=sol.t)
        run_phase("B", cfg.phase_fixed, static_full, None, None)
        save_checkpoint()

    run_phase("C", cfg.phase_coupled, binding, model, state)

    artifacts = {
        "mesh": mesh, "dual": dual, "solution": sol, "coupling": coupling,
        "state": state, "model": model, "history": rows,
        "diagnostics": diagnostics, "binding": binding, "gas": gas,
        "fluid_cfg": fcfg,
    }
    if outdir is not None:
        ioformats.write_history(os.path.join(outdir, "history.txt"), rows)
        V = cons_array_to_prim(sol.W, gas)
        ioformats.write_snapshot(os.path.join(outdir, "final_field.txt"),
                                 mesh.verts, V, cases.mach_number(V, gas))
        ioformats.write_mesh(mesh, os.path.join(outdir, "final_mesh.txt"))
    return artifacts
