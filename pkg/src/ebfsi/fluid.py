"""Vertex-centered finite-volume assembly and time integration.

The semi-discrete residual R collects, per node, the convective edge fluxes
(Roe + MUSCL away from interfaces, porosity-blended one-sided fluxes at
intersected edges), outer-boundary fluxes (characteristic far-field or
impermeable wall), and element-wise viscous terms evaluated with ghost
populated states inside intersected elements. The update convention is

    cv_area * dW/dt = -R,

so a vanishing residual means a steady state. Inactive (covered) nodes carry
frozen states and receive zero residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator, lgmres

from . import embedded, riemann
from .gas import (
    GasModel,
    cons_array_to_prim,
    conductivity,
    prim_array_to_cons,
    sutherland_viscosity,
    viscous_stress,
    vreman_eddy_viscosity,
)
from .mesh import DualMesh, lsq_gradients, scatter_edge_sums

__all__ = [
    "FluidConfig",
    "FluidSolution",
    "FluidStepError",
    "Bdf2ConvergenceError",
    "residual",
    "stable_dt",
    "advance_explicit",
    "advance_span",
    "advance_bdf2",
    "conserved_totals",
    "refresh_uncovered",
]

WALL = "wall"
FARFIELD = "farfield"


class FluidStepError(RuntimeError):
    """Explicit step kept producing non-physical states after dt halving."""


class Bdf2ConvergenceError(RuntimeError):
    """Newton-Krylov iteration for the implicit step failed; carries a trace."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class FluidConfig:
    """Solver knobs; boundary_kinds maps mesh boundary tags to 'wall' or
    'farfield'."""

    cfl: float = 0.8
    integrator: str = "ssp2"          # "ssp2" | "bdf2"
    limiter: str = "vanalbada"        # "vanalbada" | "minmod" | "none"
    muscl: bool = True
    extrapolation: str = "constant"   # ghost mode: "constant" | "linear"
    viscous: bool = True
    turbulence: bool = True
    entropy_fix: float = 0.05
    farfield: tuple = None            # primitive (rho, vx, vy, p)
    boundary_kinds: dict = field(default_factory=dict)
    max_retries: int = 10

    def __post_init__(self):
        if not (self.cfl > 0.0):
            raise ValueError("CFL must be positive")
        if self.limiter not in riemann.LIMITERS:
            raise ValueError(f"unknown limiter {self.limiter!r}")
        if self.integrator not in ("ssp2", "bdf2"):
            raise ValueError(f"unknown integrator {self.integrator!r}")


@dataclass(frozen=True)
class FluidSolution:
    """Conservative nodal field at one time level."""

    W: np.ndarray
    t: float = 0.0


def _boundary_kind(cfg: FluidConfig, tag: int) -> str:
    try:
        return cfg.boundary_kinds[int(tag)]
    except KeyError:
        raise KeyError(f"boundary tag {tag} has no configured kind (wall/farfield)")


def _edge_masks(dual: DualMesh, status):
    """Split edges into clean fluid-fluid edges and crossed edges."""
    ne = dual.num_edges
    if status is None:
        return np.ones(ne, dtype=bool), np.empty(0, dtype=np.int64)
    crossed = status.edge_ncross > 0
    act = status.active
    both_active = act[dual.edges[:, 0]] & act[dual.edges[:, 1]]
    clean = ~crossed & both_active
    return clean, np.nonzero(crossed)[0]


def _viscous_element_term(Vrows, tri_grad_rows, area_rows, delta_rows, gas, cfg):
    """Per-element viscous flux contraction.

    Vrows: (m, 3, 4) primitive values at the element nodes (possibly ghost
    substituted). Returns (m, 3, 4): contribution ``area * grad_psi_k . G``
    for each local node k.
    """
    Ve = Vrows.mean(axis=1)                                # (m, 4)
    grad = np.einsum("mkd,mkc->mdc", tri_grad_rows, Vrows)  # d/dx_d of comp c
    grad_v = np.stack([grad[:, :, 1], grad[:, :, 2]], axis=1)  # (m, i, d) = dv_i/dx_d
    T_nodes = Vrows[:, :, 3] / (Vrows[:, :, 0] * gas.R)
    grad_T = np.einsum("mkd,mk->md", tri_grad_rows, T_nodes)
    T_e = T_nodes.mean(axis=1)
    mu = sutherland_viscosity(T_e, gas)
    mu_v = gas.mu_v_ratio * mu
    kappa = conductivity(mu, gas)
    if cfg.turbulence:
        mu_t = vreman_eddy_viscosity(grad_v, Ve[:, 0], delta_rows, gas)
        kappa_t = gas.cp * mu_t / gas.Pr_t
    else:
        mu_t = 0.0
        kappa_t = 0.0
    tau = viscous_stress(grad_v, mu + mu_t, mu_v)          # (m, 2, 2)
    q = -(kappa + kappa_t)[:, None] * grad_T               # (m, 2)
    # G[d, comp]: rows are space directions; tau is symmetric.
    G = np.zeros((len(Ve), 2, 4))
    G[:, :, 1] = tau[:, :, 0]
    G[:, :, 2] = tau[:, :, 1]
    Gv = np.einsum("mij,mj->mi", tau, Ve[:, 1:3])
    G[:, :, 3] = Gv - q
    contrib = np.einsum("mkd,mdc->mkc", tri_grad_rows, G) * area_rows[:, None, None]
    return contrib


def residual(W: np.ndarray, dual: DualMesh, gas: GasModel, cfg: FluidConfig,
             status=None, surface=None) -> np.ndarray:
    """Assemble the semi-discrete residual (see module docstring for sign)."""
    nv = W.shape[0]
    V = cons_array_to_prim(W, gas)
    R = np.zeros_like(W)
    act = status.active if status is not None else np.ones(nv, dtype=bool)

    clean, crossed_eids = _edge_masks(dual, status)
    edges = dual.edges
    if cfg.muscl:
        grads = lsq_gradients(dual, V)
    # Clean interior edges: single flux, antisymmetric scatter.
    ce = np.nonzero(clean)[0]
    if ce.size:
        i, j = edges[ce, 0], edges[ce, 1]
        if cfg.muscl:
            VL, VR = riemann.muscl_reconstruct(
                V[i], V[j], grads[i], grads[j], dual.edge_vec[ce], cfg.limiter
            )
        else:
            VL, VR = V[i], V[j]
        flux = riemann.roe_flux(
            prim_array_to_cons(VL, gas), prim_array_to_cons(VR, gas),
            dual.edge_normal[ce], gas, cfg.entropy_fix,
        )
        R += scatter_edge_sums(edges[ce], flux, nv, sign_j=-1.0)

    # Crossed edges: per-side one-sided fluxes blended with porosity.
    if crossed_eids.size:
        ptr = status.edge_ptr
        for from_i in (True, False):
            node = edges[crossed_eids, 0] if from_i else edges[crossed_eids, 1]
            other = edges[crossed_eids, 1] if from_i else edges[crossed_eids, 0]
            recs = ptr[crossed_eids] if from_i else ptr[crossed_eids + 1] - 1
            sel = act[node]
            if not np.any(sel):
                continue
            node, other, recs = node[sel], other[sel], recs[sel]
            nu = dual.edge_normal[crossed_eids[sel]]
            nu = nu if from_i else -nu
            fid = status.rec_facet[recs]
            uu = status.rec_u[recs]
            fa = surface.facets[fid, 0]
            fb = surface.facets[fid, 1]
            v_w = (1.0 - uu)[:, None] * surface.vel[fa] + uu[:, None] * surface.vel[fb]
            area = np.hypot(nu[:, 0], nu[:, 1])
            w_n = (v_w[:, 0] * nu[:, 0] + v_w[:, 1] * nu[:, 1]) / area
            alpha = surface.alpha[fid].copy()
            alpha[~act[other]] = 0.0  # no through-flow toward covered nodes
            flux = embedded.interface_convective_flux(
                W[node], W[other], nu, alpha, w_n, gas, cfg.entropy_fix
            )
            R += scatter_edge_sums(
                np.column_stack([node, node]), 0.5 * flux, nv, sign_j=1.0
            )

    # Outer boundary facets.
    if dual.bnd_node.size:
        tags = np.unique(dual.bnd_tag)
        for tag in tags:
            kind = _boundary_kind(cfg, tag)
            sel = dual.bnd_tag == tag
            nodes = dual.bnd_node[sel]
            keep = act[nodes]
            nodes = nodes[keep]
            normals = dual.bnd_normal[sel][keep]
            if kind == FARFIELD:
                if cfg.farfield is None:
                    raise ValueError("far-field boundary present but no freestream configured")
                Winf = prim_array_to_cons(np.asarray(cfg.farfield, dtype=float), gas)
                flux = riemann.farfield_flux(W[nodes], Winf, normals, gas)
            elif kind == WALL:
                flux = riemann.wall_boundary_flux(V[nodes], normals, gas)
            else:
                raise ValueError(f"unknown boundary kind {kind!r}")
            R += scatter_edge_sums(np.column_stack([nodes, nodes]), 0.5 * flux, nv, sign_j=1.0)

    # Viscous terms, element by element.
    if cfg.viscous:
        tris = dual.mesh.tris
        nt = tris.shape[0]
        node_delta = dual.cv_diam
        if status is None:
            clean_elems = np.ones(nt, dtype=bool)
        else:
            clean_elems = np.ones(nt, dtype=bool)
            clean_elems[status.intersected_elems] = False
            clean_elems &= act[tris].all(axis=1)
        cel = np.nonzero(clean_elems)[0]
        if cel.size:
            rows = tris[cel]
            contrib = _viscous_element_term(
                V[rows], dual.tri_grad[cel], dual.tri_area[cel],
                node_delta[rows].mean(axis=1), gas, cfg,
            )
            for k in range(3):
                R += scatter_edge_sums(
                    np.column_stack([rows[:, k], rows[:, k]]), 0.5 * contrib[:, k, :], nv, 1.0
                )
        if status is not None and status.intersected_elems.size and surface is not None:
            views = embedded.populate_ghosts(status, V, dual, surface, gas, cfg.extrapolation)
            if views.elem.size:
                rows = tris[views.elem]
                contrib = _viscous_element_term(
                    views.Vmod, dual.tri_grad[views.elem], dual.tri_area[views.elem],
                    node_delta[rows].mean(axis=1), gas, cfg,
                )
                mask = views.owner & act[rows]
                for k in range(3):
                    sel = mask[:, k]
                    if np.any(sel):
                        R += scatter_edge_sums(
                            np.column_stack([rows[sel, k], rows[sel, k]]),
                            0.5 * contrib[sel, k, :], nv, 1.0,
                        )

    R[~act] = 0.0
    return R


def stable_dt(W: np.ndarray, dual: DualMesh, gas: GasModel, cfg: FluidConfig,
              status=None) -> float:
    """CFL-limited explicit step: cfl * min(cv_diam / (|v| + a)) with an
    additional diffusive bound min(h^2 rho / (2 (mu + mu_v))) when viscous."""
    act = status.active if status is not None else slice(None)
    V = cons_array_to_prim(W, gas)
    speed = np.hypot(V[:, 1], V[:, 2]) + np.sqrt(gas.gamma * V[:, 3] / V[:, 0])
    dt = cfg.cfl * float(np.min(dual.cv_diam[act] / speed[act]))
    if cfg.viscous:
        T = V[:, 3] / (V[:, 0] * gas.R)
        mu = sutherland_viscosity(T, gas)
        mu_tot = mu * (1.0 + gas.mu_v_ratio)
        dt_v = float(np.min(dual.cv_diam[act] ** 2 * V[act, 0] / (2.0 * mu_tot[act])))
        dt = min(dt, dt_v)
    return dt


def _physical(W: np.ndarray, gas: GasModel, act) -> bool:
    rho = W[act, 0]
    if np.any(~np.isfinite(W[act])) or np.any(rho <= 0.0):
        return False
    e_int = W[act, 3] - 0.5 * (W[act, 1] ** 2 + W[act, 2] ** 2) / rho
    return bool(np.all(e_int > 0.0))


def advance_explicit(sol: FluidSolution, dt: float, dual: DualMesh, gas: GasModel,
                     cfg: FluidConfig, status=None, surface=None) -> FluidSolution:
    """Two-stage second-order SSP update with step rejection.

    A stage producing a non-physical active state halves dt and retries the
    whole step (covering the original dt with two half steps), up to
    cfg.max_retries halvings.
    """
    act = status.active if status is not None else np.ones(sol.W.shape[0], dtype=bool)
    inv_cv = 1.0 / dual.cv_area[:, None]

    def try_step(W, step):
        R1 = residual(W, dual, gas, cfg, status, surface)
        W1 = W - step * inv_cv * R1
        W1[~act] = W[~act]
        if not _physical(W1, gas, act):
            return None
        R2 = residual(W1, dual, gas, cfg, status, surface)
        W2 = 0.5 * W + 0.5 * (W1 - step * inv_cv * R2)
        W2[~act] = W[~act]
        if not _physical(W2, gas, act):
            return None
        return W2

    pieces = 1
    for attempt in range(cfg.max_retries + 1):
        step = dt / pieces
        W = sol.W.copy()
        ok = True
        for _ in range(pieces):
            Wn = try_step(W, step)
            if Wn is None:
                ok = False
                break
            W = Wn
        if ok:
            return FluidSolution(W=W, t=sol.t + dt)
        pieces *= 2
    raise FluidStepError(f"step rejected after {cfg.max_retries} dt halvings at t={sol.t}")


def advance_span(sol: FluidSolution, span: float, dual: DualMesh, gas: GasModel,
                 cfg: FluidConfig, status=None, surface=None) -> FluidSolution:
    """Advance by an arbitrary time span using CFL-limited explicit substeps."""
    t_end = sol.t + span
    while sol.t < t_end - 1e-15 * max(1.0, abs(t_end)):
        dt = min(stable_dt(sol.W, dual, gas, cfg, status), t_end - sol.t)
        sol = advance_explicit(sol, dt, dual, gas, cfg, status, surface)
    return FluidSolution(W=sol.W, t=t_end)


def advance_bdf2(sol: FluidSolution, sol_prev: FluidSolution, dt: float,
                 dual: DualMesh, gas: GasModel, cfg: FluidConfig,
                 status=None, surface=None, rtol: float = 1e-8,
                 max_newton: int = 25, verbose: bool = False,
                 startup: bool = False) -> FluidSolution:
    """Three-point backward-difference step solved by damped Newton-Krylov.

    Solves cv*(1.5 W - 2 W_n + 0.5 W_nm1)/dt + R(W) = 0 matrix-free (LGMRES on
    finite-difference directional derivatives). startup=True takes a one-level
    backward-Euler step instead (used when no second history level exists; a
    single such step preserves second-order global accuracy). On
    non-convergence raises Bdf2ConvergenceError with the iteration trace;
    advance_bdf2_or_fallback wraps this with an explicit-substep fallback.
    """
    act = status.active if status is not None else np.ones(sol.W.shape[0], dtype=bool)
    cv = dual.cv_area[:, None]
    W_n = sol.W
    W_nm1 = sol_prev.W
    frozen = W_n[~act]
    c0, c1, c2 = (1.0, 1.0, 0.0) if startup else (1.5, 2.0, 0.5)

    def F(x):
        W = x.reshape(W_n.shape)
        r = cv * (c0 * W - c1 * W_n + c2 * W_nm1) / dt + residual(
            W, dual, gas, cfg, status, surface
        )
        r[~act] = W[~act] - frozen
        return r.ravel()

    x = W_n.ravel().copy()
    f = F(x)
    f0 = np.linalg.norm(f)
    scale = np.linalg.norm(cv.ravel()) * np.linalg.norm(W_n) / dt
    atol = 1e-13 * max(scale, 1.0)
    trace = [f0]
    for it in range(max_newton):
        if np.linalg.norm(f) <= rtol * f0 + atol:
            return FluidSolution(W=x.reshape(W_n.shape), t=sol.t + dt)
        eps_base = np.sqrt(np.finfo(float).eps) * (1.0 + np.linalg.norm(x))

        def jv(v):
            nv_ = np.linalg.norm(v)
            if nv_ == 0.0:
                return np.zeros_like(v)
            eps = eps_base / nv_
            return (F(x + eps * v) - f) / eps

        op = LinearOperator((x.size, x.size), matvec=jv)
        dx, info = lgmres(op, -f, rtol=1e-3, atol=0.0, maxiter=60)
        if info != 0 or not np.all(np.isfinite(dx)):
            raise Bdf2ConvergenceError("linear solve failed in implicit step", trace)
        lam = 1.0
        for _ in range(5):
            x_try = x + lam * dx
            f_try = F(x_try)
            if np.all(np.isfinite(f_try)) and np.linalg.norm(f_try) < np.linalg.norm(f):
                break
            lam *= 0.5
        else:
            raise Bdf2ConvergenceError("Newton damping stalled in implicit step", trace)
        x, f = x_try, f_try
        trace.append(float(np.linalg.norm(f)))
        if verbose:
            print(f"  newton {it}: |F| = {trace[-1]:.3e}")
    raise Bdf2ConvergenceError("Newton did not converge in implicit step", trace)


def advance_bdf2_or_fallback(sol, sol_prev, dt, dual, gas, cfg, status=None,
                             surface=None, diagnostics=None, startup=False):
    """BDF2 step with explicit fallback; appends a note to diagnostics on
    fallback."""
    try:
        return advance_bdf2(sol, sol_prev, dt, dual, gas, cfg, status, surface,
                            startup=startup)
    except Bdf2ConvergenceError as err:
        if diagnostics is not None:
            diagnostics.append(
                {"t": sol.t, "event": "bdf2 fallback", "trace": err.trace}
            )
        return advance_span(sol, dt, dual, gas, cfg, status, surface)


def conserved_totals(W: np.ndarray, dual: DualMesh, status=None) -> np.ndarray:
    """Volume-weighted totals of (mass, momentum, energy) over active nodes."""
    act = status.active if status is not None else slice(None)
    return (dual.cv_area[act, None] * W[act]).sum(axis=0)


def refresh_uncovered(W: np.ndarray, was_active: np.ndarray, now_active: np.ndarray,
                      dual: DualMesh) -> np.ndarray:
    """Initialize freshly uncovered nodes from the average of their active
    edge neighbors (nodes active both before and after the surface motion)."""
    fresh = now_active & ~was_active
    if not np.any(fresh):
        return W
    W = W.copy()
    stable = was_active & now_active
    edges = dual.edges
    nv = W.shape[0]
    acc = np.zeros_like(W)
    cnt = np.zeros(nv)
    for a, b in ((0, 1), (1, 0)):
        sel = fresh[edges[:, a]] & stable[edges[:, b]]
        if np.any(sel):
            np.add.at(acc, edges[sel, a], W[edges[sel, b]])
            np.add.at(cnt, edges[sel, a], 1.0)
    good = fresh & (cnt > 0)
    W[good] = acc[good] / cnt[good, None]
    # Nodes with no stable neighbor keep their frozen state.
    return W
