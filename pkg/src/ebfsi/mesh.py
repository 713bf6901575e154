"""Unstructured triangular meshes, median-dual metrics, and adaptive bisection.

The primal mesh is simplicial with a per-triangle refinement-edge convention:
triangle (z0, z1, z2) is bisected through the midpoint of its first edge
(z0, z1), and the children (z2, z0, m) and (z1, z2, m) inherit the parent's
remaining edges as their own refinement edges. Structured "Kuhn" grids of
right isosceles triangles carry their hypotenuse as the refinement edge, which
keeps every descendant similar to the parent (the minimum angle never drops
below 45 degrees under arbitrary refinement).

The dual mesh collects everything the vertex-centered flow solver needs:
median-dual control volumes, area-weighted edge normals, boundary facets with
tags, P1 shape-function gradients, and least-squares gradient operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PrimalMesh",
    "DualMesh",
    "MeshError",
    "build_kuhn_grid",
    "unique_edges",
    "nvb_refine",
    "build_dual",
    "lsq_gradients",
    "hessian_indicator",
    "min_angle",
    "validate_mesh",
    "adapt",
    "AdaptResult",
]

_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


class MeshError(ValueError):
    """Invalid or degenerate mesh geometry."""


@dataclass(frozen=True)
class PrimalMesh:
    """Immutable simplicial mesh snapshot.

    verts: (nv, 2) coordinates. tris: (nt, 3) CCW connectivity whose first
    edge (t0, t1) is the refinement edge. edge_tags maps sorted boundary node
    pairs to integer markers.
    """

    verts: np.ndarray
    tris: np.ndarray
    edge_tags: dict = field(default_factory=dict)

    @property
    def num_vertices(self) -> int:
        return self.verts.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.tris.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.verts[self.tris]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_kuhn_grid(bounds, resolution, tags=None) -> PrimalMesh:
    """Structured grid of squares split into right triangles along one diagonal.

    bounds = ((x0, x1), (y0, y1)); resolution = nx or (nx, ny) square counts.
    Boundary edges are tagged via tags = {"left": i, "right": i, "bottom": i,
    "top": i} (defaults 1, 2, 3, 4). The diagonal is the refinement edge of
    both triangles in each square, giving a conforming mesh that admits
    unbounded newest-vertex bisection without shape degeneration.
    """
    (x0, x1), (y0, y1) = bounds
    if np.isscalar(resolution):
        nx = ny = int(resolution)
    else:
        nx, ny = (int(r) for r in resolution)
    if nx < 1 or ny < 1 or x1 <= x0 or y1 <= y0:
        raise MeshError("need positive resolution and a non-empty box")
    tags = tags or {"left": 1, "right": 2, "bottom": 3, "top": 4}

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    a = (J * (nx + 1) + I).ravel()          # (i, j)
    b = a + 1                               # (i+1, j)
    c = b + (nx + 1)                        # (i+1, j+1)
    d = a + (nx + 1)                        # (i, j+1)
    # Diagonal a-c is the hypotenuse; both triangles use it as refinement edge.
    lower = np.column_stack([c, a, b])
    upper = np.column_stack([a, c, d])
    tris = np.vstack([lower, upper]).astype(np.int64)

    edge_tags = {}
    for i in range(nx):
        edge_tags[tuple(sorted((vid(i, 0), vid(i + 1, 0))))] = tags["bottom"]
        edge_tags[tuple(sorted((vid(i, ny), vid(i + 1, ny))))] = tags["top"]
    for j in range(ny):
        edge_tags[tuple(sorted((vid(0, j), vid(0, j + 1))))] = tags["left"]
        edge_tags[tuple(sorted((vid(nx, j), vid(nx, j + 1))))] = tags["right"]
    return PrimalMesh(verts=verts, tris=tris, edge_tags=edge_tags)


def unique_edges(tris: np.ndarray):
    """Sorted unique edges, per-triangle edge ids (local order (01, 12, 20)),
    per-edge incidence counts."""
    raw = np.concatenate([tris[:, [a, b]] for a, b in _LOCAL_EDGES])
    raw_sorted = np.sort(raw, axis=1)
    edges, inverse, counts = np.unique(
        raw_sorted, axis=0, return_inverse=True, return_counts=True
    )
    tri_edge = inverse.reshape(3, -1).T
    return edges, tri_edge, counts


def nvb_refine(mesh: PrimalMesh, marked_tris, marked_edges=None):
    """Bisect marked triangles (plus completion) by newest-vertex bisection.

    marked_tris: boolean mask or index array over triangles; marked_edges:
    optional edge index array (into the unique_edges numbering) that must be
    split regardless of triangle marks. Returns (refined_mesh, parents) where
    parents[k] holds the endpoint node ids of the edge that spawned new vertex
    mesh.num_vertices + k (midpoint), for field transfer.
    """
    tris = mesh.tris
    nt = tris.shape[0]
    mt = np.asarray(marked_tris)
    if mt.dtype == bool:
        marked = mt.copy()
    else:
        marked = np.zeros(nt, dtype=bool)
        marked[mt.astype(int)] = True
    edges, tri_edge, _ = unique_edges(tris)
    ne = edges.shape[0]
    edge_marked = np.zeros(ne, dtype=bool)
    edge_marked[tri_edge[marked, 0]] = True
    if marked_edges is not None and len(np.atleast_1d(marked_edges)):
        edge_marked[np.asarray(marked_edges, dtype=int)] = True

    # Completion: a triangle with any marked edge must have its refinement
    # edge marked; iterate to a fixed point.
    while True:
        has_mark = edge_marked[tri_edge].any(axis=1)
        need = has_mark & ~edge_marked[tri_edge[:, 0]]
        if not need.any():
            break
        edge_marked[tri_edge[need, 0]] = True

    if not edge_marked.any():
        return mesh, np.zeros((0, 2), dtype=np.int64)

    nv = mesh.num_vertices
    new_id = -np.ones(ne, dtype=np.int64)
    split_edges = np.nonzero(edge_marked)[0]
    new_id[split_edges] = nv + np.arange(split_edges.size)
    parents = edges[split_edges]
    mid_coords = 0.5 * (mesh.verts[parents[:, 0]] + mesh.verts[parents[:, 1]])
    verts = np.vstack([mesh.verts, mid_coords])

    m01 = edge_marked[tri_edge[:, 0]]
    m12 = edge_marked[tri_edge[:, 1]]
    m20 = edge_marked[tri_edge[:, 2]]
    z0, z1, z2 = tris[:, 0], tris[:, 1], tris[:, 2]
    mid01 = new_id[tri_edge[:, 0]]
    mid12 = new_id[tri_edge[:, 1]]
    mid20 = new_id[tri_edge[:, 2]]

    chunks = [tris[~m01]]
    # First bisection: T1 = (z2, z0, m01), T2 = (z1, z2, m01).
    k = m01 & ~m20
    chunks.append(np.column_stack([z2[k], z0[k], mid01[k]]))
    k = m01 & m20  # T1 bisected again through parent edge (z2, z0)
    chunks.append(np.column_stack([mid01[k], z2[k], mid20[k]]))
    chunks.append(np.column_stack([z0[k], mid01[k], mid20[k]]))
    k = m01 & ~m12
    chunks.append(np.column_stack([z1[k], z2[k], mid01[k]]))
    k = m01 & m12  # T2 bisected again through parent edge (z1, z2)
    chunks.append(np.column_stack([mid01[k], z1[k], mid12[k]]))
    chunks.append(np.column_stack([z2[k], mid01[k], mid12[k]]))
    new_tris = np.vstack([c for c in chunks if len(c)])

    edge_tags = {}
    eid_of = {tuple(e): i for i, e in enumerate(map(tuple, edges))}
    for (a, b), tag in mesh.edge_tags.items():
        eid = eid_of[(a, b) if a < b else (b, a)]
        if edge_marked[eid]:
            m = new_id[eid]
            edge_tags[tuple(sorted((a, int(m))))] = tag
            edge_tags[tuple(sorted((int(m), b)))] = tag
        else:
            edge_tags[(a, b)] = tag
    return PrimalMesh(verts=verts, tris=new_tris, edge_tags=edge_tags), parents


@dataclass(frozen=True)
class DualMesh:
    """Median-dual metrics plus assembly operators for one primal snapshot."""

    mesh: PrimalMesh
    edges: np.ndarray        # (ne, 2) node pairs, i < j
    edge_normal: np.ndarray  # (ne, 2) area-weighted normal, oriented i -> j
    edge_vec: np.ndarray     # (ne, 2) x_j - x_i
    cv_area: np.ndarray      # (nv,)
    cv_diam: np.ndarray      # (nv,) sqrt of the CV measure
    bnd_node: np.ndarray     # (nb,) node of each boundary facet half
    bnd_normal: np.ndarray   # (nb, 2) area-weighted outward normal
    bnd_tag: np.ndarray      # (nb,)
    tri_area: np.ndarray     # (nt,)
    tri_grad: np.ndarray     # (nt, 3, 2) P1 shape gradients
    tri_edge: np.ndarray     # (nt, 3) edge ids in local order
    lsq_inv: np.ndarray      # (nv, 2, 2)

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]


def build_dual(mesh: PrimalMesh) -> DualMesh:
    """Assemble median-dual geometry and gradient operators.

    Raises MeshError on degenerate (non-positive area) triangles. The
    resulting normals satisfy the closed-surface identity: for every node the
    interior edge normals plus boundary facet normals sum to zero.
    """
    verts, tris = mesh.verts, mesh.tris
    nv, nt = mesh.num_vertices, mesh.num_triangles
    p = verts[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    tri_area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(tri_area <= 0.0):
        raise MeshError(f"{int(np.sum(tri_area <= 0))} degenerate or flipped triangles")

    edges, tri_edge, counts = unique_edges(tris)
    ne = edges.shape[0]
    if np.any(counts > 2):
        raise MeshError("non-manifold edge (more than two incident triangles)")

    centroid = p.mean(axis=1)
    edge_normal = np.zeros((ne, 2))
    for k, (a, b) in enumerate(_LOCAL_EDGES):
        mid = 0.5 * (p[:, a] + p[:, b])
        seg = centroid - mid
        contrib = np.column_stack([seg[:, 1], -seg[:, 0]])  # oriented a -> b
        eids = tri_edge[:, k]
        flip = tris[:, a] > tris[:, b]
        contrib[flip] *= -1.0
        np.add.at(edge_normal, eids, contrib)

    cv_area = np.bincount(tris.ravel(), weights=np.repeat(tri_area / 3.0, 3), minlength=nv)

    bnd_mask = counts == 1
    bnd_eids = np.nonzero(bnd_mask)[0]
    # Locate the owning triangle of each boundary edge for orientation.
    owner = np.full(ne, -1, dtype=np.int64)
    for k in range(3):
        owner[tri_edge[:, k]] = np.arange(nt)
    bnd_nodes = []
    bnd_norms = []
    bnd_tags = []
    for eid in bnd_eids:
        a, b = edges[eid]
        t = owner[eid]
        ev = verts[b] - verts[a]
        n = np.array([ev[1], -ev[0]])
        mid = 0.5 * (verts[a] + verts[b])
        if n @ (centroid[t] - mid) > 0.0:
            n = -n
        tag = mesh.edge_tags.get((int(a), int(b)), 0)
        bnd_nodes.extend([a, b])
        bnd_norms.extend([0.5 * n, 0.5 * n])
        bnd_tags.extend([tag, tag])
    bnd_node = np.asarray(bnd_nodes, dtype=np.int64).reshape(-1)
    bnd_normal = np.asarray(bnd_norms, dtype=float).reshape(-1, 2)
    bnd_tag = np.asarray(bnd_tags, dtype=np.int64).reshape(-1)

    # P1 shape-function gradients.
    tri_grad = np.empty((nt, 3, 2))
    for k in range(3):
        pa = p[:, (k + 1) % 3]
        pb = p[:, (k + 2) % 3]
        tri_grad[:, k, 0] = (pa[:, 1] - pb[:, 1]) / (2.0 * tri_area)
        tri_grad[:, k, 1] = (pb[:, 0] - pa[:, 0]) / (2.0 * tri_area)

    edge_vec = verts[edges[:, 1]] - verts[edges[:, 0]]
    A = np.zeros((nv, 2, 2))
    outer = edge_vec[:, :, None] * edge_vec[:, None, :]
    for r in range(2):
        for c in range(2):
            acc = np.bincount(edges[:, 0], weights=outer[:, r, c], minlength=nv)
            acc += np.bincount(edges[:, 1], weights=outer[:, r, c], minlength=nv)
            A[:, r, c] = acc
    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    ok = np.abs(det) > 1e-300
    lsq_inv = np.zeros_like(A)
    lsq_inv[ok, 0, 0] = A[ok, 1, 1] / det[ok]
    lsq_inv[ok, 1, 1] = A[ok, 0, 0] / det[ok]
    lsq_inv[ok, 0, 1] = -A[ok, 0, 1] / det[ok]
    lsq_inv[ok, 1, 0] = -A[ok, 1, 0] / det[ok]

    return DualMesh(
        mesh=mesh,
        edges=edges,
        edge_normal=edge_normal,
        edge_vec=edge_vec,
        cv_area=cv_area,
        cv_diam=np.sqrt(cv_area),
        bnd_node=bnd_node,
        bnd_normal=bnd_normal,
        bnd_tag=bnd_tag,
        tri_area=tri_area,
        tri_grad=tri_grad,
        tri_edge=tri_edge,
        lsq_inv=lsq_inv,
    )


def scatter_edge_sums(edges: np.ndarray, values: np.ndarray, nv: int,
                      sign_j: float = 1.0) -> np.ndarray:
    """Accumulate per-edge vectors into per-node sums with bincount.

    values has shape (ne, k); the contribution to node i is +values and to
    node j is sign_j * values. Returns (nv, k).
    """
    k = values.shape[1]
    out = np.empty((nv, k))
    for c in range(k):
        acc = np.bincount(edges[:, 0], weights=values[:, c], minlength=nv)
        acc += sign_j * np.bincount(edges[:, 1], weights=values[:, c], minlength=nv)
        out[:, c] = acc
    return out


def lsq_gradients(dual: DualMesh, values: np.ndarray) -> np.ndarray:
    """Unweighted least-squares nodal gradients over edge-connected neighbors.

    values: (nv,) or (nv, k). Returns (nv, k, 2); exact for linear fields.
    """
    vals = np.asarray(values, dtype=float)
    squeeze = vals.ndim == 1
    if squeeze:
        vals = vals[:, None]
    nv, k = vals.shape
    du = vals[dual.edges[:, 1]] - vals[dual.edges[:, 0]]
    b = np.empty((nv, k, 2))
    for c in range(k):
        contrib = du[:, c : c + 1] * dual.edge_vec
        b[:, c, :] = scatter_edge_sums(dual.edges, contrib, nv, sign_j=1.0)
    grads = np.einsum("vde,vke->vkd", dual.lsq_inv, b)
    return grads[:, 0, :] if squeeze else grads


def hessian_indicator(field: np.ndarray, dual: DualMesh) -> np.ndarray:
    """Per-triangle refinement score: recovered Hessian magnitude times h^2.

    Gradients are recovered twice by least squares; the local size squared is
    twice the triangle area (the squared leg of a right isosceles triangle).
    Linear fields score exactly zero.
    """
    g = lsq_gradients(dual, np.asarray(field, dtype=float))
    H = lsq_gradients(dual, g)  # (nv, 2, 2)
    H = 0.5 * (H + np.swapaxes(H, 1, 2))
    mag = np.sqrt(np.sum(H * H, axis=(1, 2)))
    tri_mag = mag[dual.mesh.tris].mean(axis=1)
    return tri_mag * (2.0 * dual.tri_area)


def min_angle(mesh: PrimalMesh) -> float:
    """Global minimum interior angle in radians."""
    p = mesh.verts[mesh.tris]
    angles = []
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        cosang = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return float(np.min(angles))


def validate_mesh(mesh: PrimalMesh) -> dict:
    """Conformity audit: positive areas, manifold edge incidence, tags on
    boundary edges only. Returns a small report; raises MeshError on failure."""
    areas = mesh.signed_areas()
    if np.any(areas <= 0.0):
        raise MeshError("non-positive triangle area")
    edges, _, counts = unique_edges(mesh.tris)
    if np.any((counts < 1) | (counts > 2)):
        raise MeshError("edge incidence outside {1, 2}")
    boundary = {tuple(e) for e in edges[counts == 1]}
    for key in mesh.edge_tags:
        if key not in boundary:
            raise MeshError(f"tagged edge {key} is not a boundary edge")
    untagged = boundary - set(mesh.edge_tags)
    return {
        "num_vertices": mesh.num_vertices,
        "num_triangles": mesh.num_triangles,
        "num_boundary_edges": len(boundary),
        "num_untagged_boundary": len(untagged),
        "min_angle_deg": np.degrees(min_angle(mesh)),
    }


@dataclass(frozen=True)
class AdaptResult:
    mesh: PrimalMesh
    dual: DualMesh
    fields: np.ndarray | None
    refined: bool
    report: dict


def adapt(mesh: PrimalMesh, dual: DualMesh, tri_scores, threshold,
          fields=None, marked_edges=None, vertex_budget: int = 2_000_000) -> AdaptResult:
    """One refinement round: mark triangles whose score exceeds threshold plus
    any directly marked edges, bisect with completion, rebuild the dual, and
    linearly interpolate nodal fields to new midpoints.

    Stops gracefully (refined=False, budget flag set) when the vertex budget
    is reached.
    """
    marked = np.asarray(tri_scores) > threshold if tri_scores is not None else np.zeros(mesh.num_triangles, bool)
    has_edges = marked_edges is not None and len(np.atleast_1d(marked_edges)) > 0
    if not marked.any() and not has_edges:
        return AdaptResult(mesh, dual, fields, False, {"reason": "no marks"})
    if mesh.num_vertices >= vertex_budget:
        return AdaptResult(mesh, dual, fields, False, {"reason": "vertex budget exhausted"})
    new_mesh, parents = nvb_refine(mesh, marked, marked_edges)
    if new_mesh is mesh:
        return AdaptResult(mesh, dual, fields, False, {"reason": "no marks"})
    new_dual = build_dual(new_mesh)
    new_fields = None
    if fields is not None:
        fields = np.asarray(fields)
        extra = 0.5 * (fields[parents[:, 0]] + fields[parents[:, 1]])
        new_fields = np.concatenate([fields, extra], axis=0)
    report = {
        "new_vertices": int(parents.shape[0]),
        "num_triangles": new_mesh.num_triangles,
    }
    return AdaptResult(new_mesh, new_dual, new_fields, True, report)
