"""Plain-text file formats for meshes, surfaces, fields, histories, models.

Every format is line-oriented with '#' comments and explicit section counts,
so files are greppable and diffable; docs/formats.md carries worked examples.
Checkpoints use numpy's npz container because bit-exact restart requires
binary floating-point state.
"""

from __future__ import annotations

import io

import numpy as np

from .embedded import EmbeddedSurface, KIND_LABELS, KIND_NAMES
from .mesh import PrimalMesh
from .structure import ContactPair, Material, StructuralModel, make_model

__all__ = [
    "write_mesh", "read_mesh",
    "write_surface", "read_surface",
    "write_snapshot",
    "write_history", "read_history",
    "write_structural_model", "read_structural_model",
    "save_checkpoint", "load_checkpoint",
]

HISTORY_COLUMNS = (
    "t", "drag_total", "drag_canopy", "drag_cable",
    "vm_max", "vm_topk_mean", "work_fluid", "work_struct",
)


def _tokens(text: str):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line.split()


def write_mesh(mesh: PrimalMesh, path) -> None:
    """vertices / triangles / boundary_tags sections."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# mesh: vertex table, triangle table (refinement edge = first two), tags\n")
        fh.write(f"vertices {mesh.num_vertices}\n")
        for x, y in mesh.verts:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"triangles {mesh.num_triangles}\n")
        for a, b, c in mesh.tris:
            fh.write(f"{a} {b} {c}\n")
        fh.write(f"boundary_tags {len(mesh.edge_tags)}\n")
        for (a, b), tag in sorted(mesh.edge_tags.items()):
            fh.write(f"{a} {b} {tag}\n")


def read_mesh(path) -> PrimalMesh:
    with open(path, "r", encoding="utf-8") as fh:
        toks = list(_tokens(fh.read()))
    k = 0
    assert toks[k][0] == "vertices"
    nv = int(toks[k][1]); k += 1
    verts = np.array([[float(t) for t in toks[k + i]] for i in range(nv)])
    k += nv
    assert toks[k][0] == "triangles"
    nt = int(toks[k][1]); k += 1
    tris = np.array([[int(t) for t in toks[k + i]] for i in range(nt)], dtype=np.int64)
    k += nt
    assert toks[k][0] == "boundary_tags"
    nb = int(toks[k][1]); k += 1
    tags = {}
    for i in range(nb):
        a, b, tag = (int(t) for t in toks[k + i])
        tags[(a, b)] = tag
    return PrimalMesh(verts=verts, tris=tris, edge_tags=tags)


def write_surface(surface: EmbeddedSurface, path) -> None:
    """nodes / facets sections; facets carry porosity and a kind label."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# embedded surface: node table, facet table (a b alpha kind)\n")
        fh.write(f"nodes {surface.nodes.shape[0]}\n")
        for x, y in surface.nodes:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"facets {surface.num_facets}\n")
        for f in range(surface.num_facets):
            a, b = surface.facets[f]
            fh.write(f"{a} {b} {float(surface.alpha[f])!r} {KIND_LABELS[int(surface.kind[f])]}\n")


def read_surface(path) -> EmbeddedSurface:
    with open(path, "r", encoding="utf-8") as fh:
        toks = list(_tokens(fh.read()))
    k = 0
    assert toks[k][0] == "nodes"
    ns = int(toks[k][1]); k += 1
    nodes = np.array([[float(t) for t in toks[k + i]] for i in range(ns)])
    k += ns
    assert toks[k][0] == "facets"
    nf = int(toks[k][1]); k += 1
    facets, alpha, kind = [], [], []
    for i in range(nf):
        a, b, al, kd = toks[k + i]
        facets.append((int(a), int(b)))
        alpha.append(float(al))
        kind.append(KIND_NAMES[kd])
    return EmbeddedSurface(nodes=nodes, facets=np.array(facets, np.int64),
                           alpha=np.array(alpha), kind=np.array(kind, np.int64))


def write_snapshot(path, verts, V, mach, active=None) -> None:
    """Columnar nodal field dump: id x y rho vx vy p mach active."""
    act = np.ones(len(verts), dtype=bool) if active is None else active
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# id x y rho vx vy p mach active\n")
        for i in range(len(verts)):
            vals = " ".join(repr(float(v)) for v in
                             (verts[i, 0], verts[i, 1], V[i, 0], V[i, 1],
                              V[i, 2], V[i, 3], mach[i]))
            fh.write(f"{i} {vals} {int(act[i])}\n")


def write_history(path, rows) -> None:
    """Columnar time history; rows are dicts with HISTORY_COLUMNS keys."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(HISTORY_COLUMNS) + "\n")
        for row in rows:
            fh.write(" ".join(repr(float(row.get(c, 0.0))) for c in HISTORY_COLUMNS) + "\n")


def read_history(path) -> dict:
    data = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                data.append([float(t) for t in line.split()])
    arr = np.asarray(data)
    if arr.size == 0:
        arr = np.zeros((0, len(HISTORY_COLUMNS)))
    return {c: arr[:, k] for k, c in enumerate(HISTORY_COLUMNS)}


def write_structural_model(model: StructuralModel, path,
                           beam_material: Material = None,
                           mem_material: Material = None) -> None:
    """nodes / materials / beams / membranes / fixed / contact sections."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# structural model: nodes, materials, elements, constraints, contact\n")
        fh.write(f"nodes {model.num_nodes}\n")
        for x, y in model.nodes:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        if beam_material is not None:
            m = beam_material
            fh.write(f"beam_material {m.E!r} {m.nu!r} {m.rho!r} {m.area!r} {m.inertia!r}\n")
        if mem_material is not None:
            m = mem_material
            fh.write(f"membrane_material {m.E!r} {m.nu!r} {m.rho!r} {m.thickness!r}\n")
        fh.write(f"beams {len(model.beams)}\n")
        for i, j in model.beams:
            fh.write(f"{i} {j}\n")
        fh.write(f"membranes {len(model.membranes)}\n")
        for i, j, k in model.membranes:
            fh.write(f"{i} {j} {k}\n")
        fixed_rows = np.nonzero(model.fixed.any(axis=1))[0]
        fh.write(f"fixed {len(fixed_rows)}\n")
        for n in fixed_rows:
            fx, fy, fth = (int(b) for b in model.fixed[n])
            fh.write(f"{n} {fx} {fy} {fth}\n")
        fh.write(f"contact_pairs {len(model.contact_pairs)}\n")
        for pair in model.contact_pairs:
            fh.write(f"pair {len(pair.nodes)} {len(pair.segments)} "
                     f"{pair.outward!r} {pair.stiffness!r}\n")
            fh.write(" ".join(str(int(n)) for n in pair.nodes) + "\n")
            for a, b in pair.segments:
                fh.write(f"{a} {b}\n")


def read_structural_model(path) -> StructuralModel:
    with open(path, "r", encoding="utf-8") as fh:
        toks = list(_tokens(fh.read()))
    k = 0
    assert toks[k][0] == "nodes"
    nn = int(toks[k][1]); k += 1
    nodes = np.array([[float(t) for t in toks[k + i]] for i in range(nn)])
    k += nn
    beam_mat = mem_mat = None
    while toks[k][0] in ("beam_material", "membrane_material"):
        if toks[k][0] == "beam_material":
            E, nu, rho, area, inertia = (float(t) for t in toks[k][1:])
            beam_mat = Material(E=E, nu=nu, rho=rho, area=area, inertia=inertia)
        else:
            E, nu, rho, th = (float(t) for t in toks[k][1:])
            mem_mat = Material(E=E, nu=nu, rho=rho, thickness=th)
        k += 1
    assert toks[k][0] == "beams"
    nb = int(toks[k][1]); k += 1
    beams = np.array([[int(t) for t in toks[k + i]] for i in range(nb)], np.int64).reshape(nb, 2)
    k += nb
    assert toks[k][0] == "membranes"
    nm = int(toks[k][1]); k += 1
    membranes = np.array([[int(t) for t in toks[k + i]] for i in range(nm)], np.int64).reshape(nm, 3)
    k += nm
    assert toks[k][0] == "fixed"
    nfx = int(toks[k][1]); k += 1
    fixed = np.zeros((nn, 3), dtype=bool)
    for i in range(nfx):
        n, fx, fy, fth = (int(t) for t in toks[k + i])
        fixed[n] = (bool(fx), bool(fy), bool(fth))
    k += nfx
    assert toks[k][0] == "contact_pairs"
    npairs = int(toks[k][1]); k += 1
    pairs = []
    for _ in range(npairs):
        assert toks[k][0] == "pair"
        n_nodes, n_segs = int(toks[k][1]), int(toks[k][2])
        outward, stiffness = float(toks[k][3]), float(toks[k][4])
        k += 1
        pnodes = np.array([int(t) for t in toks[k]], np.int64)
        k += 1
        segs = np.array([[int(t) for t in toks[k + i]] for i in range(n_segs)], np.int64)
        k += n_segs
        pairs.append(ContactPair(nodes=pnodes, segments=segs.reshape(n_segs, 2),
                                 outward=outward, stiffness=stiffness))
    return make_model(nodes, beams=beams if nb else None,
                      membranes=membranes if nm else None,
                      beam_material=beam_mat, mem_material=mem_mat,
                      fixed=fixed, contact_pairs=pairs)


def save_checkpoint(path, **arrays) -> None:
    """Bit-exact state container (npz); scalars pass as 0-d arrays."""
    np.savez(path, **arrays)


def load_checkpoint(path) -> dict:
    with np.load(path, allow_pickle=False) as data:
        return {k: data[k] for k in data.files}
