import numpy as np
import pytest

from ebfsi.embedded import EmbeddedSurface, KIND_CABLE, KIND_CANOPY, KIND_RIGID
from ebfsi.ioformats import (
    HISTORY_COLUMNS,
    load_checkpoint,
    read_history,
    read_mesh,
    read_structural_model,
    read_surface,
    save_checkpoint,
    write_history,
    write_mesh,
    write_snapshot,
    write_structural_model,
    write_surface,
)
from ebfsi.mesh import build_kuhn_grid, nvb_refine
from ebfsi.structure import ContactPair, Material, make_model


def test_mesh_roundtrip(tmp_path):
    m, _ = nvb_refine(build_kuhn_grid(((0.0, 2.0), (0.0, 1.0)), 3), [0, 4])
    path = tmp_path / "mesh.txt"
    write_mesh(m, path)
    back = read_mesh(path)
    np.testing.assert_array_equal(back.verts, m.verts)
    np.testing.assert_array_equal(back.tris, m.tris)
    assert back.edge_tags == m.edge_tags


def test_surface_roundtrip(tmp_path):
    surf = EmbeddedSurface(
        nodes=np.array([[0.1, 0.2], [0.9, 0.2], [0.5, 0.8]]),
        facets=np.array([[0, 1], [1, 2]]),
        alpha=np.array([0.08, 0.0]),
        kind=np.array([KIND_CANOPY, KIND_CABLE]),
    )
    path = tmp_path / "surface.txt"
    write_surface(surf, path)
    back = read_surface(path)
    np.testing.assert_array_equal(back.nodes, surf.nodes)
    np.testing.assert_array_equal(back.facets, surf.facets)
    np.testing.assert_array_equal(back.alpha, surf.alpha)
    np.testing.assert_array_equal(back.kind, surf.kind)


def test_history_roundtrip(tmp_path):
    rows = [
        {c: float(k + i) for i, c in enumerate(HISTORY_COLUMNS)} for k in range(4)
    ]
    path = tmp_path / "history.txt"
    write_history(path, rows)
    back = read_history(path)
    for i, c in enumerate(HISTORY_COLUMNS):
        np.testing.assert_array_equal(back[c], [k + i for k in range(4)])


def test_snapshot_writes_columns(tmp_path):
    m = build_kuhn_grid(((0.0, 1.0), (0.0, 1.0)), 2)
    V = np.tile([1.0, 2.0, 3.0, 4.0], (m.num_vertices, 1))
    path = tmp_path / "snap.txt"
    write_snapshot(path, m.verts, V, np.full(m.num_vertices, 0.5))
    data = np.loadtxt(path)
    assert data.shape == (m.num_vertices, 9)
    np.testing.assert_allclose(data[:, 3:7], V)


def test_structural_model_roundtrip(tmp_path):
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [1.5, 1.0]])
    beam_mat = Material(E=2e10, nu=0.4, rho=1000.0, area=1e-5, inertia=1e-11)
    mem_mat = Material(E=9e8, nu=0.4, rho=1100.0, thickness=7e-5)
    fixed = np.zeros((4, 3), dtype=bool)
    fixed[0] = True
    pair = ContactPair(nodes=np.array([3]), segments=np.array([[0, 1]]),
                       outward=-1.0, stiffness=250.0)
    model = make_model(nodes, beams=[[0, 1], [2, 3]], membranes=[[0, 1, 2]],
                       beam_material=beam_mat, mem_material=mem_mat,
                       fixed=fixed, contact_pairs=[pair])
    path = tmp_path / "model.txt"
    write_structural_model(model, path, beam_material=beam_mat, mem_material=mem_mat)
    back = read_structural_model(path)
    np.testing.assert_array_equal(back.nodes, model.nodes)
    np.testing.assert_array_equal(back.beams, model.beams)
    np.testing.assert_array_equal(back.membranes, model.membranes)
    np.testing.assert_array_equal(back.fixed, model.fixed)
    np.testing.assert_allclose(back.beam_EA, model.beam_EA)
    np.testing.assert_allclose(back.mem_lam, model.mem_lam)
    np.testing.assert_allclose(back.mass, model.mass)
    assert len(back.contact_pairs) == 1
    np.testing.assert_array_equal(back.contact_pairs[0].nodes, pair.nodes)
    np.testing.assert_array_equal(back.contact_pairs[0].segments, pair.segments)
    assert back.contact_pairs[0].outward == pair.outward
    assert back.contact_pairs[0].stiffness == pair.stiffness


def test_checkpoint_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    W = rng.standard_normal((37, 4))
    path = tmp_path / "chk.npz"
    save_checkpoint(path, W=W, t=np.float64(0.1234567890123456789))
    back = load_checkpoint(path)
    np.testing.assert_array_equal(back["W"], W)
    assert float(back["t"]) == float(np.float64(0.1234567890123456789))
