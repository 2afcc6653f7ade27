import numpy as np
import pytest

from ddfem.geometry import Circle
from ddfem.mesh import (DIRICHLET, INFLOW, OUTFLOW, WALLS, GradedMeshSpec,
                        Mesh, MeshGenerationError, graded_mesh, interval_mesh,
                        uniform_box, write_vtk)


def test_uniform_box_counts():
    m = uniform_box((0, 0), (1, 1), 2)
    assert m.num_vertices == 9
    assert m.num_cells == 8


def test_uniform_box_area_exact():
    m = uniform_box((-1.5, 0.25), (2.5, 1.75), 7)
    assert np.sum(m.cell_measures()) == pytest.approx(4.0 * 1.5, abs=1e-12)


def test_refinement_quarters_cell_area():
    m1 = uniform_box((0, 0), (1, 1), 4)
    m2 = uniform_box((0, 0), (1, 1), 8)
    assert np.max(m2.cell_measures()) == pytest.approx(np.max(m1.cell_measures()) / 4)


def test_h_is_cell_diagonal():
    m = uniform_box((0, 0), (1, 1), 2)
    assert m.h == pytest.approx(np.sqrt(2) / 2)


def test_positive_measures_and_conformity():
    m = uniform_box((0, 0), (1, 1), 5)
    assert np.all(m.cell_measures() > 0)
    # every boundary facet belongs to exactly one cell
    edges = np.sort(np.vstack([m.cells[:, [1, 2]], m.cells[:, [2, 0]],
                               m.cells[:, [0, 1]]]), axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    boundary = {tuple(e) for e in np.sort(m.boundary_facets, axis=1)}
    for e, c in zip(uniq, counts):
        assert (c == 1) == (tuple(e) in boundary)


def test_interval_example_nodes():
    m = interval_mesh(-0.675, 0.675, 0.01)
    assert m.num_vertices == 136
    assert m.num_cells == 135
    assert m.vertices[16, 0] == pytest.approx(-0.515, abs=1e-12)
    assert m.vertices[119, 0] == pytest.approx(0.515, abs=1e-12)


def test_boundary_markers_partition_channel():
    markers = {"left": INFLOW, "right": OUTFLOW, "bottom": WALLS, "top": WALLS}
    m = uniform_box((0, 0), (2.2, 0.41), (22, 4), side_markers=markers)
    assert set(np.unique(m.facet_markers)) == {INFLOW, OUTFLOW, WALLS}
    # partition: every boundary facet got exactly one marker
    assert len(m.facet_markers) == len(m.boundary_facets)
    n_in = np.sum(m.facet_markers == INFLOW)
    n_out = np.sum(m.facet_markers == OUTFLOW)
    assert n_in == 4 and n_out == 4


GRADED = GradedMeshSpec(
    lo=(0.0, 0.0), hi=(2.2, 0.41),
    hole=Circle((0.2, 0.2), 0.05),
    h_min=0.012, h_max=0.045,
    grow_start=0.0875, grow_end=0.35,
    side_markers={"left": INFLOW, "right": OUTFLOW,
                  "bottom": WALLS, "top": WALLS},
)


def test_graded_mesh_size_field_and_quality():
    m = graded_mesh(GRADED, seed=0)
    assert m.min_angle_deg() >= 20.0
    diam = m.circumdiameters()
    mids = np.mean(m.vertices[m.cells], axis=1)
    d = np.abs(GRADED.hole.evaluate(mids))
    assert np.median(diam[d <= GRADED.grow_start]) <= 1.3 * GRADED.h_min
    assert np.median(diam[d >= GRADED.grow_end]) >= 0.7 * GRADED.h_max


def test_graded_mesh_area_and_markers():
    m = graded_mesh(GRADED, seed=0)
    area = np.sum(m.cell_measures())
    assert area == pytest.approx(2.2 * 0.41, rel=1e-10)
    assert set(np.unique(m.facet_markers)) == {INFLOW, OUTFLOW, WALLS}


def test_graded_mesh_deterministic():
    m1 = graded_mesh(GRADED, seed=3)
    m2 = graded_mesh(GRADED, seed=3)
    assert np.array_equal(m1.vertices, m2.vertices)
    assert np.array_equal(m1.cells, m2.cells)


def test_graded_uniform_when_sizes_equal():
    spec = GradedMeshSpec(lo=(0, 0), hi=(1, 1), hole=Circle((0.5, 0.5), 0.1),
                          h_min=0.06, h_max=0.06, grow_start=0.05, grow_end=0.2)
    m = graded_mesh(spec, seed=1)
    diam = m.circumdiameters()
    assert np.std(diam) / np.mean(diam) < 0.35  # statistically uniform


def test_graded_no_hole_grading():
    spec = GradedMeshSpec(lo=(0, 0), hi=(1, 1), hole=Circle((0.5, 0.5), 0.1),
                          h_min=0.02, h_max=0.08, grow_start=None, grow_end=None)
    m = graded_mesh(spec, seed=1)
    # grading disabled: everything near h_max
    assert np.median(m.circumdiameters()) >= 0.7 * spec.h_max


def test_graded_failure_reported():
    bad = GradedMeshSpec(lo=(0, 0), hi=(1, 1), hole=Circle((0.5, 0.5), 0.1),
                         h_min=0.04, h_max=0.16, grow_start=0.02, grow_end=0.1)
    # unreachable coarse target in a tiny box: generator must report, not relax
    with pytest.raises(MeshGenerationError):
        graded_mesh(bad, seed=0)


def test_vtk_export(tmp_path):
    m = uniform_box((0, 0), (1, 1), 2)
    path = tmp_path / "mesh.vtk"
    write_vtk(path, m, {"height": m.vertices[:, 1],
                        "pos": m.vertices})
    text = path.read_text()
    assert "POINTS 9 double" in text
    assert "CELLS 8 32" in text
    assert "SCALARS height double 1" in text
    assert "VECTORS pos double" in text
