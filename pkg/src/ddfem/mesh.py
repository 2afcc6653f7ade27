"""Interval and triangular meshes: structured boxes, graded channel meshes.

Triangulations are conforming with positively oriented cells. Boundary
facets carry integer markers (default ``DIRICHLET`` on the whole outer
boundary); the graded channel mesh marks inflow/outflow/walls separately.
Mesh size ``h`` is reported as the maximum cell circumdiameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

__all__ = [
    "Mesh",
    "GradedMeshSpec",
    "MeshGenerationError",
    "uniform_box",
    "interval_mesh",
    "graded_mesh",
    "write_vtk",
    "DIRICHLET",
    "INFLOW",
    "OUTFLOW",
    "WALLS",
]

DIRICHLET = 1
INFLOW = 2
OUTFLOW = 3
WALLS = 4


class MeshGenerationError(RuntimeError):
    """Size field or quality floor could not be met."""


@dataclass
class Mesh:
    dim: int
    vertices: np.ndarray          # (nv, dim)
    cells: np.ndarray             # (nc, dim+1) vertex indices
    boundary_facets: np.ndarray   # (nf, dim) vertex indices
    facet_markers: np.ndarray     # (nf,)
    h: float = 0.0                # max circumdiameter
    marker_names: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.h == 0.0:
            self.h = float(np.max(self.circumdiameters()))

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_cells(self):
        return len(self.cells)

    def cell_measures(self):
        v = self.vertices[self.cells]
        if self.dim == 1:
            return np.abs(v[:, 1, 0] - v[:, 0, 0])
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def circumdiameters(self):
        v = self.vertices[self.cells]
        if self.dim == 1:
            return np.abs(v[:, 1, 0] - v[:, 0, 0])
        a = np.linalg.norm(v[:, 1] - v[:, 0], axis=1)
        b = np.linalg.norm(v[:, 2] - v[:, 1], axis=1)
        c = np.linalg.norm(v[:, 0] - v[:, 2], axis=1)
        area = self.cell_measures()
        return a * b * c / (2.0 * np.maximum(area, 1e-300))

    def min_angle_deg(self):
        if self.dim == 1:
            return 60.0
        v = self.vertices[self.cells]
        angles = []
        for i in range(3):
            e1 = v[:, (i + 1) % 3] - v[:, i]
            e2 = v[:, (i + 2) % 3] - v[:, i]
            cosang = np.sum(e1 * e2, axis=1) / (
                np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
            )
            angles.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
        return float(np.min(angles))

    def boundary_vertex_ids(self, markers=None):
        sel = np.ones(len(self.boundary_facets), dtype=bool)
        if markers is not None:
            sel = np.isin(self.facet_markers, list(markers))
        return np.unique(self.boundary_facets[sel])


def _positively_orient(vertices, cells):
    v = vertices[cells]
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    flip = det < 0.0
    cells = cells.copy()
    cells[flip] = cells[flip][:, [0, 2, 1]]
    return cells


def _box_boundary_facets(vertices, cells, lo, hi, side_markers=None, tol=1e-10):
    """Boundary edges of a triangulated box, marked per side."""
    edges = np.vstack(
        [cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]]
    )
    edges_sorted = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges_sorted, axis=0, return_counts=True)
    bnd = uniq[counts == 1]
    mids = 0.5 * (vertices[bnd[:, 0]] + vertices[bnd[:, 1]])
    scale = max(hi[0] - lo[0], hi[1] - lo[1])
    markers = np.full(len(bnd), DIRICHLET, dtype=int)
    if side_markers is not None:
        sides = {
            "left": np.abs(mids[:, 0] - lo[0]) < tol * scale,
            "right": np.abs(mids[:, 0] - hi[0]) < tol * scale,
            "bottom": np.abs(mids[:, 1] - lo[1]) < tol * scale,
            "top": np.abs(mids[:, 1] - hi[1]) < tol * scale,
        }
        for name, mk in side_markers.items():
            markers[sides[name]] = mk
    return bnd, markers


def uniform_box(lo, hi, n, side_markers=None):
    """Structured crisscross triangulation: n x n squares, 2 n^2 triangles.

    ``n`` may be an int or an (nx, ny) pair. The recorded h equals the
    cell diagonal (box diagonal / n for square boxes).
    """
    nx, ny = (n, n) if np.isscalar(n) else n
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00, v10 = vid(i, j), vid(i + 1, j)
    v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
    cells = np.vstack(
        [np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])]
    )
    facets, markers = _box_boundary_facets(vertices, cells, lo, hi, side_markers)
    names = {DIRICHLET: "dirichlet"}
    if side_markers:
        names.update({v: k for k, v in side_markers.items()})
    return Mesh(2, vertices, cells, facets, markers, marker_names=names)


def interval_mesh(a, b, h):
    """Equispaced 1D mesh; node i sits at a + i*h (h adjusted to divide b-a)."""
    n = int(round((b - a) / h))
    if n < 1:
        raise ValueError("h too large for the interval")
    xs = a + (b - a) * np.arange(n + 1) / n
    vertices = xs[:, None]
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    facets = np.array([[0], [n]])
    markers = np.array([DIRICHLET, DIRICHLET])
    return Mesh(1, vertices, cells, facets, markers,
                marker_names={DIRICHLET: "dirichlet"})


@dataclass
class GradedMeshSpec:
    """Size field: h_min within |r| <= grow_start of the hole interface,
    linear ramp to h_max at grow_end, h_max beyond. grow_start=None
    disables grading (uniform h_max)."""

    lo: tuple
    hi: tuple
    hole: object = None   # SignedDistance; grading keys on |r_hole|
    h_min: float = 0.0
    h_max: float = 0.0
    grow_start: float = None
    grow_end: float = None
    side_markers: dict = None

    def size(self, p):
        p = np.asarray(p, dtype=float)
        if self.hole is None or self.grow_start is None or not np.isfinite(self.grow_start):
            return np.full(p.shape[:-1], self.h_max)
        d = np.abs(self.hole.evaluate(p))
        t = np.clip((d - self.grow_start) / (self.grow_end - self.grow_start), 0.0, 1.0)
        return self.h_min + t * (self.h_max - self.h_min)


def graded_mesh(spec, seed=0, max_iter=150, check_quality=True):
    """Size-field driven triangulation of a rectangle (force-relaxed Delaunay).

    Points repel along Delaunay edges toward the target local spacing and
    are retriangulated as they move; the rectangle is convex so the final
    Delaunay tessellation covers it exactly. Deterministic for fixed seed.
    """
    lo = np.asarray(spec.lo, dtype=float)
    hi = np.asarray(spec.hi, dtype=float)
    if spec.h_min <= 0.0 and spec.h_max <= 0.0:
        raise ValueError("spec needs positive sizes")
    hmin = spec.h_min if spec.h_min > 0 else spec.h_max
    rng = np.random.default_rng(seed)

    # seed candidates on an equilateral lattice at the finest spacing
    xs = np.arange(lo[0], hi[0] + 0.5 * hmin, hmin)
    ys = np.arange(lo[1], hi[1] + 0.5 * hmin * np.sqrt(3) / 2, hmin * np.sqrt(3) / 2)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    X[1::2] += 0.5 * hmin
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts = pts[(pts[:, 0] <= hi[0]) & (pts[:, 1] <= hi[1])]
    # thin out by the size field (keep probability (hmin/size)^2)
    prob = (hmin / spec.size(pts)) ** 2
    pts = pts[rng.random(len(pts)) < prob]

    corners = np.array(
        [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]
    )
    keep = np.min(np.linalg.norm(pts[:, None] - corners[None], axis=2), axis=1) > 0.5 * hmin
    pts = np.vstack([corners, pts[keep]])
    nfix = len(corners)

    fscale, deltat, dptol = 1.2, 0.2, 0.001
    old = np.full_like(pts, np.inf)
    tri = None
    for _ in range(max_iter):
        if np.max(np.linalg.norm(pts - old, axis=1)) > 0.1 * hmin:
            old = pts.copy()
            tri = Delaunay(pts)
            bars = np.vstack(
                [tri.simplices[:, [0, 1]], tri.simplices[:, [1, 2]], tri.simplices[:, [2, 0]]]
            )
            bars = np.unique(np.sort(bars, axis=1), axis=0)
        vec = pts[bars[:, 0]] - pts[bars[:, 1]]
        L = np.linalg.norm(vec, axis=1)
        hbars = spec.size(0.5 * (pts[bars[:, 0]] + pts[bars[:, 1]]))
        L0 = hbars * fscale * np.sqrt(np.sum(L**2) / np.sum(hbars**2))
        f = np.maximum(L0 - L, 0.0)
        fvec = (f / np.maximum(L, 1e-300))[:, None] * vec
        force = np.zeros_like(pts)
        np.add.at(force, bars[:, 0], fvec)
        np.add.at(force, bars[:, 1], -fvec)
        force[:nfix] = 0.0
        pts = pts + deltat * force
        pts[:, 0] = np.clip(pts[:, 0], lo[0], hi[0])
        pts[:, 1] = np.clip(pts[:, 1], lo[1], hi[1])
        interior = np.all((pts > lo + 1e-12) & (pts < hi - 1e-12), axis=1)
        moved = np.linalg.norm(deltat * force[interior], axis=1)
        if len(moved) and np.max(moved) < dptol * hmin:
            break

    tri = Delaunay(pts)
    cells = _positively_orient(pts, tri.simplices)
    v = pts[cells]
    area = 0.5 * np.abs(
        (v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
        - (v[:, 1, 1] - v[:, 0, 1]) * (v[:, 2, 0] - v[:, 0, 0])
    )
    cells = cells[area > 1e-14 * hmin * hmin]
    facets, markers = _box_boundary_facets(pts, cells, lo, hi, spec.side_markers)
    names = {DIRICHLET: "dirichlet"}
    if spec.side_markers:
        names.update({v: k for k, v in spec.side_markers.items()})
    mesh = Mesh(2, pts, cells, facets, markers, marker_names=names)

    if check_quality:
        _check_graded(mesh, spec)
    return mesh


def _check_graded(mesh, spec):
    ang = mesh.min_angle_deg()
    if ang < 20.0:
        raise MeshGenerationError(f"minimum angle {ang:.2f} deg below the 20 deg floor")
    diam = mesh.circumdiameters()
    mids = np.mean(mesh.vertices[mesh.cells], axis=1)
    if spec.hole is not None and spec.grow_start is not None and np.isfinite(spec.grow_start):
        d = np.abs(spec.hole.evaluate(mids))
        fine = d <= spec.grow_start
        if fine.any() and np.median(diam[fine]) > 1.3 * spec.h_min:
            raise MeshGenerationError(
                f"median fine-zone diameter {np.median(diam[fine]):.4g} exceeds 1.3 h_min"
            )
        coarse = d >= spec.grow_end
        if coarse.any() and np.median(diam[coarse]) < 0.7 * spec.h_max:
            raise MeshGenerationError(
                f"median coarse-zone diameter {np.median(diam[coarse]):.4g} below 0.7 h_max"
            )


def write_vtk(path, mesh, point_data=None):
    """Legacy ASCII VTK: triangle mesh plus named point data arrays."""
    if mesh.dim != 2:
        raise ValueError("VTK export supports triangle meshes only")
    lines = [
        "# vtk DataFile Version 3.0",
        "ddfem field output",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_vertices} double",
    ]
    for p in mesh.vertices:
        lines.append(f"{p[0]:.16g} {p[1]:.16g} 0")
    lines.append(f"CELLS {mesh.num_cells} {4 * mesh.num_cells}")
    for c in mesh.cells:
        lines.append(f"3 {c[0]} {c[1]} {c[2]}")
    lines.append(f"CELL_TYPES {mesh.num_cells}")
    lines.extend(["5"] * mesh.num_cells)
    if point_data:
        lines.append(f"POINT_DATA {mesh.num_vertices}")
        for name, arr in point_data.items():
            arr = np.asarray(arr)
            if arr.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(f"{v:.16g}" for v in arr)
            else:
                lines.append(f"VECTORS {name} double")
                lines.extend(f"{v[0]:.16g} {v[1]:.16g} 0" for v in arr)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
