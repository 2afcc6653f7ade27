"""Lagrange P1/P2 spaces on interval and triangle meshes.

Provides quadrature rules (all-positive weights), nodal interpolation,
fast tabulation at quadrature points for assembly, and point evaluation
through a background-grid cell locator. Vector spaces store components
blocked: component c occupies coefficients [c*n_scalar, (c+1)*n_scalar).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuadratureRule",
    "quadrature_for",
    "triangle_rule",
    "interval_rule",
    "FeSpace",
    "FeFunction",
    "interpolate",
    "PointOutsideMeshError",
]


class PointOutsideMeshError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (Q, dim) on the reference cell
    weights: np.ndarray  # (Q,), sum = reference measure, all positive
    exactness: int


def _perm3(a, w):
    b = 1.0 - 2.0 * a
    return [(b, a, a, w), (a, b, a, w), (a, a, b, w)]


def _perm6(b, c, w):
    a = 1.0 - b - c
    out = []
    for lam in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]:
        out.append((*lam, w))
    return out


# Dunavant rules with positive weights only (degree -> barycentric groups).
_TRI_GROUPS = {
    1: [(1 / 3, 1 / 3, 1 / 3, 1.0)],
    2: _perm3(1 / 6, 1 / 3),
    4: _perm3(0.445948490915965, 0.223381589678011)
    + _perm3(0.091576213509771, 0.109951743655322),
    5: [(1 / 3, 1 / 3, 1 / 3, 0.225)]
    + _perm3(0.470142064105115, 0.132394152788506)
    + _perm3(0.101286507323456, 0.125939180544827),
    6: _perm3(0.249286745170910, 0.116786275726379)
    + _perm3(0.063089014491502, 0.050844906370207)
    + _perm6(0.310352451033785, 0.053145049844816, 0.082851075618374),
}
_TRI_DEGREES = sorted(_TRI_GROUPS)


def _collapsed_rule(degree):
    """Gauss product rule on the collapsed square; exact for any degree."""
    n = (degree + 3) // 2  # u-degree reaches degree+1 after the Jacobian
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    pts = np.column_stack([u.ravel(), (v * (1.0 - u)).ravel()])
    wts = (wu * wv * (1.0 - u)).ravel()
    return QuadratureRule(pts, wts, degree)


def triangle_rule(degree):
    """Smallest tabulated rule integrating polynomials of the degree exactly."""
    for d in _TRI_DEGREES:
        if d >= degree:
            groups = _TRI_GROUPS[d]
            pts = np.array([[l2, l3] for _, l2, l3, _ in groups])
            w = 0.5 * np.array([g[3] for g in groups])
            return QuadratureRule(pts, w, d)
    return _collapsed_rule(degree)


def interval_rule(degree):
    n = (degree + 2) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule((0.5 * (x + 1.0))[:, None], 0.5 * w, 2 * n - 1)


def quadrature_for(order, diffuse=True, dim=2):
    """Assembly rule: exactness 2p+2 for phi-weighted integrands, else 2p."""
    degree = 2 * order + 2 if diffuse else 2 * order
    return triangle_rule(degree) if dim == 2 else interval_rule(degree)


def _tabulate(order, dim, refpts):
    """Basis values (nloc, Q) and reference gradients (nloc, Q, dim)."""
    refpts = np.asarray(refpts, dtype=float)
    q = len(refpts)
    if dim == 1:
        x = refpts[:, 0]
        if order == 1:
            vals = np.stack([1.0 - x, x])
            grads = np.broadcast_to(
                np.array([[-1.0], [1.0]])[:, None, :], (2, q, 1)
            ).copy()
        else:
            vals = np.stack(
                [(1.0 - x) * (1.0 - 2.0 * x), x * (2.0 * x - 1.0), 4.0 * x * (1.0 - x)]
            )
            grads = np.stack([4.0 * x - 3.0, 4.0 * x - 1.0, 4.0 - 8.0 * x])[:, :, None]
        return vals, grads
    x, y = refpts[:, 0], refpts[:, 1]
    lam = np.stack([1.0 - x - y, x, y])                    # (3, Q)
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # (3, dim)
    if order == 1:
        vals = lam
        grads = np.broadcast_to(dlam[:, None, :], (3, q, 2)).copy()
        return vals, grads
    vals = np.empty((6, q))
    grads = np.empty((6, q, 2))
    for i in range(3):
        vals[i] = lam[i] * (2.0 * lam[i] - 1.0)
        grads[i] = (4.0 * lam[i] - 1.0)[:, None] * dlam[i]
    edges = [(1, 2), (2, 0), (0, 1)]  # edge i opposite vertex i
    for e, (a, b) in enumerate(edges):
        vals[3 + e] = 4.0 * lam[a] * lam[b]
        grads[3 + e] = 4.0 * (lam[a][:, None] * dlam[b] + lam[b][:, None] * dlam[a])
    return vals, grads


def _edge_table(cells):
    """Unique mesh edges and the (nc, 3) cell->edge map (edge i opp. vertex i)."""
    raw = np.concatenate([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]])
    raw = np.sort(raw, axis=1)
    edges, inverse = np.unique(raw, axis=0, return_inverse=True)
    cell_edges = inverse.reshape(3, -1).T
    return edges, cell_edges


class FeSpace:
    """Continuous Lagrange space of order 1 or 2, scalar or 2-vector."""

    def __init__(self, mesh, order, components=1):
        if order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        self.mesh = mesh
        self.order = order
        self.components = components
        cells = mesh.cells
        if mesh.dim == 1:
            if order == 1:
                self.n_scalar = mesh.num_vertices
                self.cell_dofs = cells.copy()
                self.dof_coords = mesh.vertices.copy()
            else:
                nv = mesh.num_vertices
                self.n_scalar = nv + mesh.num_cells
                mid_ids = nv + np.arange(mesh.num_cells)
                self.cell_dofs = np.column_stack([cells, mid_ids])
                mids = 0.5 * (mesh.vertices[cells[:, 0]] + mesh.vertices[cells[:, 1]])
                self.dof_coords = np.vstack([mesh.vertices, mids])
            self._edges = None
        else:
            edges, cell_edges = _edge_table(cells)
            self._edges = edges
            if order == 1:
                self.n_scalar = mesh.num_vertices
                self.cell_dofs = cells.copy()
                self.dof_coords = mesh.vertices.copy()
            else:
                nv = mesh.num_vertices
                self.n_scalar = nv + len(edges)
                self.cell_dofs = np.column_stack([cells, nv + cell_edges])
                mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
                self.dof_coords = np.vstack([mesh.vertices, mids])
        self.n_dofs = self.n_scalar * components
        self.n_local = self.cell_dofs.shape[1]
        self._geom = None
        self._quad_cache = {}
        self._locator = None

    # -- geometry ---------------------------------------------------------

    def _geometry(self):
        if self._geom is None:
            m = self.mesh
            v = m.vertices[m.cells]
            if m.dim == 1:
                det = (v[:, 1, 0] - v[:, 0, 0])
                inv_jt = (1.0 / det)[:, None, None]
                self._geom = (np.abs(det), inv_jt, v)
            else:
                j = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
                det = j[:, 0, 0] * j[:, 1, 1] - j[:, 0, 1] * j[:, 1, 0]
                inv = np.empty_like(j)
                inv[:, 0, 0] = j[:, 1, 1]
                inv[:, 0, 1] = -j[:, 0, 1]
                inv[:, 1, 0] = -j[:, 1, 0]
                inv[:, 1, 1] = j[:, 0, 0]
                inv /= det[:, None, None]
                inv_jt = np.swapaxes(inv, 1, 2)
                self._geom = (np.abs(det), inv_jt, v)
        return self._geom

    def quad_data(self, rule):
        """Per-cell tables for a rule: physical points, weights*|J|, basis."""
        key = (id(rule), rule.exactness, len(rule.points))
        if key not in self._quad_cache:
            det, inv_jt, v = self._geometry()
            vals, grads = _tabulate(self.order, self.mesh.dim, rule.points)
            # physical points: x = v0 + J xi
            ref = rule.points
            if self.mesh.dim == 1:
                pts = v[:, None, 0, :] + ref[None, :, :] * (v[:, None, 1, :] - v[:, None, 0, :])
            else:
                j = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
                pts = v[:, None, 0, :] + np.einsum("mde,qe->mqd", j, ref)
            gphys = np.einsum("mde,nqe->mnqd", inv_jt, grads)
            wdet = rule.weights[None, :] * det[:, None]
            self._quad_cache[key] = {
                "points": pts,        # (nc, Q, dim)
                "wdet": wdet,         # (nc, Q)
                "vals": vals,         # (nloc, Q)
                "grads": gphys,       # (nc, nloc, Q, dim)
                "rule": rule,
            }
        return self._quad_cache[key]

    # -- dof queries --------------------------------------------------------

    def boundary_scalar_dofs(self, markers=None):
        m = self.mesh
        sel = np.ones(len(m.boundary_facets), dtype=bool)
        if markers is not None:
            sel = np.isin(m.facet_markers, list(markers))
        facets = m.boundary_facets[sel]
        dofs = [facets.ravel()]
        if self.order == 2 and m.dim == 2 and len(facets):
            keys = np.sort(facets, axis=1)
            idx = np.searchsorted(
                self._edges[:, 0] * (2 ** 32) + self._edges[:, 1],
                keys[:, 0] * (2 ** 32) + keys[:, 1],
            )
            dofs.append(m.num_vertices + idx)
        return np.unique(np.concatenate(dofs))

    def component_dofs(self, c, scalar_ids=None):
        if scalar_ids is None:
            scalar_ids = np.arange(self.n_scalar)
        return c * self.n_scalar + np.asarray(scalar_ids)

    # -- point location -----------------------------------------------------

    def _build_locator(self):
        m = self.mesh
        v = m.vertices[m.cells]
        lo = m.vertices.min(axis=0)
        hi = m.vertices.max(axis=0)
        nb = max(1, int(np.sqrt(m.num_cells)))
        clo = v.min(axis=1)
        chi = v.max(axis=1)
        span = np.maximum(hi - lo, 1e-300)
        buckets = {}
        ilo = np.clip(((clo - lo) / span * nb).astype(int), 0, nb - 1)
        ihi = np.clip(((chi - lo) / span * nb).astype(int), 0, nb - 1)
        for c in range(m.num_cells):
            for bx in range(ilo[c, 0], ihi[c, 0] + 1):
                rng = range(ilo[c, 1], ihi[c, 1] + 1) if m.dim == 2 else (0,)
                for by in rng:
                    buckets.setdefault((bx, by), []).append(c)
        self._locator = (lo, span, nb, buckets)

    def locate(self, pts):
        """Cell index and reference coordinates for each point."""
        if self._locator is None:
            self._build_locator()
        lo, span, nb, buckets = self._locator
        m = self.mesh
        det, inv_jt, v = self._geometry()
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        cells_out = np.full(len(pts), -1, dtype=int)
        ref_out = np.zeros((len(pts), m.dim))
        for k, p in enumerate(pts):
            bx = int(np.clip((p[0] - lo[0]) / span[0] * nb, 0, nb - 1))
            by = int(np.clip((p[1] - lo[1]) / span[1] * nb, 0, nb - 1)) if m.dim == 2 else 0
            cand = buckets.get((bx, by), [])
            best, best_ref, best_pen = -1, None, np.inf
            for c in cand:
                xi = inv_jt[c].T @ (p - v[c, 0])
                lam = np.concatenate([[1.0 - xi.sum()], xi])
                pen = -lam.min()
                if pen < best_pen:
                    best, best_ref, best_pen = c, xi, pen
                if pen <= 1e-12:
                    break
            if best < 0 or best_pen > 1e-8:
                raise PointOutsideMeshError(f"point {p} not inside the mesh")
            cells_out[k] = best
            ref_out[k] = best_ref
        return cells_out, ref_out


class FeFunction:
    """Coefficient vector in an FeSpace, evaluable anywhere in the box."""

    def __init__(self, space, coefficients=None):
        self.space = space
        if coefficients is None:
            coefficients = np.zeros(space.n_dofs)
        self.coefficients = np.asarray(coefficients, dtype=float)

    def copy(self):
        return FeFunction(self.space, self.coefficients.copy())

    def component(self, c):
        ns = self.space.n_scalar
        return self.coefficients[c * ns:(c + 1) * ns]

    def evaluate(self, pts):
        sp = self.space
        cells, ref = sp.locate(pts)
        vals, _ = _tabulate(sp.order, sp.mesh.dim, ref)  # (nloc, npts)
        dofs = sp.cell_dofs[cells]                       # (npts, nloc)
        out = []
        for c in range(sp.components):
            coef = self.component(c)[dofs]               # (npts, nloc)
            out.append(np.sum(coef * vals.T, axis=1))
        return out[0] if sp.components == 1 else np.stack(out, axis=-1)

    def gradient(self, pts):
        sp = self.space
        cells, ref = sp.locate(pts)
        _, grads = _tabulate(sp.order, sp.mesh.dim, ref)  # (nloc, npts, dim)
        det, inv_jt, v = sp._geometry()
        dofs = sp.cell_dofs[cells]
        gphys = np.einsum("pde,npe->npd", inv_jt[cells], grads)  # (nloc, npts, dim)
        out = []
        for c in range(sp.components):
            coef = self.component(c)[dofs]               # (npts, nloc)
            out.append(np.einsum("pn,npd->pd", coef, gphys))
        return out[0] if sp.components == 1 else np.stack(out, axis=-2)

    def at_quad(self, qd, gradient=False, cells=None):
        """Values (nc, Q[, comps]) and optionally gradients at rule points.

        ``cells`` restricts evaluation to a cell subset (same ordering).
        """
        sp = self.space
        dofs = sp.cell_dofs if cells is None else sp.cell_dofs[cells]
        gtab = qd["grads"] if cells is None else qd["grads"][cells]
        vals = []
        grads = []
        for c in range(sp.components):
            coef = self.component(c)[dofs]               # (nc, nloc)
            vals.append(np.einsum("mn,nq->mq", coef, qd["vals"]))
            if gradient:
                grads.append(np.einsum("mn,mnqd->mqd", coef, gtab))
        v = vals[0] if sp.components == 1 else np.stack(vals, axis=-1)
        if not gradient:
            return v
        g = grads[0] if sp.components == 1 else np.stack(grads, axis=-2)
        return v, g


def interpolate(space, fn):
    """Nodal interpolant; fn maps (n, dim) points to (n,) or (n, comps)."""
    vals = np.asarray(fn(space.dof_coords), dtype=float)
    if space.components == 1:
        return FeFunction(space, vals)
    return FeFunction(space, np.concatenate([vals[:, c] for c in range(space.components)]))
