"""Sparse assembly, boundary constraints, direct solve, matrix diagnostics.

Assembly is deterministic: a fixed cell order feeds one COO->CSR
conversion whose duplicate summation order is fixed, so repeated
assemblies of the same inputs are bit-identical. Dirichlet conditions
are applied by symmetric elimination (values moved to the right-hand
side, unit diagonal), which preserves matrix symmetry and is idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .femspace import FeFunction, quadrature_for
from .formulations import forms
from .phasefield import BoundaryExtension, ForcingExtension

__all__ = [
    "FeSystem",
    "SingularSystemError",
    "EigenSizeError",
    "assemble_matrix",
    "assemble_vector",
    "assemble",
    "solve",
    "quadratic_form",
    "sym_min_eig",
    "mean_zero_constraint",
    "dump_system",
]

DENSE_EIG_LIMIT = 5000


class SingularSystemError(RuntimeError):
    """Factorization hit a zero pivot (nullspace, e.g. unconstrained pressure)."""


class EigenSizeError(RuntimeError):
    pass


@dataclass
class FeSystem:
    """Raw Galerkin operator plus constraint set.

    ``matrix``/``rhs`` hold the unconstrained assembly; ``constrained``
    maps dof index -> prescribed value and is applied on demand.
    """

    space: object
    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained_dofs: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    constrained_values: np.ndarray = field(default_factory=lambda: np.array([]))
    multiplier_rows: int = 0

    def n(self):
        return self.matrix.shape[0]

    def free_dofs(self):
        mask = np.ones(self.n(), dtype=bool)
        mask[self.constrained_dofs] = False
        return np.nonzero(mask)[0]

    def constrained(self):
        """Matrix and rhs with Dirichlet values eliminated symmetrically."""
        a = self.matrix.tocsc(copy=True)
        rhs = self.rhs.copy()
        dofs = self.constrained_dofs
        if len(dofs):
            vals = self.constrained_values
            rhs -= a[:, dofs] @ vals
            mask = np.zeros(self.n(), dtype=float)
            mask[dofs] = 1.0
            keep = sp.diags(1.0 - mask)
            a = (keep @ a @ keep + sp.diags(mask)).tocsr()
            rhs[dofs] = vals
        else:
            a = a.tocsr()
        return a, rhs


def assemble_matrix(space, qd, coef):
    """CSR matrix of the coefficient-template bilinear form.

    coef holds alpha (nc, Q), beta_a/beta_b (nc, Q, dim), gamma (nc, Q),
    flattened against the quadrature tables in ``qd``. A scalar-space
    matrix is returned; vector problems reuse it per component.
    """
    w = qd["wdet"]                      # (nc, Q)
    vals = qd["vals"]                   # (nloc, Q)
    grads = qd["grads"]                 # (nc, nloc, Q, dim)
    nc, nloc = grads.shape[0], grads.shape[1]
    local = np.zeros((nc, nloc, nloc))
    alpha = coef.get("alpha")
    if alpha is not None and np.any(alpha):
        local += np.einsum("mq,miqd,mjqd->mij", w * alpha, grads, grads, optimize=True)
    beta_a = coef.get("beta_a")
    if beta_a is not None and np.any(beta_a):
        bgrad = np.einsum("mqd,mjqd->mjq", beta_a, grads, optimize=True)
        local += np.einsum("mq,iq,mjq->mij", w, vals, bgrad, optimize=True)
    beta_b = coef.get("beta_b")
    if beta_b is not None and np.any(beta_b):
        bgrad = np.einsum("mqd,miqd->miq", beta_b, grads, optimize=True)
        local += np.einsum("mq,miq,jq->mij", w, bgrad, vals, optimize=True)
    gamma = coef.get("gamma")
    if gamma is not None and np.any(gamma):
        local += np.einsum("mq,iq,jq->mij", w * gamma, vals, vals, optimize=True)
    dofs = space.cell_dofs
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    a = sp.coo_matrix((local.ravel(), (rows, cols)),
                      shape=(space.n_scalar, space.n_scalar))
    return a.tocsr()


def assemble_vector(space, qd, lin):
    """Load vector of the coefficient-template linear functional."""
    w = qd["wdet"]
    vals = qd["vals"]
    grads = qd["grads"]
    nc, nloc = grads.shape[0], grads.shape[1]
    local = np.zeros((nc, nloc))
    lin_v = lin.get("lin_v")
    if lin_v is not None and np.any(lin_v):
        local += np.einsum("mq,iq->mi", w * lin_v, vals, optimize=True)
    lin_g = lin.get("lin_g")
    if lin_g is not None and np.any(lin_g):
        local += np.einsum("mq,mqd,miqd->mi", w, lin_g, grads, optimize=True)
    out = np.zeros(space.n_scalar)
    np.add.at(out, space.cell_dofs.ravel(), local.ravel())
    return out


def assemble(method, data, pf, space, dirichlet_markers=None, quad=None):
    """Full diffuse-domain system for a scalar problem on the box.

    Strong Dirichlet u = gbar is imposed on outer-boundary facets whose
    marker is in ``dirichlet_markers`` (default: every facet).
    """
    if quad is None:
        quad = quadrature_for(space.order, diffuse=True, dim=space.mesh.dim)
    qd = space.quad_data(quad)
    pts = qd["points"].reshape(-1, space.mesh.dim)
    phi = pf.values(pts)
    gphi = pf.gradient(pts)
    gext = BoundaryExtension(pf.shape, data.dirichlet, band=pf.band())
    fext = ForcingExtension(pf.shape, data.forcing)
    gbar = gext(pts)
    fbar = fext(pts)
    grad_gbar = None
    if method.name == "mix1":
        from .formulations import fd_gradient
        grad_gbar = fd_gradient(gext, pts, step=data.epsilon * 1e-4)
    bil, lin = forms(method, data, phi, gphi, pts, gbar, fbar, grad_gbar=grad_gbar)
    shape_q = qd["wdet"].shape
    bilc = {k: v.reshape(shape_q + v.shape[1:]) for k, v in bil.items()}
    linc = {k: v.reshape(shape_q + v.shape[1:]) for k, v in lin.items()}
    a = assemble_matrix(space, qd, bilc)
    rhs = assemble_vector(space, qd, linc)
    bdofs = space.boundary_scalar_dofs(markers=dirichlet_markers)
    bvals = gext(space.dof_coords[bdofs]) if len(bdofs) else np.array([])
    return FeSystem(space, a, rhs, bdofs, np.asarray(bvals, dtype=float))


def solve(system):
    """Sparse direct LU with residual check.

    Residual guard: ||Ax - b||_inf <= 1e-10 (||A||_inf ||x||_inf + ||b||_inf).
    """
    a, rhs = system.constrained()
    try:
        lu = spla.splu(a.tocsc(), permc_spec="MMD_AT_PLUS_A")
        x = lu.solve(rhs)
    except RuntimeError as exc:  # SuperLU signals singularity this way
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("solution contains non-finite entries")
    resid = np.max(np.abs(a @ x - rhs))
    anorm = np.max(np.abs(a).sum(axis=1))
    bound = 1e-10 * (anorm * np.max(np.abs(x), initial=0.0) + np.max(np.abs(rhs), initial=0.0))
    if resid > max(bound, 1e-30):
        raise SingularSystemError(f"residual {resid:.3e} exceeds bound {bound:.3e}")
    if system.multiplier_rows:
        x = x[: -system.multiplier_rows]
    if system.space is None:
        return x
    return FeFunction(system.space, x)


def quadratic_form(system, x):
    """x^T A x on the raw (unconstrained) operator."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != system.matrix.shape[0]:
        raise ValueError("dimension mismatch")
    return float(x @ (system.matrix @ x))


def sym_min_eig(system, interior_only=True, tol=1e-8):
    """Smallest eigenvalue of (A + A^T)/2, optionally on unconstrained dofs.

    Dense up to DENSE_EIG_LIMIT dofs; beyond that, shift-invert Lanczos
    anchored below the Gershgorin lower bound, which certifies the
    smallest algebraic eigenvalue.
    """
    a = system.matrix
    if interior_only:
        free = system.free_dofs()
        a = a[free][:, free]
    s = 0.5 * (a + a.T).tocsr()
    n = s.shape[0]
    if n <= DENSE_EIG_LIMIT:
        return float(np.linalg.eigvalsh(s.toarray())[0])
    diag = s.diagonal()
    row_abs = np.asarray(np.abs(s).sum(axis=1)).ravel()
    lower = np.min(diag - (row_abs - np.abs(diag)))
    sigma = lower - max(1.0, abs(lower)) * 1e-3
    vals = spla.eigsh(s, k=1, sigma=sigma, which="LM", tol=tol,
                      return_eigenvectors=False)
    return float(vals[0])


def mean_zero_constraint(system, mask_weights):
    """Augment with a multiplier enforcing integral of the solution = 0.

    mask_weights is the load vector of the masked measure (w_i = integral
    of basis i over the mask); the augmented system is solvable by LU.
    """
    a = system.matrix
    w = np.asarray(mask_weights, dtype=float)
    n = a.shape[0]
    wcol = sp.csr_matrix(w.reshape(-1, 1))
    aug = sp.bmat([[a, wcol], [wcol.T, None]], format="csr")
    rhs = np.concatenate([system.rhs, [0.0]])
    return FeSystem(system.space, aug, rhs,
                    system.constrained_dofs, system.constrained_values,
                    multiplier_rows=system.multiplier_rows + 1)


def dump_system(path, system):
    """Coordinate text format: header, then one `i j value` line per entry."""
    coo = system.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"% {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
        fh.write("% rhs\n")
        for i, v in enumerate(system.rhs):
            fh.write(f"{i} {v:.17g}\n")
