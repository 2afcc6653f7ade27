"""Convergence studies, masked error norms, and the searchlight problem.

Errors are masked to the physical domain: a quadrature point counts only
where the signed distance is nonpositive. H1 errors use the reconstructed
gradient proxy sigma_h for the mixed methods and grad u_h otherwise, and
are reported as eL2 + masked seminorm. Study output is CSV with columns
(method, order, h, eps, eL2, eocL2, eH1, eocH1).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .geometry import Arc, Circle, Complement, Rotate
from .phasefield import PhaseField, BoundaryExtension
from .femspace import FeSpace, triangle_rule
from .formulations import Method, ProblemData, sigma_reconstruction, fd_gradient
from .mesh import uniform_box
from .system import assemble, solve, sym_min_eig

__all__ = [
    "StudySpec",
    "MaskedNorms",
    "study_domain",
    "masked_error",
    "eoc",
    "run_diffusion_study",
    "run_advection_study",
    "run_searchlight",
    "line_sample",
    "write_csv",
    "rows_to_csv",
    "manufactured",
    "searchlight_data",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("method", "order", "h", "eps", "eL2", "eocL2", "eH1", "eocH1")

ARC = Arc(center_radius=0.5, half_width=0.25, half_angle_deg=60.0, cap_radius=0.25)
DEFAULT_LEVELS = (0.05, 0.05 / np.sqrt(2), 0.025, 0.025 / np.sqrt(2))


@dataclass
class MaskedNorms:
    eL2: float
    eH1: float


@dataclass
class StudySpec:
    domain: str = "arc"                    # arc | arc-complement | circle
    methods: tuple = ("nsddm", "mix0")
    orders: tuple = (1, 2)
    h_levels: tuple = DEFAULT_LEVELS
    eps_factor: float = 3.5                # 2 eps = 7 h
    margin_factor: float = 7.0             # box margin beyond the shape, in eps
    advection_scale: float = 0.0           # b = -scale (x2, x1)
    naive_advection: bool = False


class _Manufactured:
    """u = cos(1.8 pi x1) cos(2.6 pi x2) with D = 1 + |x|; f hand-derived.

    The forcing is validated in the tests against central differences of
    the flux (independent oracle).
    """

    a = 1.8 * np.pi
    b = 2.6 * np.pi

    def u(self, p):
        return np.cos(self.a * p[:, 0]) * np.cos(self.b * p[:, 1])

    def grad_u(self, p):
        return np.column_stack([
            -self.a * np.sin(self.a * p[:, 0]) * np.cos(self.b * p[:, 1]),
            -self.b * np.cos(self.a * p[:, 0]) * np.sin(self.b * p[:, 1]),
        ])

    def diffusion(self, p):
        return 1.0 + np.linalg.norm(p, axis=1)

    def forcing(self, p, advection_scale=0.0):
        r = np.maximum(np.linalg.norm(p, axis=1), 1e-300)
        grad_d = p / r[:, None]
        gu = self.grad_u(p)
        lap = -(self.a**2 + self.b**2) * self.u(p)
        f = -self.diffusion(p) * lap - np.sum(grad_d * gu, axis=1)
        if advection_scale:
            b = self.velocity(p, advection_scale)
            f = f + np.sum(b * gu, axis=1)
        return f

    @staticmethod
    def velocity(p, scale):
        return -scale * np.column_stack([p[:, 1], p[:, 0]])


manufactured = _Manufactured()


def study_domain(kind, eps, margin_factor=7.0):
    """Shape and embedding box for a study domain.

    The arc-complement keeps the fitted outer square [-1, 1]^2 (its outer
    boundary is part of the physical boundary); the others size the box
    with a margin of margin_factor * eps beyond the shape.
    """
    if kind == "arc":
        w = ARC.outer_radius + margin_factor * eps
        return ARC, (-w, -w), (w, w)
    if kind == "arc-complement":
        return Complement(ARC), (-1.0, -1.0), (1.0, 1.0)
    if kind == "circle":
        w = 0.5 + margin_factor * eps
        return Circle((0.0, 0.0), 0.5), (-w, -w), (w, w)
    raise ValueError(f"unknown study domain {kind!r}")


def build_level(kind, h, eps_factor=3.5, margin_factor=7.0):
    """Mesh + phase field at one refinement level (crisscross box mesh)."""
    eps = eps_factor * h
    shape, lo, hi = study_domain(kind, eps, margin_factor)
    n = max(2, int(round((hi[0] - lo[0]) * np.sqrt(2.0) / h)))
    msh = uniform_box(lo, hi, n)
    return msh, PhaseField(shape, eps)


def masked_error(method, u_h, pf, exact, exact_grad, data=None, quad_degree=None):
    """Masked L2/H1 errors; mixed methods substitute sigma_h for grad u_h."""
    space = u_h.space
    if quad_degree is None:
        quad_degree = 2 * space.order + 4
    qd = space.quad_data(triangle_rule(quad_degree))
    pts = qd["points"].reshape(-1, space.mesh.dim)
    w = qd["wdet"].ravel() * (pf.shape.evaluate(pts) <= 0.0)
    vals, grads = u_h.at_quad(qd, gradient=True)
    vals = vals.ravel()
    grads = grads.reshape(-1, space.mesh.dim)
    err = vals - exact(pts)
    e_l2 = float(np.sqrt(np.sum(w * err**2)))
    if method is not None and method.mixed:
        gext = BoundaryExtension(pf.shape, data.dirichlet, band=pf.band())
        gbar = gext(pts)
        grad_gbar = None
        if method.name == "mix1":
            grad_gbar = fd_gradient(gext, pts, step=pf.epsilon * 1e-4)
        grads = sigma_reconstruction(method, pf.values(pts), pf.gradient(pts),
                                     vals, grads, gbar, grad_gbar=grad_gbar)
    gerr = grads - exact_grad(pts)
    e_h1 = e_l2 + float(np.sqrt(np.sum(w * np.sum(gerr**2, axis=1))))
    return MaskedNorms(e_l2, e_h1)


def eoc(errors, hs):
    """Experimental orders log(e_i/e_{i+1}) / log(h_i/h_{i+1})."""
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    return list(np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:]))


def _run_study(spec, advection_scale):
    rows = []
    for name in spec.methods:
        method = Method(name, naive_advection=spec.naive_advection)
        for order in spec.orders:
            errs, hs = [], []
            for h in spec.h_levels:
                msh, pf = build_level(spec.domain, h, spec.eps_factor,
                                      spec.margin_factor)
                data = ProblemData(
                    diffusion=manufactured.diffusion,
                    forcing=lambda p: manufactured.forcing(p, advection_scale),
                    dirichlet=manufactured.u,
                    epsilon=pf.epsilon,
                    advection=(None if advection_scale == 0.0 else
                               lambda p: manufactured.velocity(p, advection_scale)),
                )
                space = FeSpace(msh, order)
                u_h = solve(assemble(method, data, pf, space))
                norms = masked_error(method, u_h, pf, manufactured.u,
                                     manufactured.grad_u, data)
                errs.append(norms)
                hs.append(h)
                rows.append({
                    "method": method.label(), "order": order,
                    "h": h, "eps": pf.epsilon,
                    "eL2": norms.eL2, "eocL2": "",
                    "eH1": norms.eH1, "eocH1": "",
                })
            l2 = eoc([n.eL2 for n in errs], hs)
            h1 = eoc([n.eH1 for n in errs], hs)
            base = len(rows) - len(hs)
            for k in range(1, len(hs)):
                rows[base + k]["eocL2"] = l2[k - 1]
                rows[base + k]["eocH1"] = h1[k - 1]
    return rows


def run_diffusion_study(spec=None):
    """Manufactured diffusion problem (b = 0) over methods/orders/levels."""
    spec = spec or StudySpec()
    return _run_study(spec, 0.0)


def run_advection_study(spec=None):
    """Advection-dominated variant, b = -100 (x2, x1)."""
    spec = spec or StudySpec(advection_scale=100.0)
    scale = spec.advection_scale or 100.0
    return _run_study(spec, scale)


# -- searchlight ------------------------------------------------------------

SEARCHLIGHT_SEGMENT = ((-0.7, -0.8), (0.1, 0.8))
SEARCHLIGHT_LEVELS = (0.04988, 0.01761)


def searchlight_shape():
    """The arc in the orientation whose cap inflow sits on the upper band."""
    return Rotate(ARC, 180.0)


def searchlight_data(eps):
    """Data of the rotating-transport problem with banded inflow values."""

    def g(p):
        rr = np.linalg.norm(p, axis=1)
        band = (rr > 0.35) & (rr < 0.65) & (p[:, 1] > 0.0)
        return np.where(band, 0.5, -0.5)

    def b(p):
        return np.column_stack([-p[:, 1], p[:, 0]])

    return ProblemData(
        diffusion=lambda p: np.full(len(p), 1e-3),
        forcing=lambda p: np.zeros(len(p)),
        dirichlet=g,
        epsilon=eps,
        advection=b,
    )


def searchlight_reference(p):
    """Transport limit (D -> 0): +0.5 on the swept band inside the arc."""
    p = np.asarray(p, dtype=float)
    rr = np.linalg.norm(p, axis=-1)
    inside = searchlight_shape().evaluate(p) <= 0.0
    band = (rr > 0.35) & (rr < 0.65)
    return np.where(inside & band, 0.5, -0.5)


def run_searchlight(h_levels=SEARCHLIGHT_LEVELS, methods=("mix0", "nsddm"),
                    order=1, eps_factor=3.5, margin_factor=7.0, n_samples=512):
    """Solve the searchlight at the given levels; return fields and samples.

    Result: dict keyed (method, h) -> dict with the solution, phase field,
    sample parameters t in [0, L] (arclength) and sampled values.
    """
    p0 = np.asarray(SEARCHLIGHT_SEGMENT[0])
    p1 = np.asarray(SEARCHLIGHT_SEGMENT[1])
    out = {}
    shape = searchlight_shape()
    for h in h_levels:
        eps = eps_factor * h
        w = ARC.outer_radius + margin_factor * eps
        n = max(2, int(round(2.0 * w * np.sqrt(2.0) / h)))
        msh = uniform_box((-w, -w), (w, w), n)
        pf = PhaseField(shape, eps)
        data = searchlight_data(eps)
        space = FeSpace(msh, order)
        for name in methods:
            u_h = solve(assemble(Method(name), data, pf, space))
            t, vals = line_sample(u_h, p0, p1, n_samples)
            out[(name, h)] = {
                "u": u_h, "pf": pf, "t": t, "values": vals,
                "points": p0 + (t / t[-1])[:, None] * (p1 - p0),
            }
    return out


def line_sample(u_h, p0, p1, n=512):
    """n equispaced samples along the segment; returns (arclength, values)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    s = np.linspace(0.0, 1.0, n)
    pts = p0 + s[:, None] * (p1 - p0)
    return s * np.linalg.norm(p1 - p0), u_h.evaluate(pts)


# -- coercivity audit ---------------------------------------------------------

AUDIT_ROOT_REFERENCE = 0.657218


def example_1d_system(naive=True, method_name="ddm1", quad=None):
    """The 1D audit problem: D=1e-4, b=1 on [-0.5, 0.5] in [-0.675, 0.675]."""
    from .geometry import Interval
    from .mesh import interval_mesh
    from .femspace import interval_rule

    msh = interval_mesh(-0.675, 0.675, 0.01)
    space = FeSpace(msh, order=1)
    pf = PhaseField(Interval(-0.5, 0.5), 0.035)
    data = ProblemData(
        diffusion=lambda p: np.full(len(p), 1e-4),
        forcing=lambda p: np.zeros(len(p)),
        dirichlet=lambda p: np.zeros(len(p)),
        epsilon=0.035,
        advection=lambda p: np.ones((len(p), 1)),
    )
    return assemble(Method(method_name, naive_advection=naive), data, pf, space,
                    quad=quad)


def example_1d_root(system):
    """Root t of x^T A x with x_16 = 1, x_119 = t (far-apart supports)."""
    a = system.matrix
    ratio = -a[16, 16] / a[119, 119]
    return float(np.sqrt(ratio)) if ratio >= 0.0 else float("nan")


def coercivity_audit(methods=None, naive=False, h=0.05, eps_factor=3.5,
                     advection_scale=100.0, order=1):
    """Matrix-positivity diagnostics on the arc domain + the 1D audit case.

    Expected-coercive configurations must have positive symmetric-part
    minimum eigenvalue; naive-advection ones are reported as UNSTABLE when
    indefinite. Symmetry is checked for the symmetric methods. The 1D root
    is evaluated with the plain 2p quadrature, whose digits match the
    reference value, and the default diffuse rule's indefiniteness is
    asserted regardless.
    """
    from .formulations import COERCIVE_METHODS, SYMMETRIC_METHODS
    from .femspace import interval_rule

    if methods is None or methods == (None,):
        methods = COERCIVE_METHODS
    rows = []
    msh, pf = build_level("arc", h, eps_factor)
    space = FeSpace(msh, order)
    data = ProblemData(
        diffusion=manufactured.diffusion,
        forcing=lambda p: manufactured.forcing(p, advection_scale),
        dirichlet=manufactured.u,
        epsilon=pf.epsilon,
        advection=lambda p: manufactured.velocity(p, advection_scale),
    )
    for name in methods:
        method = Method(name, naive_advection=naive)
        sysm = assemble(method, data, pf, space)
        lam = sym_min_eig(sysm, interior_only=True)
        if naive:
            status = "UNSTABLE" if lam <= 0.0 else "INFO"
        else:
            status = "PASS" if lam > 0.0 else (
                "FAIL" if name in COERCIVE_METHODS else "INFO")
        rows.append({"method": method.label(), "case": "arc-advection",
                     "quantity": "sym_min_eig", "value": lam, "status": status})
        if name in SYMMETRIC_METHODS and not naive:
            asym = _relative_asymmetry(sysm.matrix)
            rows.append({"method": name, "case": "arc-advection",
                         "quantity": "asym_norm_rel", "value": asym,
                         "status": "PASS" if asym <= 1e-12 else "FAIL"})

    sys_2p = example_1d_system(naive=True, quad=interval_rule(2))
    root = example_1d_root(sys_2p)
    rows.append({"method": "ddm1-naive", "case": "example-1d",
                 "quantity": "root_x119", "value": root,
                 "status": "PASS" if abs(root - AUDIT_ROOT_REFERENCE) <= 1e-3
                 else "INFO"})
    sys_default = example_1d_system(naive=True)
    lam1d = sym_min_eig(sys_default, interior_only=True)
    rows.append({"method": "ddm1-naive", "case": "example-1d",
                 "quantity": "sym_min_eig", "value": lam1d,
                 "status": "UNSTABLE" if lam1d <= 0.0 else "FAIL"})
    return rows


def _relative_asymmetry(a):
    """||A - A^T||_inf / ||A||_inf (infinity operator norm = max row sum)."""
    num = np.max(np.abs(a - a.T).sum(axis=1))
    den = np.max(np.abs(a).sum(axis=1))
    return float(num / den)


# -- CSV --------------------------------------------------------------------

def _format_cell(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def rows_to_csv(rows, columns=CSV_COLUMNS):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(row.get(c, "")) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns=CSV_COLUMNS):
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows, columns))
