"""Pointwise integrands of the diffuse-domain methods.

Each method defines densities for a bilinear form a(u, v) and a linear
functional l(v) over the embedding box. All fit one template,

    a-density = alpha grad u . grad v + (beta_a . grad u) v
                + u (beta_b . grad v) + gamma u v,
    l-density = lin_v v + lin_g . grad v,

so a method is a recipe producing the coefficient fields (alpha, beta_a,
beta_b, gamma) and (lin_v, lin_g) from the phase field and problem data;
assembly contracts them against basis tables. Boundary data enters
through its normal extension gbar, forcing through fbar.

Methods: ddm1, ddm2, sbm, nddm, nsddm, mix0, mix1. Advection (velocity
b, mass m) adds inflow/outflow stabilization with the positive/negative
part of b . grad phi; ``naive_advection`` drops those parts, which makes
the bilinear form indefinite (reproducible on the 1D audit problem).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .phasefield import BoundaryExtension, ForcingExtension

__all__ = [
    "ProblemData",
    "Method",
    "METHOD_NAMES",
    "SYMMETRIC_METHODS",
    "COERCIVE_METHODS",
    "MIXED_METHODS",
    "IntegrandSample",
    "bilinear_coefficients",
    "linear_coefficients",
    "densities",
    "neumann_coefficients",
    "sigma_reconstruction",
    "coercivity_margin",
]

METHOD_NAMES = ("ddm1", "ddm2", "sbm", "nddm", "nsddm", "mix0", "mix1")
SYMMETRIC_METHODS = ("ddm1", "nsddm")
COERCIVE_METHODS = ("ddm1", "sbm", "nddm", "nsddm", "mix0", "mix1")
MIXED_METHODS = ("mix0", "mix1")


@dataclass(frozen=True)
class Method:
    """A named formulation plus its advection treatment.

    The mixed methods carry their advection treatment intrinsically and
    ignore ``naive_advection``.
    """

    name: str
    naive_advection: bool = False

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ValueError(f"unknown method {self.name!r}; choose from {METHOD_NAMES}")

    @property
    def mixed(self):
        return self.name in MIXED_METHODS

    def label(self):
        return self.name + ("-naive" if self.naive_advection and not self.mixed else "")


@dataclass
class ProblemData:
    """Coefficients and data of - div(D grad u) + b . grad u + m u = f, u = g.

    D, m, f, g are callables of point arrays (n, dim) -> (n,); b maps to
    (n, dim). g_grad optionally supplies the analytic gradient of g (used
    by mix1's right-hand side instead of finite differences).
    """

    diffusion: object
    forcing: object
    dirichlet: object
    epsilon: float
    advection: object = None
    mass: object = None
    g_grad: object = None

    def d_at(self, p):
        return np.asarray(self.diffusion(p), dtype=float)

    def b_at(self, p):
        return None if self.advection is None else np.asarray(self.advection(p), dtype=float)

    def m_at(self, p):
        return None if self.mass is None else np.asarray(self.mass(p), dtype=float)


def pos(w):
    return np.maximum(w, 0.0)


def neg(w):
    return np.minimum(w, 0.0)


def check_coercivity_condition(data, points, tol=1e-10, step=1e-6):
    """Sample m - 0.5 div b; returns the minimum (warn threshold, not error)."""
    if data.advection is None:
        return 0.0
    p = np.asarray(points, dtype=float)
    dim = p.shape[-1]
    div = np.zeros(p.shape[0])
    for d in range(dim):
        dp = np.zeros(dim)
        dp[d] = step
        div += (data.b_at(p + dp)[:, d] - data.b_at(p - dp)[:, d]) / (2 * step)
    m = data.m_at(p)
    m = np.zeros(len(p)) if m is None else m
    return float(np.min(m - 0.5 * div))


def bilinear_coefficients(method, eps, phi, grad_phi, D, b=None, m=None, tau_mass=0.0):
    """Coefficient fields (alpha, beta_a, beta_b, gamma) at sample points.

    ``tau_mass`` adds a plain reaction coefficient weighted like the
    method's mass term (used by the time stepper's BDF2 term).
    """
    phi = np.asarray(phi, dtype=float)
    gp = np.asarray(grad_phi, dtype=float)
    agp = np.sqrt(np.sum(gp * gp, axis=-1))
    one_m = 1.0 - phi
    name = method.name

    beta_b = np.zeros_like(gp)
    if name == "ddm1":
        alpha = phi * D
        beta_a = np.zeros_like(gp)
        gamma = D / eps**3 * one_m
    elif name == "ddm2":
        alpha = phi * D
        beta_a = D[..., None] * gp
        gamma = D / eps**2 * one_m
    elif name == "sbm":
        alpha = phi**2 * D
        beta_a = (2.0 * phi * D)[..., None] * gp
        gamma = D * agp**2 + D / eps**2 * one_m
    elif name == "nddm":
        alpha = phi * D
        beta_a = D[..., None] * gp
        gamma = D / eps**2 * one_m + 1.5 * D / eps * one_m * agp
    elif name == "nsddm":
        alpha = phi * D
        beta_a = D[..., None] * gp
        beta_b = D[..., None] * gp
        gamma = D / eps**2 * one_m + 6.0 * D / eps * one_m * agp
    elif name == "mix0":
        alpha = phi**2 * D
        beta_a = (2.0 * phi * D)[..., None] * gp
        beta_b = (phi * D)[..., None] * gp
        gamma = 2.0 * D * agp**2 + D / eps**2 * one_m**2 + 0.25 * D * agp**2
    elif name == "mix1":
        alpha = phi**2 * D
        beta_a = (phi * D)[..., None] * gp
        beta_b = (2.0 * phi * D)[..., None] * gp
        gamma = 2.0 * D * agp**2 + D / eps**2 * one_m + 0.25 * D * agp**2
    else:  # pragma: no cover
        raise AssertionError(name)

    mass = np.zeros_like(phi) if m is None else np.asarray(m, dtype=float)
    mass = mass + tau_mass
    if b is not None or tau_mass or m is not None:
        b_arr = np.zeros_like(gp) if b is None else np.asarray(b, dtype=float)
        bgp = np.sum(b_arr * gp, axis=-1)
        if name in ("ddm1", "ddm2", "nddm", "nsddm"):
            beta_a = beta_a + phi[..., None] * b_arr
            gamma = gamma + phi * mass
            if not method.naive_advection:
                gamma = gamma + pos(bgp)
        elif name == "sbm":
            beta_a = beta_a + (phi**2)[..., None] * b_arr
            gamma = gamma + phi**2 * mass
            if not method.naive_advection:
                gamma = gamma + phi * pos(bgp)
        elif name == "mix0":
            beta_a = beta_a + (phi**2)[..., None] * b_arr
            gamma = gamma + phi * bgp + phi**2 * mass
        elif name == "mix1":
            beta_a = beta_a + (phi**2)[..., None] * b_arr
            gamma = gamma + 2.0 * phi * bgp - phi * neg(bgp) + phi * mass
    return {"alpha": alpha, "beta_a": beta_a, "beta_b": beta_b, "gamma": gamma}


def linear_coefficients(method, eps, phi, grad_phi, D, gbar, fbar,
                        b=None, grad_gbar=None):
    """Right-hand-side fields (lin_v, lin_g) for one solution component."""
    phi = np.asarray(phi, dtype=float)
    gp = np.asarray(grad_phi, dtype=float)
    agp = np.sqrt(np.sum(gp * gp, axis=-1))
    one_m = 1.0 - phi
    g = np.asarray(gbar, dtype=float)
    f = np.asarray(fbar, dtype=float)
    name = method.name

    lin_g = np.zeros_like(gp)
    if name == "ddm1":
        lin_v = phi * f + D / eps**3 * one_m * g
    elif name == "ddm2":
        lin_v = phi * f + D / eps**2 * one_m * g
    elif name == "sbm":
        lin_v = phi**2 * f + D * agp**2 * g + D / eps**2 * one_m * g
    elif name == "nddm":
        lin_v = phi * f + (D / eps**2 * one_m + 1.5 * D / eps * one_m * agp) * g
    elif name == "nsddm":
        lin_v = phi * f + (D / eps**2 * one_m + 6.0 * D / eps * one_m * agp) * g
        lin_g = (D * g)[..., None] * gp
    elif name == "mix0":
        lin_v = phi**2 * f + (2.0 * D * agp**2 + D / eps**2 * one_m**2
                              + 0.25 * D * agp**2) * g
        lin_g = (phi * D * g)[..., None] * gp
    elif name == "mix1":
        if grad_gbar is None:
            raise ValueError("mix1 needs grad_gbar (analytic or finite-difference)")
        w = 2.0 * g[..., None] * gp - one_m[..., None] * np.asarray(grad_gbar, dtype=float)
        lin_v = phi * f + (D / eps**2 * one_m + 0.25 * D * agp**2) * g \
            + D * np.sum(w * gp, axis=-1)
        lin_g = (phi * D)[..., None] * w
    else:  # pragma: no cover
        raise AssertionError(name)

    if b is not None:
        b_arr = np.asarray(b, dtype=float)
        bgp = np.sum(b_arr * gp, axis=-1)
        if name in ("ddm1", "ddm2", "nddm", "nsddm"):
            if not method.naive_advection:
                lin_v = lin_v + pos(bgp) * g
        elif name == "sbm":
            if not method.naive_advection:
                lin_v = lin_v + phi * pos(bgp) * g
        elif name == "mix0":
            lin_v = lin_v + phi * bgp * g
        elif name == "mix1":
            lin_v = lin_v + phi * np.sum(w * b_arr, axis=-1) - phi * neg(bgp) * g
    return {"lin_v": lin_v, "lin_g": lin_g}


def forms(method, data, phi, grad_phi, points, gbar, fbar, grad_gbar=None,
          tau_mass=0.0, extra_lin_v=None):
    """Both coefficient sets for a scalar problem at sample points."""
    D = data.d_at(points)
    b = data.b_at(points)
    m = data.m_at(points)
    eps = data.epsilon
    bil = bilinear_coefficients(method, eps, phi, grad_phi, D, b=b, m=m,
                                tau_mass=tau_mass)
    lin = linear_coefficients(method, eps, phi, grad_phi, D, gbar, fbar, b=b,
                              grad_gbar=grad_gbar)
    if extra_lin_v is not None:
        lin["lin_v"] = lin["lin_v"] + extra_lin_v
    return bil, lin


@dataclass
class IntegrandSample:
    """State at one quadrature point, for direct density evaluation."""

    phi: float
    grad_phi: np.ndarray
    u: float
    grad_u: np.ndarray
    v: float
    grad_v: np.ndarray
    gbar: float
    fbar: float
    D: float
    epsilon: float
    b: np.ndarray = None
    m: float = 0.0
    grad_gbar: np.ndarray = None


def densities(method, s):
    """(a-density, l-density) at a single sample; same recipe as assembly."""
    phi = np.atleast_1d(np.asarray(s.phi, dtype=float))
    gp = np.atleast_2d(np.asarray(s.grad_phi, dtype=float))
    D = np.atleast_1d(np.asarray(s.D, dtype=float))
    b = None if s.b is None else np.atleast_2d(np.asarray(s.b, dtype=float))
    m = None if s.m is None else np.atleast_1d(np.asarray(s.m, dtype=float))
    bil = bilinear_coefficients(method, s.epsilon, phi, gp, D, b=b, m=m)
    gg = None if s.grad_gbar is None else np.atleast_2d(np.asarray(s.grad_gbar, dtype=float))
    lin = linear_coefficients(method, s.epsilon, phi, gp, D,
                              np.atleast_1d(s.gbar), np.atleast_1d(s.fbar),
                              b=b, grad_gbar=gg)
    gu = np.asarray(s.grad_u, dtype=float)
    gv = np.asarray(s.grad_v, dtype=float)
    a_density = (
        bil["alpha"][0] * gu @ gv
        + (bil["beta_a"][0] @ gu) * s.v
        + s.u * (bil["beta_b"][0] @ gv)
        + bil["gamma"][0] * s.u * s.v
    )
    l_density = lin["lin_v"][0] * s.v + lin["lin_g"][0] @ gv
    return float(a_density), float(l_density)


def neumann_coefficients(phi, grad_phi, D, fbar, p_n=0.0):
    """Diffuse homogeneous-flux form: a = phi D grad p . grad q,
    l = phi fbar q - p_n |grad phi| q."""
    phi = np.asarray(phi, dtype=float)
    gp = np.asarray(grad_phi, dtype=float)
    agp = np.sqrt(np.sum(gp * gp, axis=-1))
    bil = {
        "alpha": phi * np.asarray(D, dtype=float),
        "beta_a": np.zeros_like(gp),
        "beta_b": np.zeros_like(gp),
        "gamma": np.zeros_like(phi),
    }
    lin = {"lin_v": phi * np.asarray(fbar, dtype=float) - p_n * agp,
           "lin_g": np.zeros_like(gp)}
    return bil, lin


def sigma_reconstruction(method, phi, grad_phi, u, grad_u, gbar, grad_gbar=None):
    """Gradient proxy sigma_h used in H1 error reporting for mixed methods.

    mix0: sigma = (grad(phi u) - gbar grad phi) / max(phi, 1/2)
    mix1: sigma = grad[phi u + (1-phi) gbar] + (u - gbar) grad phi
    The max(phi, 1/2) guard is inert where errors are masked (r <= 0).
    """
    phi = np.asarray(phi, dtype=float)
    gp = np.asarray(grad_phi, dtype=float)
    u = np.asarray(u, dtype=float)
    gu = np.asarray(grad_u, dtype=float)
    g = np.asarray(gbar, dtype=float)
    grad_phi_u = phi[..., None] * gu + u[..., None] * gp
    if method.name == "mix0":
        return (grad_phi_u - g[..., None] * gp) / np.maximum(phi, 0.5)[..., None]
    if method.name == "mix1":
        if grad_gbar is None:
            raise ValueError("mix1 sigma needs grad_gbar")
        gg = np.asarray(grad_gbar, dtype=float)
        return (grad_phi_u + (1.0 - phi)[..., None] * gg - g[..., None] * gp
                + (u - g)[..., None] * gp)
    raise ValueError(f"{method.name} has no sigma reconstruction")


def coercivity_margin(method, s):
    """Pointwise lower-bound witness for the u=v density of coercive methods.

    For mix0 the density dominates (D/eps^2)(1-phi)^2 u^2; for nsddm the
    Young pairing bounds the cross term by diffusion + stabilization.
    Returns density-minus-bound (nonnegative when the proof applies).
    """
    a_density, _ = densities(method, replace(s, v=s.u, grad_v=s.grad_u))
    eps = s.epsilon
    if method.name == "mix0":
        bound = s.D / eps**2 * (1.0 - s.phi) ** 2 * s.u**2
        return a_density - bound
    raise ValueError("margin check defined for mix0 only")


def fd_gradient(fn, points, step):
    """Central finite-difference gradient of a scalar field at points."""
    p = np.asarray(points, dtype=float)
    dim = p.shape[-1]
    out = np.empty_like(p)
    for d in range(dim):
        dp = np.zeros(dim)
        dp[d] = step
        out[..., d] = (np.asarray(fn(p + dp)) - np.asarray(fn(p - dp))) / (2.0 * step)
    return out
