import numpy as np
import pytest

from ddfem.geometry import Arc, Circle, Complement, Rotate
from ddfem.phasefield import (PhaseField, Region, BoundaryExtension,
                              ForcingExtension)

CIRCLE = Circle((0.0, 0.0), 0.5)
ARC = Arc(0.5, 0.25, 60.0, 0.25)


def test_phi_on_boundary_is_half():
    pf = PhaseField(CIRCLE, 0.05)
    assert pf.values(np.array([[0.5, 0.0]]))[0] == pytest.approx(0.5, abs=1e-15)


def test_phi_at_one_epsilon():
    pf = PhaseField(CIRCLE, 0.05)
    val = pf.values(np.array([[0.55, 0.0]]))[0]
    # direct evaluation of (1 - tanh 3)/2
    assert val == pytest.approx((1.0 - np.tanh(3.0)) / 2.0, rel=1e-12)
    assert val == pytest.approx(2.4726e-3, rel=1e-4)


def test_phi_symmetry_inside():
    pf = PhaseField(CIRCLE, 0.05)
    inner = pf.values(np.array([[0.45, 0.0]]))[0]
    outer = pf.values(np.array([[0.55, 0.0]]))[0]
    assert inner == pytest.approx(1.0 - outer, abs=1e-14)
    assert inner == pytest.approx(0.9975274, rel=1e-6)


def test_phi_strictly_inside_unit_interval():
    pf = PhaseField(CIRCLE, 0.05)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-3, 3, size=(500, 2))
    phi = pf.values(pts)
    assert np.all(phi >= 0.0) and np.all(phi <= 1.0)


def test_grad_phi_identity():
    pf = PhaseField(CIRCLE, 0.05)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, size=(200, 2))
    phi = pf.values(pts)
    expected = -(6.0 / 0.05) * (phi * (1 - phi))[:, None] * CIRCLE.gradient(pts)
    assert np.allclose(pf.gradient(pts), expected, rtol=1e-14, atol=1e-300)


def test_grad_phi_boundary_value():
    # r=0, grad r=(1,0): grad phi = (-1.5/eps, 0) since phi(1-phi) = 1/4
    eps = 0.07
    pf = PhaseField(CIRCLE, eps)
    g = pf.gradient(np.array([[0.5, 0.0]]))[0]
    assert g[0] == pytest.approx(-1.5 / eps, rel=1e-12)
    assert g[1] == pytest.approx(0.0, abs=1e-14)


def test_grad_phi_finite_differences_band():
    eps = 0.05
    pf = PhaseField(CIRCLE, eps)
    rng = np.random.default_rng(2)
    # 1000 random interface-band points (|r| < 2 eps), off the center
    theta = rng.uniform(0, 2 * np.pi, 1000)
    rr = 0.5 + rng.uniform(-2 * eps, 2 * eps, 1000)
    pts = rr[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    g = pf.gradient(pts)
    step = 1e-7
    fd = np.empty_like(g)
    for d in range(2):
        dp = np.zeros(2)
        dp[d] = step
        fd[:, d] = (pf.values(pts + dp) - pf.values(pts - dp)) / (2 * step)
    rel = np.linalg.norm(fd - g, axis=1) / np.linalg.norm(g, axis=1)
    assert np.max(rel) < 1e-6


def test_interior_gradient_small():
    pf = PhaseField(CIRCLE, 0.05)
    delta = 1e-9
    pts = np.array([[0.05, 0.0]])  # deep interior, phi within delta of 1
    assert pf.values(pts)[0] >= 1 - delta
    assert np.linalg.norm(pf.gradient(pts)) < 6 * delta / 0.05


def test_normal_circle_and_complement():
    pf = PhaseField(CIRCLE, 0.05)
    n = pf.normal(np.array([[0.5, 0.0]]))[0]
    assert np.allclose(n, [1.0, 0.0], atol=1e-14)
    pf_inv = PhaseField(Complement(CIRCLE), 0.05)
    n_inv = pf_inv.normal(np.array([[0.5, 0.0]]))[0]
    assert np.allclose(n_inv, [-1.0, 0.0], atol=1e-14)


def test_normal_arc_cap_matches_boundary_sampling():
    from test_geometry import arc_boundary_polyline
    pf = PhaseField(ARC, 0.05)
    x = np.array([-0.55, 0.6])  # beyond the upper cap, outside
    n = pf.normal(x[None])[0]
    pts = arc_boundary_polyline(ARC, n=240000)
    nearest = pts[np.argmin(np.linalg.norm(pts - x, axis=1))]
    direction = (x - nearest) / np.linalg.norm(x - nearest)
    assert np.allclose(n, direction, atol=1e-3)


def test_region_partition_and_width():
    eps = 0.05
    pf = PhaseField(CIRCLE, eps)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, size=(2000, 2))
    tags = pf.classify(pts)
    assert set(np.unique(tags)) <= {Region.INTERIOR, Region.INTERFACE, Region.EXTERIOR}
    # width along a radial ray via bisection on phi itself
    for delta in (1e-9, 1e-6, 1e-3):
        lo, hi = 0.0, 10 * eps

        def radius_where(phi_target):
            a, b = -0.45, 1.0  # signed offset along the outward radial ray
            for _ in range(200):
                mid = 0.5 * (a + b)
                if pf.values(np.array([[0.5 + mid, 0.0]]))[0] > phi_target:
                    a = mid
                else:
                    b = mid
            return 0.5 * (a + b)

        width = radius_where(delta) - radius_where(1 - delta)
        assert width == pytest.approx(2 * eps * np.arctanh(1 - 2 * delta) / 3,
                                      rel=1e-6)
    w9 = pf.interface_width(1e-9)
    w3 = pf.interface_width(1e-3)
    assert w9 > w3  # monotone in delta


def test_surface_measure_matches_perimeter():
    # integral of |grad phi| over the box approximates the circle perimeter
    eps = 0.05
    pf = PhaseField(CIRCLE, eps)
    n = 800
    xs = np.linspace(-1, 1, n, endpoint=False) + 1.0 / n
    X, Y = np.meshgrid(xs, xs)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    mags = np.linalg.norm(pf.gradient(pts), axis=1)
    integral = np.sum(mags) * (2.0 / n) ** 2
    assert integral == pytest.approx(np.pi, rel=0.02)


def test_gradient_integral_vanishes_for_compact_bump():
    eps = 0.05
    pf = PhaseField(CIRCLE, eps)
    n = 400  # symmetric grid; phi is constant (0) on the box boundary
    xs = np.linspace(-1, 1, n, endpoint=False) + 1.0 / n
    X, Y = np.meshgrid(xs, xs)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    integral = np.sum(pf.gradient(pts), axis=0) * (2.0 / n) ** 2
    assert np.all(np.abs(integral) < 1e-8)


def test_extension_constant_data():
    ext = BoundaryExtension(CIRCLE, lambda p: np.full(len(p), 3.25))
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1, 1, size=(50, 2))
    assert np.allclose(ext(pts), 3.25)


def test_extension_first_coordinate():
    ext = BoundaryExtension(CIRCLE, lambda p: p[:, 0])
    assert ext(np.array([[1.0, 0.0]]))[0] == pytest.approx(0.5, abs=1e-12)


def test_extension_constant_along_normal_rays():
    # Taylor-Green-like data stays constant along sampled normal rays
    def g(p):
        return np.column_stack([
            -np.cos(2 * np.pi * p[:, 0]) * np.sin(2 * np.pi * p[:, 1]),
            np.sin(2 * np.pi * p[:, 0]) * np.cos(2 * np.pi * p[:, 1]),
        ])

    eps = 0.04
    pf = PhaseField(CIRCLE, eps)
    ext = BoundaryExtension(CIRCLE, g, band=pf.band())
    rng = np.random.default_rng(5)
    theta = rng.uniform(0, 2 * np.pi, 40)
    base = 0.5 * np.column_stack([np.cos(theta), np.sin(theta)])
    normal = base / 0.5
    for t in np.linspace(-pf.band(), pf.band(), 9):
        vals = ext(base + t * normal)
        assert np.allclose(vals, g(base), atol=1e-9)


def test_forcing_extension_inside_and_out():
    f = lambda p: p[:, 0] ** 2
    ext = ForcingExtension(CIRCLE, f)
    inside = np.array([[0.2, 0.1]])
    assert ext(inside)[0] == pytest.approx(0.04)
    outside = np.array([[1.0, 0.0]])
    assert ext(outside)[0] == pytest.approx(0.25, abs=1e-12)  # f at (0.5, 0)


def test_band_default_and_epsilon_validation():
    pf = PhaseField(CIRCLE, 0.04)
    assert pf.band() == pytest.approx(0.14)
    with pytest.raises(ValueError):
        PhaseField(CIRCLE, -1.0)
