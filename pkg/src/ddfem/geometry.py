"""Signed distance functions for 2D domains, with CSG combinators.

Every shape evaluates vectorized over point arrays of shape ``(..., 2)``
(1D shapes over ``(..., 1)``) and returns distances of shape ``(...,)``.
Sign convention: negative inside the physical domain, positive outside.
Gradients are analytic and unit almost everywhere; on the medial axis the
closest-point projection falls back to a ray-marched boundary search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Circle",
    "Box",
    "Arc",
    "Interval",
    "Complement",
    "Union",
    "Intersection",
    "Rotate",
    "closest_point",
    "DegenerateGradientError",
]

# |grad r| below this at a query point marks the medial axis; callers switch
# to the sampled boundary search there.
MEDIAL_AXIS_TOL = 0.5
_FALLBACK_RAYS = 4096


class DegenerateGradientError(RuntimeError):
    """Raised when a gradient is requested exactly on the medial axis."""


def _norm(v):
    return np.sqrt(np.sum(v * v, axis=-1))


def _unit(v, eps=1e-300):
    n = _norm(v)
    return v / np.maximum(n, eps)[..., None]


class SignedDistance:
    """Base: evaluable signed distance with analytic gradient."""

    dim = 2

    def evaluate(self, p):
        raise NotImplementedError

    def gradient(self, p):
        raise NotImplementedError

    def __call__(self, p):
        return self.evaluate(np.asarray(p, dtype=float))


@dataclass(frozen=True)
class Circle(SignedDistance):
    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    def evaluate(self, p):
        p = np.asarray(p, dtype=float)
        return _norm(p - np.asarray(self.center)) - self.radius

    def gradient(self, p):
        p = np.asarray(p, dtype=float)
        return _unit(p - np.asarray(self.center))


@dataclass(frozen=True)
class Box(SignedDistance):
    """Axis-aligned rectangle given by opposite corners ``lo``, ``hi``."""

    lo: tuple
    hi: tuple

    def evaluate(self, p):
        p = np.asarray(p, dtype=float)
        c = 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))
        b = 0.5 * (np.asarray(self.hi) - np.asarray(self.lo))
        q = np.abs(p - c) - b
        outside = _norm(np.maximum(q, 0.0))
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    def gradient(self, p):
        p = np.asarray(p, dtype=float)
        c = 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))
        b = 0.5 * (np.asarray(self.hi) - np.asarray(self.lo))
        s = np.sign(p - c)
        s[s == 0.0] = 1.0
        q = np.abs(p - c) - b
        out = np.maximum(q, 0.0)
        is_out = np.any(q > 0.0, axis=-1)
        g_out = _unit(out) * s
        # inside: unit step toward the nearest face
        face = np.argmax(q, axis=-1)
        g_in = np.zeros_like(p)
        idx = np.indices(face.shape)
        g_in[(*idx, face)] = 1.0
        g_in *= s
        return np.where(is_out[..., None], g_out, g_in)


@dataclass(frozen=True)
class Arc(SignedDistance):
    """Annulus segment with rounded caps.

    The midline is the circular arc of radius ``center_radius`` covering
    polar angles ``|theta| <= 180 - half_angle_deg`` (the opening gap of
    half-angle ``half_angle_deg`` is centered on the negative x axis); the
    shape is its offset by ``half_width``, capped by disks of radius
    ``cap_radius`` at the midline endpoints.
    """

    center_radius: float = 0.5
    half_width: float = 0.25
    half_angle_deg: float = 60.0
    cap_radius: float = 0.25

    @property
    def outer_radius(self):
        return self.center_radius + self.half_width

    def _covered(self):
        return np.pi - np.deg2rad(self.half_angle_deg)

    def _endpoint(self):
        tc = self._covered()
        return self.center_radius * np.array([np.cos(tc), np.sin(tc)])

    def evaluate(self, p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], np.abs(p[..., 1])
        theta = np.arctan2(y, x)
        rr = np.hypot(x, y)
        e = self._endpoint()
        on_arc = theta <= self._covered()
        d_arc = np.abs(rr - self.center_radius) - self.half_width
        d_cap = np.hypot(x - e[0], y - e[1]) - self.cap_radius
        return np.where(on_arc, d_arc, d_cap)

    def gradient(self, p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], np.abs(p[..., 1])
        ysign = np.where(p[..., 1] < 0.0, -1.0, 1.0)
        theta = np.arctan2(y, x)
        rr = np.hypot(x, y)
        e = self._endpoint()
        on_arc = (theta <= self._covered())[..., None]
        g_arc = _unit(p) * np.sign(rr - self.center_radius)[..., None]
        d = np.stack([x - e[0], (y - e[1]) * ysign], axis=-1)
        g_cap = _unit(d)
        return np.where(on_arc, g_arc, g_cap)


@dataclass(frozen=True)
class Interval(SignedDistance):
    """1D segment [a, b]; r(x) = max(a - x, x - b)."""

    a: float
    b: float
    dim = 1

    def evaluate(self, p):
        p = np.asarray(p, dtype=float)
        x = p[..., 0]
        return np.maximum(self.a - x, x - self.b)

    def gradient(self, p):
        p = np.asarray(p, dtype=float)
        x = p[..., 0]
        mid = 0.5 * (self.a + self.b)
        return np.where(x < mid, -1.0, 1.0)[..., None]


@dataclass(frozen=True)
class Complement(SignedDistance):
    """Exact negation: r_c(x) = -r(x)."""

    inner: SignedDistance

    @property
    def dim(self):
        return self.inner.dim

    def evaluate(self, p):
        return -self.inner.evaluate(p)

    def gradient(self, p):
        return -self.inner.gradient(p)


@dataclass(frozen=True)
class Rotate(SignedDistance):
    """Shape rotated about the origin by ``angle_deg`` (counterclockwise)."""

    inner: SignedDistance
    angle_deg: float

    def _rot(self):
        a = np.deg2rad(self.angle_deg)
        c, s = np.cos(a), np.sin(a)
        return np.array([[c, -s], [s, c]])

    def evaluate(self, p):
        p = np.asarray(p, dtype=float)
        return self.inner.evaluate(p @ self._rot())  # p @ R == R^T applied

    def gradient(self, p):
        p = np.asarray(p, dtype=float)
        r = self._rot()
        return self.inner.gradient(p @ r) @ r.T


@dataclass(frozen=True)
class Union(SignedDistance):
    """min of child distances; conservative bound, exact for disjoint parts."""

    children: tuple

    def __init__(self, *children):
        object.__setattr__(self, "children", tuple(children))

    @property
    def dim(self):
        return self.children[0].dim

    def evaluate(self, p):
        return np.min([c.evaluate(p) for c in self.children], axis=0)

    def gradient(self, p):
        d = np.stack([c.evaluate(p) for c in self.children])
        g = np.stack([c.gradient(p) for c in self.children])
        pick = np.argmin(d, axis=0)
        return np.take_along_axis(g, pick[None, ..., None], axis=0)[0]


@dataclass(frozen=True)
class Intersection(SignedDistance):
    """max of child distances; conservative bound."""

    children: tuple

    def __init__(self, *children):
        object.__setattr__(self, "children", tuple(children))

    @property
    def dim(self):
        return self.children[0].dim

    def evaluate(self, p):
        return np.max([c.evaluate(p) for c in self.children], axis=0)

    def gradient(self, p):
        d = np.stack([c.evaluate(p) for c in self.children])
        g = np.stack([c.gradient(p) for c in self.children])
        pick = np.argmax(d, axis=0)
        return np.take_along_axis(g, pick[None, ..., None], axis=0)[0]


def _boundary_search(shape, points, n_rays=_FALLBACK_RAYS):
    """Nearest boundary point by sphere tracing along many rays.

    Total fallback for queries on the medial axis where grad r is unusable.
    """
    points = np.atleast_2d(points)
    if shape.dim == 1:
        cands = np.array([[-1.0], [1.0]])
    else:
        ang = np.linspace(0.0, 2.0 * np.pi, n_rays, endpoint=False)
        cands = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    out = np.empty_like(points)
    for k, x in enumerate(points):
        t = np.zeros(len(cands))
        r0 = float(shape.evaluate(x))
        alive = np.ones(len(cands), dtype=bool)
        for _ in range(64):
            q = x[None, :] + t[:, None] * cands
            r = shape.evaluate(q)
            step = np.abs(r)
            crossed = np.sign(r) != np.sign(r0)
            alive &= ~((step < 1e-13) | crossed)
            if not alive.any():
                break
            t[alive] += step[alive]
        q = x[None, :] + t[:, None] * cands
        r = np.abs(shape.evaluate(q))
        dist = t + r  # residual distance bound
        out[k] = q[np.argmin(dist)]
    return out


def closest_point(shape, p):
    """Project points onto the shape boundary: cp = x - r(x) grad r(x).

    Points whose gradient is degenerate (|grad r| < 0.5, medial axis) are
    resolved with the sampled boundary search instead.
    """
    p = np.asarray(p, dtype=float)
    flat = p.reshape(-1, p.shape[-1])
    r = shape.evaluate(flat)
    g = shape.gradient(flat)
    cp = flat - r[:, None] * g
    bad = _norm(g) < MEDIAL_AXIS_TOL
    if bad.any():
        cp[bad] = _boundary_search(shape, flat[bad])
    return cp.reshape(p.shape)
