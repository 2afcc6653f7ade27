"""Phase field representation of a domain embedded in a box.

phi(x) = (1 - tanh(3 r(x)/eps)) / 2 smoothly indicates the physical
domain (phi -> 1 inside, -> 0 outside, 1/2 on the boundary) over a band
of total width about 2*eps. Boundary and forcing data are continued
constantly along boundary normals via closest-point projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .geometry import closest_point

__all__ = ["PhaseField", "Region", "BoundaryExtension", "ForcingExtension"]

# tanh never reaches 0/1 exactly; region membership is thresholded.
REGION_DELTA = 1e-9


class Region(IntEnum):
    INTERIOR = 0
    INTERFACE = 1
    EXTERIOR = 2


@dataclass(frozen=True)
class PhaseField:
    shape: object  # SignedDistance
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")

    def distance(self, p):
        return self.shape.evaluate(np.asarray(p, dtype=float))

    def values(self, p):
        """phi at points; strictly inside (0, 1)."""
        r = self.distance(p)
        return 0.5 * (1.0 - np.tanh(3.0 * r / self.epsilon))

    def gradient(self, p):
        """grad phi = -(6/eps) phi (1-phi) grad r, |grad phi| ~ surface delta."""
        phi = self.values(p)
        gr = self.shape.gradient(np.asarray(p, dtype=float))
        return (-(6.0 / self.epsilon) * phi * (1.0 - phi))[..., None] * gr

    def normal(self, p):
        """Outward unit normal approximation -grad phi / |grad phi|."""
        g = self.gradient(p)
        mag = np.sqrt(np.sum(g * g, axis=-1))
        if np.any(mag == 0.0):
            raise ZeroDivisionError("normal undefined outside the interface band")
        return -g / mag[..., None]

    def classify(self, p, delta=REGION_DELTA):
        phi = self.values(p)
        tags = np.full(np.shape(phi), Region.INTERFACE, dtype=np.int8)
        tags[phi >= 1.0 - delta] = Region.INTERIOR
        tags[phi <= delta] = Region.EXTERIOR
        return tags

    def band(self, factor=3.5):
        """Half-width of the data-extension band."""
        return factor * self.epsilon

    def interface_width(self, delta=REGION_DELTA):
        """Width of the thresholded interface band along a normal ray."""
        return 2.0 * self.epsilon * np.arctanh(1.0 - 2.0 * delta) / 3.0


class BoundaryExtension:
    """gbar: data continued constantly along normals through the boundary.

    gbar(x) = g(cp(x)) with cp the closest-point projection; along any
    normal ray the value is constant, and beyond the extension band this
    coincides with the band-edge value. ``g`` may be scalar- or
    vector-valued (time dependence is the caller's closure).
    """

    def __init__(self, shape, g, band=None):
        self.shape = shape
        self.g = g
        self.band = band

    def __call__(self, p):
        return self.g(closest_point(self.shape, p))

    def projected(self, p):
        """The projection points themselves, for reuse across evaluations."""
        return closest_point(self.shape, p)


class ForcingExtension:
    """fbar: f itself inside the domain, f at the closest point outside."""

    def __init__(self, shape, f):
        self.shape = shape
        self.f = f

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        r = self.shape.evaluate(p)
        vals = np.asarray(self.f(p), dtype=float)
        outside = r > 0.0
        if np.any(outside):
            cp = closest_point(self.shape, p[outside])
            vals = np.array(vals, copy=True)
            vals[outside] = self.f(cp)
        return vals
