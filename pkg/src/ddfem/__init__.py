"""Diffuse-domain finite elements for Dirichlet problems on complex 2D domains."""

from . import (geometry, phasefield, mesh, femspace, formulations, system,
               studies, navierstokes)

__version__ = "0.1.0"
