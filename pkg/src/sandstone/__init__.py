"""Sandpiles, Apollonian packings and piecewise-quadratic sandpile solutions."""

from .circles import GenCircle, Packing, band_packing, downward_packing, soddy_circles, successor_circle
from .errors import SandstoneError
from .fractal import build_triangulation, curve_points, initial_patches, triangle_from_vertices
from .gamma import c0, gamma_member, raster_gamma
from .lattice import SQUARE, TRIANGULAR, ChipConfig, Domain, stabilize, stabilize_pile
from .symmat import RationalSym2, Sym2, m_of, params_of, reflect_trace2, successor_matrix

__version__ = "0.1.0"
