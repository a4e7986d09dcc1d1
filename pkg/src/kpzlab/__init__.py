"""Numerical toolkit for Brownian last passage percolation, melons and KPZ evolution."""

from .errors import (DomainError, KpzLabError, NonFinitaryError, ParameterError, RefusalError,
                     RejectionFailure, ResourceError, UnavailableError, ValidationError,
                     WindowNotFoundError)
from .grid import GridFunction, GridSpec, LatticePath, LineEnsemble
from .kpz import InitialCondition, evolve, evolve_two_step, flat, narrow_wedge, parabola, parse_ic
from .lpp import last_passage_value, leftmost_geodesic, rightmost_geodesic
from .pitman import melon, pitman_pair, rescaled_melon
from .sampler import RngStream
from .sheet import SheetApprox, build_sheet_approx, sheet_value

__version__ = "0.1.0"

__all__ = [
    "DomainError", "KpzLabError", "NonFinitaryError", "ParameterError", "RefusalError",
    "RejectionFailure", "ResourceError", "UnavailableError", "ValidationError", "WindowNotFoundError",
    "GridFunction", "GridSpec", "LatticePath", "LineEnsemble",
    "InitialCondition", "evolve", "evolve_two_step", "flat", "narrow_wedge", "parabola", "parse_ic",
    "last_passage_value", "leftmost_geodesic", "rightmost_geodesic",
    "melon", "pitman_pair", "rescaled_melon", "RngStream",
    "SheetApprox", "build_sheet_approx", "sheet_value",
]
