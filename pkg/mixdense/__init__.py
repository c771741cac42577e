"""mixdense: location-scale mixtures as universal approximators of densities."""

from .analysis import Box, QuadratureGrid, norm_report
from .classes import catalog, catalog_by_name, lookup
from .constructive import (
    compact_uniform_approximate,
    l1_approximate,
    riemann_mixture,
    uniform_approximate,
)
from .errors import MixdenseError
from .greedy import greedy_convex_fit, lp_approximate
from .mixture import ClassFlag, Density, Mixture, evaluate_mixture, validate_mixture

__version__ = "0.1.0"

__all__ = [
    "Box",
    "ClassFlag",
    "Density",
    "MixdenseError",
    "Mixture",
    "QuadratureGrid",
    "catalog",
    "catalog_by_name",
    "compact_uniform_approximate",
    "evaluate_mixture",
    "greedy_convex_fit",
    "l1_approximate",
    "lookup",
    "lp_approximate",
    "norm_report",
    "riemann_mixture",
    "uniform_approximate",
    "validate_mixture",
]
