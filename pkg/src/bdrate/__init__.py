"""Boundary distortion rates of small balls under hyperbolic torus maps.

The main entry points are re-exported here; see the submodules for the rest.
"""
from .distortion import Schedule, distortion_curve, estimate_distortion
from .evolution import covering_rate, evolve_boundary, greedy_net
from .lyapunov import lyapunov_spectrum, positive_sum
from .maps import cat_map, make_map
from .symbolic import exact_distortion_ratio, golden_mean, parry_measure

__version__ = "0.1.0"

__all__ = [
    "Schedule",
    "cat_map",
    "covering_rate",
    "distortion_curve",
    "estimate_distortion",
    "evolve_boundary",
    "exact_distortion_ratio",
    "golden_mean",
    "greedy_net",
    "lyapunov_spectrum",
    "make_map",
    "parry_measure",
    "positive_sum",
]
