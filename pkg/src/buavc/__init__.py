"""Chance-constrained buffered Voronoi cells for multi-robot collision avoidance.

Subpackages and modules:

- ``mathkit``: erf / chi-squared quantiles, Cholesky, seeded RNG streams
- ``geometry``: H/V polytopes, projection, Chebyshev centers, dilation
- ``separators``: Gaussian best linear separator and obstacle shadows
- ``cells``: buffered uncertainty-aware cells (and the plain BVC baseline)
- ``control``: one-step controllers and deadlock handling
- ``mpc``: receding-horizon planner with double-integrator and quadrotor models
- ``estimation``: measurements, Kalman filter, covariance inflation
- ``sim``: scenarios, the simulation loop, metrics, Monte Carlo checks
"""

from .cells import BUAVC, CellOptions, RobotSnapshot, build_buavc, build_bvc, bvc_cell
from .geometry import HPolytope, Hyperplane, VPolytope, chebyshev_center, project_point
from .separators import GaussianPosition, UncertainObstacle, best_linear_separator, obstacle_separator

__version__ = "0.1.0"

__all__ = [
    "BUAVC",
    "CellOptions",
    "GaussianPosition",
    "HPolytope",
    "Hyperplane",
    "RobotSnapshot",
    "UncertainObstacle",
    "VPolytope",
    "best_linear_separator",
    "build_buavc",
    "build_bvc",
    "bvc_cell",
    "chebyshev_center",
    "obstacle_separator",
    "project_point",
]
