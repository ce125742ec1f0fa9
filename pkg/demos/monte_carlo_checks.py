"""Empirical check of the probabilistic guarantees behind the cells.

Places the robots where the guarantee is tightest (on the face of their cell)
and counts collisions over a million sampled realizations.
"""

import numpy as np

from buavc.geometry import VPolytope
from buavc.mathkit import make_rng
from buavc.separators import GaussianPosition, UncertainObstacle
from buavc.sim import montecarlo as mc

rng = make_rng(0)
print(mc.lemma1(0.1, 2, 10 ** 6, rng).line())
S = 0.06 ** 2 * np.eye(2)
for delta in (0.03, 0.05, 0.1):
    pair = mc.PairConfig(GaussianPosition([0, 0], S), GaussianPosition([1.5, 0.3], S), 0.2, delta)
    print(mc.theorem2(pair, 10 ** 6, rng).line())
    obs = UncertainObstacle(VPolytope.box([1.0, -0.5], [2.0, 0.5]), 0.05 ** 2 * np.eye(2))
    print(mc.theorem3(mc.ObstacleConfig(GaussianPosition([-0.5, 0], S), obs, 0.2, delta), 10 ** 6, rng).line())
