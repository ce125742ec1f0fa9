"""Two uncertain robots: where does the best separating plane go?

With equal covariances the plane sits on the perpendicular bisector. As one
robot's estimate gets worse, the plane moves away from it, so both robots end
up with the same chance of being on the wrong side.
"""

import numpy as np

from buavc.cells import CellOptions, RobotSnapshot, build_buavc
from buavc.geometry import HPolytope
from buavc.separators import GaussianPosition, best_linear_separator, misclassification

pi, pj = np.array([0.0, 0.0]), np.array([2.0, 0.0])
ws = HPolytope.box([-4, -4], [4, 4])

print("sigma_j/sigma_i   plane offset   P(i wrong)   P(j wrong)")
for ratio in (1.0, 1.5, 2.0, 4.0):
    gi = GaussianPosition(pi, 0.1 ** 2 * np.eye(2))
    gj = GaussianPosition([0.6, 0.0], (0.1 * ratio) ** 2 * np.eye(2))
    h = best_linear_separator(gi, gj)
    p1, p2, _, _ = misclassification(h, gi, gj)
    print(f"{ratio:15.1f}   {h.b / h.a[0]:12.4f}   {p1:10.2e}   {p2:10.2e}")

# the cell each robot actually gets once the radius and chance buffers are applied
gi = GaussianPosition(pi, 0.04 ** 2 * np.eye(2))
gj = GaussianPosition(pj, 0.06 ** 2 * np.eye(2))
for delta in (0.01, 0.05, 0.3):
    cell = build_buavc(RobotSnapshot(0, gi, np.zeros(2), 0.2), [gj], [], delta, CellOptions(ws, 5.0))
    f = cell.faces[0]
    print(f"delta={delta:<5} face at x={f.b_eff:.4f}  (chance buffer {f.beta_delta:.4f} m)")
