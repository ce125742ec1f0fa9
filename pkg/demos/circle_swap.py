"""Eight robots on a circle swap to the antipodal point.

Writes nothing; prints the run metrics and a coarse picture of the paths.
"""

from dataclasses import replace

import numpy as np

from buavc.sim import RobotSpec, Scenario, gen_antipodal_circle, run

base = Scenario(robots=(RobotSpec((0.0, 0.0), (0.0, 0.0)),))
sc = replace(gen_antipodal_circle(8, 4.0, base), seed=3)
res = run(sc)
m = res.metrics
print(f"arrived {m.n_arrived}/{m.n_robots}  collided {m.n_collided}  steps {m.steps}")
print(f"min distance {m.min_inter_robot_distance_all:.3f} m  completion {m.completion_time} s")

# ASCII rendering of all trajectories on a 41x21 grid
W, H = 41, 21
grid = [[" "] * W for _ in range(H)]
for rec in res.records[::3]:
    for k, p in enumerate(rec.true_pos):
        c = int(round((p[0] + 5) / 10 * (W - 1)))
        r = int(round((5 - p[1]) / 10 * (H - 1)))
        grid[r][c] = str(k)
print("\n".join("".join(row) for row in grid))
