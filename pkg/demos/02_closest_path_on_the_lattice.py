"""Snap a noisy demonstration onto the lattice and watch the bound prune work.

Run: python3 demos/02_closest_path_on_the_lattice.py
"""

import math

import numpy as np

from sparselattice import closest_path, generate_dense_control_set, greedy_bound
from sparselattice.baseline_dl import reduce_control_set_dl
from sparselattice.geometry import resample_by_arclength

dense = generate_dense_control_set()
cs = reduce_control_set_dl(dense, 1.1)

# A gentle S-curve, jittered the way a recorded trajectory would be.
rng = np.random.default_rng(7)
x = np.linspace(0, 12, 200)
y = 1.2 * np.sin(x / 12 * 2 * math.pi) + rng.normal(0, 0.03, x.size)
demo = resample_by_arclength(np.column_stack([x, y]), cs.delta)

B = greedy_bound(demo, cs)
tight = closest_path(demo, cs, B)
loose = closest_path(demo, cs, math.inf)
print(f"demonstration: {len(demo)} samples")
print(f"greedy bound  {B:.3f} m")
print(f"closest path  {tight.score:.3f} m using {len(tight.actions)} actions")
print(f"states expanded: {tight.states_expanded} with the bound, {loose.states_expanded} without")
assert abs(tight.score - loose.score) < 1e-12
