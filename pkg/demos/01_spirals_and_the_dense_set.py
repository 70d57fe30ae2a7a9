"""Cubic spirals, and the dense control set built from them.

Run: python3 demos/01_spirals_and_the_dense_set.py   (about 15 s)
"""

import math

import numpy as np

from sparselattice import Pose2D, generate_dense_control_set, solve_spiral_bvp

# A single boundary value problem: leave the origin heading east and arrive
# 3.2 m ahead, 0.8 m to the left, turned by 22.5 degrees.
target = Pose2D(3.2, 0.8, math.pi / 8)
sp = solve_spiral_bvp(target, 0.5)
s = np.linspace(0, sp.sf, 9)
print(f"spiral length {sp.sf:.3f} m")
print("curvature along it:", np.round(sp.curvature(s), 4))

# The dense set repeats this for every reachable lattice endpoint and keeps
# the spirals that respect the curvature limit.
dense = generate_dense_control_set()
print(f"\ndense set: {len(dense)} actions over {dense.cfg.n_headings} headings")
for h in (0, 1, 2):
    fam = dense.by_heading[h]
    lengths = [a.arc_length for a in fam]
    print(f"  heading {h}: {len(fam):3d} actions, lengths {min(lengths):.2f} to {max(lengths):.2f} m")
