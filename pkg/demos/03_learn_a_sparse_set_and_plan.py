"""End to end at desk scale: demonstrate, cluster, learn, then plan with the result.

Training paths come from the dense planner on synthetic double-swerve worlds.
The learned set is compared against the dense set and the reachability
baseline on fresh worlds.

Run: python3 demos/03_learn_a_sparse_set_and_plan.py   (about 1 min)
"""

from sparselattice import (LearnerConfig, ObjectiveParams, VehicleFootprint, generate_dense_control_set,
                           kmeans_paths, learn_control_set, plan, reduce_control_set_dl, synth_worlds)
from sparselattice.geometry import normalize_to_origin, slice_sliding_windows
from sparselattice.planner import SwathTable

fp = VehicleFootprint()
dense = generate_dense_control_set()
dl = reduce_control_set_dl(dense, 1.1)
tables = {"dense": SwathTable(dense, fp, 0.2)}

# 1. demonstrations: 10 m windows every metre, re-anchored at the origin
slices = []
for w in synth_worlds(10, seed=100):
    path = plan(w, dense, swaths=tables["dense"]).path
    slices += [normalize_to_origin(s) for s in slice_sliding_windows(path, 10.0, 1.0)]
print(f"{len(slices)} training slices")

# 2. group similar manoeuvres, then learn a set that reproduces the centroids
clusters = kmeans_paths(slices, 8, seed=0)
state = learn_control_set(clusters, dense, ObjectiveParams(0.311, len(dense)), LearnerConfig(seed=0))
learned = state.learned
print(f"learned {len(learned)} actions (dense {len(dense)}, baseline {len(dl)}), "
      f"matching term {state.matching:.3f} m")

# 3. plan on unseen worlds
sets = {"dense": dense, "dl": dl, "learned": learned}
tables.update({k: SwathTable(v, fp, 0.2) for k, v in sets.items() if k != "dense"})
expansions = {}
for name, cs in sets.items():
    results = [plan(w, cs, swaths=tables[name]) for w in synth_worlds(20, seed=200)]
    expansions[name] = sum(r.expansions for r in results)
    print(f"{name:8s} {len(cs):5d} actions  {expansions[name]:9d} edge evaluations")
print(f"speedup: {expansions['dense'] / expansions['learned']:.1f}x over dense, "
      f"{expansions['dl'] / expansions['learned']:.1f}x over the baseline")
