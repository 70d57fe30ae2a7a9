"""Learning sparse lattice control sets from demonstrated paths."""

__version__ = "0.1.0"

from .baseline_dl import reduce_control_set_dl
from .closest_path import brute_force_closest, closest_path, greedy_bound
from .clustering import kmeans_paths, path_distance
from .evaluation import curvature_matching_score, emit_reports, matching_differential, speedup_report
from .geometry import Pose2D, SampledPath, curvature_profile, resample_by_arclength
from .lattice import (ControlAction, ControlSet, LatticeConfig, LatticeVertex, apply_control_action,
                      load_control_set, save_control_set, snap_to_lattice)
from .optimizer import LearnerConfig, ObjectiveParams, learn_control_set, objective
from .planner import (OccupancyGrid, Scenario, VehicleFootprint, collision_free, plan,
                      scenario_from_path, select_goal_vertices, swath_cells, synth_worlds)
from .scoring import ScoreContext, score_paths, score_subpath
from .spiral import DenseSetConfig, generate_dense_control_set, solve_spiral_bvp
