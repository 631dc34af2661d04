"""Reachability analysis for linear systems under ReLU network control."""

from .backward import (BackprojectionResult, backprojection_coverage, backprojection_polytope,
                       backreachable_box, estimate_backprojection, image_coverage)
from .dynamics import LtvSystem, control, euler_discretize, observe, simulate_rollout, simulate_rollouts, step
from .errors import *  # noqa: F401,F403
from .forward import (ReachSequence, ReachSpec, Solver, closed_loop_envelope, evenly_spaced_facets,
                      facet_affine, facet_bounds, one_step, propagate, propagate_cells, selector, to_reach_set)
from .nn import (Activation, AffineEnvelope, FeedforwardNetwork, Layer, SlopeMode, SlopePolicy,
                 augment_with_control_limits, concretize, crown_envelope, crown_envelopes, evaluate)
from .partition import (PartitionConfig, Strategy, mc_reach_estimate, propagate_greedy_sim_guided,
                        propagate_uniform, uniform_partition)
from .sets import (Box, HPolytope, LpBall, SetUnion, box_hull, check_containment, check_disjoint,
                   halfspace, is_empty, support_value)
from .verify import ReachAvoidSpec, Verdict, check_reach_avoid, tightness_error

__version__ = "0.1.0"
