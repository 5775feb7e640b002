# -----------------------------------------------------------------------------
# File: __init__.py
# Description: Multi-task white-box attacks: gradient combiners, the
#              l-infinity budget, FGSM/PGD/APGD drivers, the sign-vector
#              oracle and the gradient diagnostics.
#
# License: MIT
# -----------------------------------------------------------------------------

from .combiners import GradientCombiner, combine_gradients, signed_direction
from .budget import PerturbationBudget, max_deviation, parse_epsilon, project, within_budget
from .attack_config import DEFAULT_ALPHA, DEFAULT_ITERATIONS, AttackConfig, apgd_checkpoints
from .attack_trace import AttackTrace, TraceStep
from .diagnostics import (
    AlignmentResult, first_order_prediction, gradient_dominance_ratio, perturbation_alignment, perturbation_cosine,
)
from .drivers import (
    EarlyStop, apgd_attack, apgd_momentum_step, checkpoint_halves_step, fgsm_attack, pgd_attack, run_attack,
)
from .ilp_oracle import OracleResult, linearized_objective, linearized_objective_oracle, sign_vectors
