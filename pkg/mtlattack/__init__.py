# -----------------------------------------------------------------------------
# File: __init__.py
# Description: Multi-task adversarial attack laboratory. Branched multi-task
#              models on a small differentiable core, white-box attacks with
#              task-gradient combiners (Single, Total, SignTotal, DGBA), the
#              relative metrics that score them, and adversarial training
#              against the combined attacks.
#
# License: MIT
# -----------------------------------------------------------------------------

# The differentiable core: tensors, frozen computation records, reverse-mode
# gradients and the finite-difference checker.
from .diffcore import ComputationRecord, Tensor, evaluate, finite_difference_check, forward, grad

# Branched models, sharing layouts, the synthetic benchmark and the trainer.
from .mtlnet import (
    BranchedModel, LabeledBatch, Layout, TaskSpec, build_model, evaluate_metrics,
    generate_synthetic_dataset, load_dataset, load_model, parse_layout, save_dataset, save_model, train,
)

# Metric snapshots, ARA/ARP and transferability.
from .metrics import MetricSnapshot, ara, arp, transferability

# Attacks: combiners, budget, drivers, oracle and diagnostics.
from .attack import (
    AttackConfig, AttackTrace, GradientCombiner, PerturbationBudget, linearized_objective_oracle, run_attack,
)

# Adversarial training and the robustness matrix.
from .advtrain import FatConfig, RobustnessMatrix, fat_train, robust_eval

# Experiment configuration.
from .config.experiment_config import ExperimentConfig

# All laboratory errors derive from MtlAttackBaseError.
from .exceptions.mtlattack_exception import *

from mtlattack.version import __version__
