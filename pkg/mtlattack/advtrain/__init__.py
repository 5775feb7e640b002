# -----------------------------------------------------------------------------
# File: __init__.py
# Description: Multi-task adversarial training and robustness evaluation.
#
# License: MIT
# -----------------------------------------------------------------------------

from .fat_training import FatConfig, FatEpoch, FatResult, adversarial_batch, fat_train
from .robust_eval import (
    CLEAN_DEFENSE, RobustnessMatrix, RobustnessRecord, attack_column, robust_eval, split_attack_column,
)
