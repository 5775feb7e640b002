# -----------------------------------------------------------------------------
# File: __init__.py
# Description: Branched multi-task models, layouts, the synthetic benchmark
#              and the plain trainer.
#
# License: MIT
# -----------------------------------------------------------------------------

from .layout import (
    LAYOUT_PRESETS, Layout, LayoutViolation, format_layout, layout_for_sharing_level, layout_preset, parse_layout,
    random_layout, sharing_level_name, split_candidates, split_task_set, validate_layout,
)
from .task_spec import METRIC_CATALOG, MetricDef, TaskSpec, default_task_specs
from .labeled_batch import LabeledBatch
from .branched_model import (
    LOSS_FLOOR, BranchedModel, build_model, evaluate_metrics, input_gradients, load_model,
    losses_and_input_gradients, parameter_gradients, raw_task_losses, save_model, task_losses,
)
from .synthetic_dataset import SyntheticDataset, generate_synthetic_dataset, load_dataset, save_dataset
from .trainer import TrainingResult, train
