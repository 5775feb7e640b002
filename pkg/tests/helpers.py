# -----------------------------------------------------------------------------
# File: helpers.py
# Description: Small seeded models, datasets and experiment configs shared by
#              the test modules.
#
# License: MIT
# -----------------------------------------------------------------------------

import os
import sys

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from mtlattack.mtlnet import (
    TaskSpec, build_model, default_task_specs, generate_synthetic_dataset, layout_for_sharing_level,
)


def regression_specs(n_tasks, out_dim=2):
    """Regression-only tasks: their metrics never vanish, so ARP is always defined."""
    return tuple(TaskSpec(task_id=i, head_kind="regression", out_dim=out_dim) for i in range(n_tasks))


def tiny_dataset(n_tasks=3, input_dim=6, sizes=(16, 8), rho=0.8, seed=0, task_specs=None):
    return generate_synthetic_dataset(n_tasks, input_dim, sizes, rho, seed, task_specs=task_specs)


def tiny_model(n_tasks=3, level=1, blocks=2, widths=5, input_dim=6, seed=0, task_specs=None):
    specs = task_specs if task_specs is not None else default_task_specs(n_tasks)
    layout = layout_for_sharing_level(level, blocks, n_tasks)
    return build_model(layout, widths, specs, seed, input_dim)


def interior_batch(batch, margin=0.05):
    """The batch with inputs squeezed away from the [0, 1] boundary."""
    return batch.with_inputs(margin + (1.0 - 2.0 * margin) * np.asarray(batch.inputs))


def tiny_config_dict(output_dir, **overrides):
    """A complete experiment that trains, attacks and defends two small models."""
    config = {
        "seed": 0,
        "output_dir": output_dir,
        "dataset": {
            "n_tasks": 2, "input_dim": 6, "sizes": [12, 6], "rho": 0.8,
            "tasks": [{"head_kind": "regression", "out_dim": 2}, {"head_kind": "regression", "out_dim": 3}],
        },
        "models": {"sharing_levels": [0, 1], "blocks": 2, "widths": 4},
        "training": {"epochs": 2, "lr": 0.05},
        "attacks": {
            "drivers": ["fgsm", "pgd"], "combiners": ["Single(*)", "DGBA"], "epsilons": [0, "4/255"],
            "iterations": {"pgd": 2},
        },
        "diagnose": {"driver": "pgd", "epsilon": "4/255", "kappa_s": 0.5, "kappa_d": 10.0},
        "fat": {"defenses": ["DGBA"], "epsilon": "4/255", "steps": 2, "epochs": 1, "batch_size": None,
                "eval_combiners": ["DGBA"]},
    }
    config.update(overrides)
    return config
