# -----------------------------------------------------------------------------
# File: diagnostics.py
# Description: Measurements of the two assumptions naive multi-task attacks
#              rely on: task gradients of comparable magnitude (dominance
#              ratio) and aligned single-task perturbations (alignment
#              cosine), plus the first-order prediction of the relative loss
#              change of one signed step.
#
# License: MIT
# -----------------------------------------------------------------------------

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from mtlattack.exceptions.mtlattack_exception import AttackConfigError


log = logging.getLogger()


def gradient_dominance_ratio(grads: Sequence[np.ndarray]) -> float:
    """
    max over task pairs of ||g_a|| / ||g_b||, i.e. the largest norm over the
    smallest. Returns math.inf when any gradient is zero.

    :raises AttackConfigError: with fewer than two gradients.
    """
    if len(grads) < 2:
        raise AttackConfigError("the dominance ratio needs at least two task gradients")

    norms = [float(np.linalg.norm(np.asarray(g, dtype=np.float64).ravel())) for g in grads]
    smallest = min(norms)
    if smallest == 0.0:
        return math.inf
    return max(norms) / smallest


def perturbation_cosine(a, b) -> Optional[float]:
    """
    Cosine between two perturbations, flattened. None when either is zero.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        return None
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


@dataclass(frozen=True)
class AlignmentResult:
    """
    Attributes:
        task_a (int), task_b (int): the two designated tasks.
        cosine (float): cosine of the two final perturbations; None if undefined.
    """
    task_a: int
    task_b: int
    cosine: Optional[float]

    @property
    def defined(self):
        return self.cosine is not None

    def exceeds(self, kappa):
        """True/False against a report threshold; None when undefined."""
        return None if self.cosine is None else self.cosine >= kappa


def perturbation_alignment(model, batch, budget, driver, task_a: int, task_b: int, **options) -> AlignmentResult:
    """
    Run Single(a) and Single(b) with the same driver, budget and seed and
    measure the cosine between the two final perturbations.

    :param options: extra AttackConfig fields (n_iter, step_size, seed, ...).
    :raises AttackConfigError: if a == b or a task does not exist.
    """
    from mtlattack.attack.attack_config import AttackConfig
    from mtlattack.attack.drivers import run_attack

    if task_a == task_b:
        raise AttackConfigError("alignment needs two different tasks")

    deltas = []
    for task in (task_a, task_b):
        config = AttackConfig(driver=driver, combiner=f"Single({task})", budget=budget, **options)
        trace = run_attack(model, batch, config)
        deltas.append(trace.adversarial_inputs - batch.inputs)

    cosine = perturbation_cosine(*deltas)
    if cosine is None:
        log.warning(f"alignment of tasks {task_a} and {task_b} is undefined: a perturbation is zero")
    return AlignmentResult(task_a, task_b, cosine)


def first_order_prediction(grads: Sequence[np.ndarray], losses: Sequence[float], direction, step_size) -> float:
    """
    Taylor prediction of sum_i (L_i(x + eta * beta) - L_i) / L_i, which is
    eta * sum_i beta . g_i / L_i.
    """
    direction = np.asarray(direction, dtype=np.float64)
    return float(step_size * sum(np.sum(direction * np.asarray(g)) / loss for g, loss in zip(grads, losses)))
