# -----------------------------------------------------------------------------
# File: relative_metrics.py
# Description: Relative multi-task performance measures: average relative
#              accuracy (ARA), average relative performance drop (ARP), the
#              relative loss change that APGD-DGBA maximises, and the attack
#              transferability ratio. All functions are pure.
#
# License: MIT
# -----------------------------------------------------------------------------

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.stats import spearmanr

from mtlattack.exceptions.mtlattack_exception import MetricError, UndefinedTransferabilityError
from mtlattack.metrics.metric_snapshot import MetricSnapshot


log = logging.getLogger()


@dataclass(frozen=True)
class ArpResult:
    """
    Attributes:
        overall (float): mean of the per-task values, in percent.
        per_task (tuple): ARP of every task, in percent.
    """
    overall: float
    per_task: Tuple[float, ...]


@dataclass(frozen=True)
class TransferabilityReport:
    """
    Attributes:
        attacked_task (int): the task the Single attack designated.
        per_task_arp (tuple): ARP of every task under that attack.
        value (float): mean ARP ratio of the non-attacked tasks, unclamped.
    """
    attacked_task: int
    per_task_arp: Tuple[float, ...]
    value: float

    @property
    def clamped(self):
        """The value clipped to [0, 1] for summary views."""
        return clamp_unit(self.value)


def ara(model_accuracies: Sequence[float], baseline_accuracies: Sequence[float]) -> float:
    """
    Average relative accuracy difference of a model against a baseline,
    (1/N) * sum((acc_m - acc_b) / acc_b).

    :raises MetricError: on mismatched task counts or a zero baseline accuracy.
    """
    model = np.asarray(model_accuracies, dtype=np.float64)
    baseline = np.asarray(baseline_accuracies, dtype=np.float64)
    if model.shape != baseline.shape or model.ndim != 1 or model.size == 0:
        raise MetricError(f"accuracy lists differ in length: {model.size} vs {baseline.size}")
    if np.any(baseline == 0.0):
        raise MetricError("baseline accuracy must be nonzero for every task")
    return float(np.mean((model - baseline) / baseline))


def arp(before: MetricSnapshot, after: MetricSnapshot) -> ArpResult:
    """
    Average relative performance drop, in percent. For every metric the
    relative change (m' - m) / m is signed by its orientation, so a drop in a
    higher-better metric and a rise in a lower-better metric both count as
    positive degradation. Metrics are averaged within a task, tasks are
    averaged into the overall value.

    :param before: snapshot of the clean model / batch.
    :param after: snapshot after the attack, same structure.
    :raises MetricError: if the structures differ or a before-value is zero.
    """
    if before.structure() != after.structure():
        raise MetricError("snapshots do not have the same tasks, metric names and orientations")

    per_task = []
    for task, (metrics_before, metrics_after) in enumerate(zip(before.tasks, after.tasks)):
        total = 0.0
        for m, m_after in zip(metrics_before, metrics_after):
            if m.value == 0.0:
                raise MetricError(f"metric '{m.name}' of task {task} has a zero before-value")
            total += m.orientation.sign * (m_after.value - m.value) / m.value
        per_task.append(100.0 * total / len(metrics_before))

    return ArpResult(overall=float(np.mean(per_task)), per_task=tuple(per_task))


def relative_loss_change(initial_losses: Sequence[float], losses: Sequence[float], mean=False) -> float:
    """
    Sum over tasks of (L_i - l_i) / l_i. With `mean=True` the sum is divided
    by the number of tasks, the form used in reports.

    :raises MetricError: if any initial loss is not positive.
    """
    initial = np.asarray(initial_losses, dtype=np.float64)
    current = np.asarray(losses, dtype=np.float64)
    if initial.shape != current.shape:
        raise MetricError(f"loss lists differ in length: {initial.size} vs {current.size}")
    if np.any(initial <= 0.0):
        raise MetricError("initial losses must be positive")

    total = float(np.sum((current - initial) / initial))
    return total / initial.size if mean else total


def transferability(per_task_arp: Sequence[float], attacked_task: int) -> TransferabilityReport:
    """
    Mean ratio ARP_j / ARP_x over the n - 1 tasks j that the Single(x) attack
    did not target.

    :raises UndefinedTransferabilityError: if ARP_x is not positive.
    :raises MetricError: with fewer than two tasks or an unknown task.
    """
    values = tuple(float(v) for v in per_task_arp)
    if len(values) < 2:
        raise MetricError("transferability needs at least two tasks")
    if not 0 <= attacked_task < len(values):
        raise MetricError(f"task {attacked_task} is not one of {len(values)} tasks")

    attacked = values[attacked_task]
    if not attacked > 0.0:
        raise UndefinedTransferabilityError(
            f"attack on task {attacked_task} did not degrade it (ARP {attacked:.4g}); transferability is undefined"
        )

    others = [v for j, v in enumerate(values) if j != attacked_task]
    value = sum(v / attacked for v in others) / len(others)
    return TransferabilityReport(attacked_task=attacked_task, per_task_arp=values, value=value)


def clamp_unit(value: float) -> float:
    return min(max(float(value), 0.0), 1.0)


def rank_correlation(levels: Sequence[float], values: Sequence[float]) -> Optional[float]:
    """
    Spearman rank correlation of `values` against `levels`. Returns None when
    the correlation is undefined (fewer than two distinct levels or constant
    values).
    """
    x = np.asarray(levels, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if x.size != y.size:
        raise MetricError("rank correlation needs paired sequences")
    if x.size < 2 or np.unique(x).size < 2 or np.unique(y).size < 2:
        log.warning("rank correlation is undefined for a single level or constant values")
        return None

    rho, _ = spearmanr(x, y)
    if rho is None or not math.isfinite(float(rho)):
        return None
    return float(rho)
