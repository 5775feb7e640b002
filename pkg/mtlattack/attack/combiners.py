# -----------------------------------------------------------------------------
# File: combiners.py
# Description: Gradient combiners map the per-task input gradients and task
#              losses of a multi-task model to one raw attack direction:
#
#                  Single(j)   g_j
#                  Total       sum_i g_i
#                  SignTotal   sum_i sign(g_i)
#                  DGBA        sum_i g_i / L_i
#
#              Drivers apply sign() to the raw direction. sign(0) is 0.
#
# License: MIT
# -----------------------------------------------------------------------------

import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from mtlattack.config.combiner_kinds import CombinerKind
from mtlattack.exceptions.mtlattack_exception import AttackConfigError, LossFloorError

_SINGLE = re.compile(r"^\s*single\s*[\(\-_ ]?\s*(\d+)\s*\)?\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class GradientCombiner:
    """
    Attributes:
        kind (CombinerKind): the combination rule.
        task (int): the designated task of a Single combiner, None otherwise.

    Example usage:
        GradientCombiner.parse("Single(1)")
        GradientCombiner.parse("DGBA")
    """
    kind: CombinerKind
    task: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", CombinerKind(self.kind))
        if self.kind is CombinerKind.SINGLE:
            if not isinstance(self.task, int) or self.task < 0:
                raise AttackConfigError("a Single combiner needs a non-negative task id")
        elif self.task is not None:
            raise AttackConfigError(f"{self.kind.value} does not take a task id")

    def __str__(self):
        return self.label

    @property
    def label(self):
        if self.kind is CombinerKind.SINGLE:
            return f"Single({self.task})"
        return self.kind.value

    @classmethod
    def single(cls, task):
        return cls(CombinerKind.SINGLE, int(task))

    @classmethod
    def total(cls):
        return cls(CombinerKind.TOTAL)

    @classmethod
    def sign_total(cls):
        return cls(CombinerKind.SIGN_TOTAL)

    @classmethod
    def dgba(cls):
        return cls(CombinerKind.DGBA)

    @classmethod
    def parse(cls, text):
        """
        Accepts "Single(j)", "Single-j", "Total", "SignTotal" and "DGBA",
        case-insensitively.

        :raises AttackConfigError: for unknown names.
        """
        if isinstance(text, GradientCombiner):
            return text
        match = _SINGLE.match(str(text))
        if match:
            return cls.single(int(match.group(1)))
        for kind in CombinerKind:
            if kind is not CombinerKind.SINGLE and str(text).strip().lower() == kind.value.lower():
                return cls(kind)
        raise AttackConfigError(
            f"'{text}' is not a valid combiner. Valid options are: Single(j), "
            + ", ".join(k.value for k in CombinerKind if k is not CombinerKind.SINGLE)
        )

    def validate(self, n_tasks):
        """
        :raises AttackConfigError: if a Single task id is not part of the model.
        """
        if self.kind is CombinerKind.SINGLE and self.task >= n_tasks:
            raise AttackConfigError(f"Single({self.task}) designates a task the model does not have ({n_tasks} tasks)")

    def combine(self, grads, losses):
        return combine_gradients(self, grads, losses)

    def attack_objective(self, initial_losses, losses):
        """
        The scalar an attack with this combiner tries to increase: the
        designated task loss, the summed loss, or the relative loss change.
        """
        losses = np.asarray(losses, dtype=np.float64)
        if self.kind is CombinerKind.SINGLE:
            return float(losses[self.task])
        if self.kind is CombinerKind.DGBA:
            initial = np.asarray(initial_losses, dtype=np.float64)
            return float(np.sum((losses - initial) / initial))
        return float(np.sum(losses))


def combine_gradients(combiner: GradientCombiner, grads: Sequence[np.ndarray], losses: Sequence[float]):
    """
    Raw direction of one attack step.

    :param combiner: GradientCombiner
    :param grads: per-task input gradients, all of one shape.
    :param losses: per-task losses.
    :raises AttackConfigError: on no tasks, mismatched lengths or an unknown Single task.
    :raises LossFloorError: for DGBA when any loss is not positive.
    """
    grads = [np.asarray(g, dtype=np.float64) for g in grads]
    losses = np.asarray(losses, dtype=np.float64)
    if not grads:
        raise AttackConfigError("at least one task gradient is required")
    if len(grads) != losses.size:
        raise AttackConfigError(f"{len(grads)} gradients given with {losses.size} losses")
    combiner.validate(len(grads))

    kind = combiner.kind
    if kind is CombinerKind.SINGLE:
        return grads[combiner.task].copy()
    if kind is CombinerKind.TOTAL:
        return np.sum(grads, axis=0)
    if kind is CombinerKind.SIGN_TOTAL:
        return np.sum([np.sign(g) for g in grads], axis=0)

    if np.any(losses <= 0.0):
        raise LossFloorError(f"DGBA needs positive task losses, got {losses.tolist()}")
    return np.sum([g / loss for g, loss in zip(grads, losses)], axis=0)


def signed_direction(combiner, grads, losses):
    """sign() of the combined direction, with sign(0) = 0."""
    return np.sign(combine_gradients(combiner, grads, losses))
