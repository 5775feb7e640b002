# -----------------------------------------------------------------------------
# File: attack_trace.py
# Description: Per-step record of an attack run and its JSON form. Step 0 is
#              the starting point; step k the k-th iterate.
#
# License: MIT
# -----------------------------------------------------------------------------

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from mtlattack.lib.json_envelope import array_from_dict, array_to_dict


def _encode_float(value):
    if value is None:
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(value)


def _decode_float(value):
    if value is None:
        return None
    return float(value)


@dataclass(frozen=True)
class TraceStep:
    """
    Attributes:
        step (int): iterate index, 0 for the starting point.
        losses (tuple): per-task floored losses at the iterate.
        objective (float): sum_i (L_i - l_i) / l_i.
        report_objective (float): the same divided by the number of tasks.
        attack_objective (float): what the combiner maximises at the iterate.
        best_objective (float): best attack objective so far (l_max).
        step_size (float): eta used to reach the iterate.
        dominance_ratio (float): max/min task-gradient norm at the iterate;
                                 None with a single task, inf if a gradient is zero.
        max_deviation (float): ||x_k - x||_inf.
        in_range (bool): x_k within the valid input range.
    """
    step: int
    losses: Tuple[float, ...]
    objective: float
    report_objective: float
    attack_objective: float
    best_objective: float
    step_size: float
    dominance_ratio: Optional[float]
    max_deviation: float
    in_range: bool

    def to_dict(self):
        return {
            "step": self.step,
            "losses": list(self.losses),
            "objective": self.objective,
            "report_objective": self.report_objective,
            "attack_objective": self.attack_objective,
            "best_objective": self.best_objective,
            "step_size": self.step_size,
            "dominance_ratio": _encode_float(self.dominance_ratio),
            "max_deviation": self.max_deviation,
            "in_range": self.in_range,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            step=int(data["step"]), losses=tuple(float(v) for v in data["losses"]),
            objective=float(data["objective"]), report_objective=float(data["report_objective"]),
            attack_objective=float(data["attack_objective"]), best_objective=float(data["best_objective"]),
            step_size=float(data["step_size"]), dominance_ratio=_decode_float(data["dominance_ratio"]),
            max_deviation=float(data["max_deviation"]), in_range=bool(data["in_range"]),
        )


@dataclass
class AttackTrace:
    """
    Attributes:
        label (str): attack label, e.g. "APGD-DGBA".
        epsilon (float): budget radius.
        initial_losses (tuple): l_i, the floored clean losses.
        steps (list): TraceStep per recorded iterate.
        adversarial_inputs (numpy.ndarray): the returned batch; the best
            iterate for APGD, the last iterate for FGSM and PGD.
        best_inputs (numpy.ndarray): the iterate with the best attack objective.
    """
    label: str
    epsilon: float
    initial_losses: Tuple[float, ...]
    steps: List[TraceStep] = field(default_factory=list)
    adversarial_inputs: Optional[np.ndarray] = None
    best_inputs: Optional[np.ndarray] = None

    @property
    def n_steps(self):
        """Number of iterates after the starting point."""
        return max(len(self.steps) - 1, 0)

    @property
    def best_objective(self):
        return self.steps[-1].best_objective if self.steps else 0.0

    @property
    def final_losses(self):
        return self.steps[-1].losses if self.steps else self.initial_losses

    def objectives(self):
        return [s.objective for s in self.steps]

    def summary(self):
        """Compact dict for run records."""
        last = self.steps[-1] if self.steps else None
        return {
            "label": self.label,
            "epsilon": self.epsilon,
            "steps": self.n_steps,
            "initial_losses": list(self.initial_losses),
            "final_losses": list(self.final_losses),
            "final_objective": last.objective if last else 0.0,
            "best_objective": self.best_objective,
            "max_deviation": max((s.max_deviation for s in self.steps), default=0.0),
            "in_range": all(s.in_range for s in self.steps),
        }

    def to_dict(self, include_inputs=False):
        data = {
            "label": self.label,
            "epsilon": self.epsilon,
            "initial_losses": list(self.initial_losses),
            "steps": [s.to_dict() for s in self.steps],
        }
        if include_inputs and self.adversarial_inputs is not None:
            data["adversarial_inputs"] = array_to_dict(self.adversarial_inputs)
        return data

    @classmethod
    def from_dict(cls, data):
        inputs = data.get("adversarial_inputs")
        return cls(
            label=data["label"], epsilon=float(data["epsilon"]),
            initial_losses=tuple(float(v) for v in data["initial_losses"]),
            steps=[TraceStep.from_dict(s) for s in data["steps"]],
            adversarial_inputs=array_from_dict(inputs) if inputs is not None else None,
        )
