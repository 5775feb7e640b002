# -----------------------------------------------------------------------------
# File: budget.py
# Description: The l-infinity perturbation budget and its projection.
#
# License: MIT
# -----------------------------------------------------------------------------

import math
import re
from dataclasses import dataclass

import numpy as np

from mtlattack.exceptions.mtlattack_exception import AttackConfigError, ShapeMismatchError

_FRACTION = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*/\s*([0-9]*\.?[0-9]+)\s*$")


def parse_epsilon(value) -> float:
    """
    Read a budget given as a number or as "k/255" style text.

    Example usage:
        parse_epsilon("8/255")   # 0.03137...
        parse_epsilon(0.1)       # 0.1

    :raises AttackConfigError: for malformed or negative values.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        epsilon = float(value)
    else:
        text = str(value)
        match = _FRACTION.match(text)
        try:
            if match:
                epsilon = float(match.group(1)) / float(match.group(2))
            else:
                epsilon = float(text)
        except (ValueError, ZeroDivisionError):
            raise AttackConfigError(f"'{value}' is not a valid epsilon")

    if not math.isfinite(epsilon) or epsilon < 0.0:
        raise AttackConfigError(f"epsilon must be finite and non-negative, got {value}")
    return epsilon


@dataclass(frozen=True)
class PerturbationBudget:
    """
    l-infinity ball of radius epsilon around the clean input, intersected
    with the valid input range [low, high].

    Attributes:
        epsilon (float): radius in raw input units.
        low (float): lower bound of every input component.
        high (float): upper bound of every input component.
    """
    epsilon: float
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "epsilon", parse_epsilon(self.epsilon))
        object.__setattr__(self, "low", float(self.low))
        object.__setattr__(self, "high", float(self.high))
        if not self.low < self.high:
            raise AttackConfigError(f"valid range [{self.low}, {self.high}] is degenerate")

    @property
    def norm(self):
        return "linf"

    def to_dict(self):
        return {"epsilon": self.epsilon, "low": self.low, "high": self.high}

    @classmethod
    def from_value(cls, value):
        """Accepts a budget, a mapping or a bare epsilon."""
        if isinstance(value, cls):
            return value
        if isinstance(value, dict):
            return cls(**value)
        return cls(value)


def project(candidate, origin, budget: PerturbationBudget):
    """
    Componentwise clamp of `candidate` to [origin - eps, origin + eps]
    intersected with [low, high]. Idempotent.

    :raises ShapeMismatchError: if the shapes differ.
    """
    candidate = np.asarray(candidate, dtype=np.float64)
    origin = np.asarray(origin, dtype=np.float64)
    if candidate.shape != origin.shape:
        raise ShapeMismatchError("projection", origin.shape, candidate.shape)

    lower = np.maximum(origin - budget.epsilon, budget.low)
    upper = np.minimum(origin + budget.epsilon, budget.high)
    return np.minimum(np.maximum(candidate, lower), upper)


def max_deviation(inputs, origin):
    """||inputs - origin||_inf."""
    difference = np.abs(np.asarray(inputs, dtype=np.float64) - np.asarray(origin, dtype=np.float64))
    return float(np.max(difference, initial=0.0))


def within_budget(inputs, origin, budget: PerturbationBudget, slack=1e-12):
    """True iff inputs lie in the budget ball (up to `slack`) and the valid range."""
    inputs = np.asarray(inputs, dtype=np.float64)
    return (max_deviation(inputs, origin) <= budget.epsilon + slack
            and bool(np.all(inputs >= budget.low)) and bool(np.all(inputs <= budget.high)))
