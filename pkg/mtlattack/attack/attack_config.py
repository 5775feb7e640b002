# -----------------------------------------------------------------------------
# File: attack_config.py
# Description: This file defines `AttackConfig`, the driver x combiner x
#              budget description of one attack, and the default APGD
#              checkpoint schedule. Like the other configuration objects of
#              the package it accepts plain values for its nested members and
#              normalises and validates them right after construction.
#
# License: MIT
# -----------------------------------------------------------------------------

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from mtlattack.attack.budget import PerturbationBudget
from mtlattack.attack.combiners import GradientCombiner
from mtlattack.config.attack_drivers import AttackDriver
from mtlattack.exceptions.mtlattack_exception import AttackConfigError

DEFAULT_ITERATIONS = {AttackDriver.FGSM: 1, AttackDriver.PGD: 20, AttackDriver.APGD: 20}
DEFAULT_ALPHA = 0.75


def apgd_checkpoints(n_iter: int) -> Tuple[int, ...]:
    """
    Default checkpoint schedule W: fractions p_0 = 0, p_1 = 0.22,
    p_{j+1} = p_j + max(p_j - p_{j-1} - 0.03, 0.06), scaled by n_iter and
    rounded up, keeping the strictly increasing values inside [1, n_iter).

    Example usage:
        apgd_checkpoints(100)   # (22, 41, 57, 70, 80, 87, 93, 99)
    """
    fractions = [0.0, 0.22]
    while fractions[-1] < 1.0:
        fractions.append(fractions[-1] + max(fractions[-1] - fractions[-2] - 0.03, 0.06))

    checkpoints = []
    for p in fractions:
        # rounding first keeps float noise in p from bumping exact products
        k = math.ceil(round(p * n_iter, 9))
        if 1 <= k < n_iter and (not checkpoints or k > checkpoints[-1]):
            checkpoints.append(k)
    return tuple(checkpoints)


@dataclass(frozen=True)
class AttackConfig:
    """
    Attributes:
        driver (AttackDriver): FGSM, PGD or APGD.
        combiner (GradientCombiner): direction rule.
        budget (PerturbationBudget): epsilon ball and valid range.
        n_iter (int): number of steps; FGSM uses exactly one.
        step_size (float): eta (PGD) or the initial eta (APGD); defaults to
                           epsilon (FGSM), epsilon / 4 (PGD), 2 * epsilon (APGD).
        alpha (float): APGD momentum weight in (0, 1].
        checkpoints (tuple): APGD checkpoint schedule W.
        random_start (bool): PGD uniform start inside the epsilon ball.
        seed (int): seeds the random start.

    Example usage:
        AttackConfig(driver="pgd", combiner="DGBA", budget=4 / 255)
    """
    driver: AttackDriver
    combiner: GradientCombiner
    budget: PerturbationBudget
    n_iter: Optional[int] = None
    step_size: Optional[float] = None
    alpha: float = DEFAULT_ALPHA
    checkpoints: Optional[Tuple[int, ...]] = None
    random_start: bool = False
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "driver", AttackDriver.parse(self.driver))
        except ValueError as e:
            raise AttackConfigError(str(e))
        object.__setattr__(self, "combiner", GradientCombiner.parse(self.combiner))
        object.__setattr__(self, "budget", PerturbationBudget.from_value(self.budget))

        if self.n_iter is None:
            object.__setattr__(self, "n_iter", DEFAULT_ITERATIONS[self.driver])
        if self.step_size is None:
            object.__setattr__(self, "step_size", self._default_step_size())
        if self.checkpoints is None:
            object.__setattr__(self, "checkpoints", apgd_checkpoints(self.n_iter) if self.n_iter >= 1 else ())
        else:
            object.__setattr__(self, "checkpoints", tuple(int(k) for k in self.checkpoints))
        self.is_valid()

    def _default_step_size(self):
        epsilon = self.budget.epsilon
        if self.driver is AttackDriver.PGD:
            return epsilon / 4.0
        if self.driver is AttackDriver.APGD:
            return 2.0 * epsilon
        return epsilon

    def is_valid(self):
        """
        :raises AttackConfigError: naming the offending field.
        """
        self._validate_iterations()
        self._validate_step()
        self._validate_apgd()

    def _validate_iterations(self):
        if not isinstance(self.n_iter, int) or self.n_iter < 1:
            raise AttackConfigError("n_iter must be a positive integer")
        if self.driver is AttackDriver.FGSM and self.n_iter != 1:
            raise AttackConfigError("FGSM takes exactly one step (n_iter == 1)")

    def _validate_step(self):
        if not math.isfinite(self.step_size) or self.step_size < 0.0:
            raise AttackConfigError("step_size must be finite and non-negative")
        if not isinstance(self.random_start, bool):
            raise AttackConfigError("random_start must be a boolean value")

    def _validate_apgd(self):
        if self.driver is not AttackDriver.APGD:
            return
        if not 0.0 < self.alpha <= 1.0:
            raise AttackConfigError(f"APGD momentum alpha must lie in (0, 1], got {self.alpha}")
        previous = 0
        for k in self.checkpoints:
            if not 1 <= k < self.n_iter or k <= previous:
                raise AttackConfigError(
                    f"checkpoints must be strictly increasing within [1, {self.n_iter}), got {list(self.checkpoints)}"
                )
            previous = k

    @property
    def label(self):
        """"PGD-DGBA" style name of the attack."""
        return f"{self.driver.name}-{self.combiner.label}"

    def with_combiner(self, combiner):
        return replace(self, combiner=GradientCombiner.parse(combiner))

    def with_iterations(self, n_iter):
        """Same attack with another step count and its default checkpoints."""
        return replace(self, n_iter=n_iter, checkpoints=None)

    def to_dict(self):
        return {
            "driver": self.driver.value,
            "combiner": self.combiner.label,
            "budget": self.budget.to_dict(),
            "n_iter": self.n_iter,
            "step_size": self.step_size,
            "alpha": self.alpha,
            "checkpoints": list(self.checkpoints),
            "random_start": self.random_start,
            "seed": self.seed,
        }
