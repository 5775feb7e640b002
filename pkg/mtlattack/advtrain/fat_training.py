# -----------------------------------------------------------------------------
# File: fat_training.py
# Description: Multi-task adversarial training. For every mini-batch an inner
#              PGD attack with any gradient combiner produces the adversarial
#              batch, then one gradient-descent update is applied on it. An
#              optional friendly early stop ends the inner attack a fixed
#              number of steps after the relative loss change first crosses a
#              threshold.
#
# License: MIT
# -----------------------------------------------------------------------------

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from mtlattack.attack.attack_config import AttackConfig
from mtlattack.attack.drivers import EarlyStop, pgd_attack
from mtlattack.config.attack_drivers import AttackDriver
from mtlattack.exceptions.mtlattack_exception import AttackConfigError, ConfigError, DivergenceError, NonFiniteValueError
from mtlattack.mtlnet.branched_model import BranchedModel
from mtlattack.mtlnet.labeled_batch import LabeledBatch
from mtlattack.mtlnet.trainer import minibatch_order, sgd_step, total_loss


log = logging.getLogger()


@dataclass(frozen=True)
class FatConfig:
    """
    Attributes:
        attack (AttackConfig): inner attack; must use the PGD driver.
        steps (int): K, the maximum number of inner attack steps. 0 trains on
                     clean batches.
        tau (int): extra steps after the early-stop threshold is crossed;
                   defaults to K.
        early_stop_threshold (float): relative loss change that triggers the
                   early stop; None runs plain K-step PGD.
        epochs (int): passes over the training set.
        batch_size (int): mini-batch size; the full set when None.
        lr (float): gradient-descent step size.
        seed (int): seeds the mini-batch order.

    Example usage:
        FatConfig(attack={"driver": "pgd", "combiner": "DGBA", "budget": "8/255"}, steps=20)
    """
    attack: AttackConfig
    steps: int = 20
    tau: Optional[int] = None
    early_stop_threshold: Optional[float] = None
    epochs: int = 10
    batch_size: Optional[int] = None
    lr: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.attack, dict):
            try:
                object.__setattr__(self, "attack", AttackConfig(**self.attack))
            except (AttackConfigError, TypeError) as e:
                raise ConfigError(f"invalid inner attack: {e}")
        if self.tau is None:
            object.__setattr__(self, "tau", self.steps)
        self.is_valid()

    def is_valid(self):
        """
        :raises ConfigError: naming the offending field.
        """
        self._validate_attack()
        self._validate_steps()
        self._validate_schedule()

    def _validate_attack(self):
        if not isinstance(self.attack, AttackConfig):
            raise ConfigError("attack must be an AttackConfig or a mapping of its fields")
        if self.attack.driver is not AttackDriver.PGD:
            raise ConfigError(f"the inner attack must use the PGD driver, got {self.attack.driver.name}")

    def _validate_steps(self):
        if not isinstance(self.steps, int) or self.steps < 0:
            raise ConfigError("steps must be a non-negative integer")
        if self.steps >= 1 and (not isinstance(self.tau, int) or not 1 <= self.tau <= self.steps):
            raise ConfigError(f"tau must lie in [1, {self.steps}], got {self.tau}")
        if self.early_stop_threshold is not None and not math.isfinite(self.early_stop_threshold):
            raise ConfigError("early_stop_threshold must be finite")

    def _validate_schedule(self):
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise ConfigError("epochs must be a positive integer")
        if self.batch_size is not None and (not isinstance(self.batch_size, int) or self.batch_size < 1):
            raise ConfigError("batch_size must be a positive integer")
        if not math.isfinite(self.lr) or self.lr < 0.0:
            raise ConfigError("lr must be finite and non-negative")

    @property
    def inner_attack(self) -> Optional[AttackConfig]:
        """The K-step inner attack, None when K = 0."""
        if self.steps == 0:
            return None
        return self.attack.with_iterations(self.steps)

    @property
    def early_stop(self) -> Optional[EarlyStop]:
        if self.early_stop_threshold is None or self.steps == 0:
            return None
        return EarlyStop(self.early_stop_threshold, self.tau)

    def to_dict(self):
        return {
            "attack": self.attack.to_dict(),
            "steps": self.steps,
            "tau": self.tau,
            "early_stop_threshold": self.early_stop_threshold,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class FatEpoch:
    """
    Attributes:
        epoch (int): 1-based epoch index.
        clean_loss (float): total loss on the clean training set after the epoch.
        adversarial_loss (float): mean total loss of the adversarial mini-batches
                                  before their update.
        mean_inner_steps (float): attack steps used per mini-batch, averaged.
    """
    epoch: int
    clean_loss: float
    adversarial_loss: float
    mean_inner_steps: float


@dataclass(frozen=True)
class FatResult:
    model: BranchedModel
    initial_loss: float
    epochs: Tuple[FatEpoch, ...]

    @property
    def clean_trace(self):
        return tuple(e.clean_loss for e in self.epochs)


def adversarial_batch(model: BranchedModel, batch: LabeledBatch, config: FatConfig):
    """
    The batch the next update trains on, its total loss and the number of
    inner attack steps used.
    """
    inner = config.inner_attack
    if inner is None:
        return batch, total_loss(model, batch), 0

    trace = pgd_attack(model, batch, inner, config.early_stop)
    return batch.with_inputs(trace.adversarial_inputs), float(sum(trace.final_losses)), trace.n_steps


def fat_train(model: BranchedModel, dataset: LabeledBatch, config: FatConfig) -> FatResult:
    """
    Adversarial training: per mini-batch, attack then update once on the
    adversarial batch. Deterministic in config.seed.

    :param model: the model to start from; it is not modified.
    :param dataset: the training batch.
    :param config: FatConfig
    :raises DivergenceError: when the loss becomes non-finite, with its epoch.
    """
    config.attack.combiner.validate(model.n_tasks)
    batch_size = dataset.size if config.batch_size is None else config.batch_size
    rng = np.random.default_rng(config.seed)

    initial = total_loss(model, dataset)
    epochs = []
    log.info(f"adversarial training against {config.attack.label} at eps {config.attack.budget.epsilon:.4g}, "
             f"K={config.steps}, tau={config.tau}")
    for epoch in range(1, config.epochs + 1):
        adversarial_losses, inner_steps = [], []
        for indices in minibatch_order(dataset.size, batch_size, rng):
            batch = dataset if len(indices) == dataset.size else dataset.subset(indices)
            try:
                attacked, loss, steps = adversarial_batch(model, batch, config)
            except NonFiniteValueError as e:
                log.error(f"non-finite value in the inner attack of epoch {epoch}", exc_info=True)
                raise DivergenceError(epoch, e.message)
            adversarial_losses.append(loss)
            inner_steps.append(steps)
            model = sgd_step(model, attacked, config.lr, epoch)

        try:
            clean = total_loss(model, dataset)
        except NonFiniteValueError as e:
            raise DivergenceError(epoch, e.message)

        record = FatEpoch(epoch, clean, float(np.mean(adversarial_losses)), float(np.mean(inner_steps)))
        log.debug(f"epoch {epoch}: clean loss {record.clean_loss:.6g}, adversarial loss "
                  f"{record.adversarial_loss:.6g}, inner steps {record.mean_inner_steps:.3g}")
        epochs.append(record)

    log.info(f"adversarial training finished: clean loss {initial:.6g} -> {epochs[-1].clean_loss:.6g}")
    return FatResult(model=model, initial_loss=initial, epochs=tuple(epochs))
