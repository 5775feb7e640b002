# -----------------------------------------------------------------------------
# File: drivers.py
# Description: FGSM, PGD and APGD drivers. Each driver turns the combined
#              task gradients into signed steps, projects every iterate onto
#              the budget, and records an AttackTrace.
#
#              Losses are batch means; perturbations are per example.
#
# License: MIT
# -----------------------------------------------------------------------------

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from mtlattack.attack.attack_config import AttackConfig
from mtlattack.attack.attack_trace import AttackTrace, TraceStep
from mtlattack.attack.budget import PerturbationBudget, max_deviation, project
from mtlattack.attack.combiners import signed_direction
from mtlattack.attack.diagnostics import gradient_dominance_ratio
from mtlattack.config.attack_drivers import AttackDriver
from mtlattack.exceptions.mtlattack_exception import AttackConfigError
from mtlattack.metrics.relative_metrics import relative_loss_change
from mtlattack.mtlnet.branched_model import BranchedModel, losses_and_input_gradients
from mtlattack.mtlnet.labeled_batch import LabeledBatch


log = logging.getLogger()

# fraction of objective-increasing steps below which APGD halves its step
SUCCESS_FRACTION = 0.75


@dataclass(frozen=True)
class EarlyStop:
    """
    Stop a PGD run `extra_steps` iterations after the relative loss change
    first exceeds `threshold`.
    """
    threshold: float
    extra_steps: int

    def __post_init__(self):
        if self.extra_steps < 0:
            raise AttackConfigError("early-stop extra_steps must be non-negative")


class _TraceRecorder:
    """Builds the trace and keeps the best iterate seen so far."""

    def __init__(self, config: AttackConfig, origin, initial_losses):
        self.config = config
        self.origin = origin
        self.initial = np.asarray(initial_losses, dtype=np.float64)
        self.trace = AttackTrace(label=config.label, epsilon=config.budget.epsilon,
                                 initial_losses=tuple(float(v) for v in self.initial))
        self.best_objective = None
        self.best_inputs = None
        self.best_losses = None
        self.best_grads = None

    @property
    def last(self) -> TraceStep:
        return self.trace.steps[-1]

    def record(self, step, inputs, losses, grads, step_size):
        combiner, budget = self.config.combiner, self.config.budget
        objective = relative_loss_change(self.initial, losses)
        attack_objective = combiner.attack_objective(self.initial, losses)
        if self.best_objective is None or attack_objective > self.best_objective:
            self.best_objective = attack_objective
            self.best_inputs, self.best_losses, self.best_grads = inputs, losses, grads

        self.trace.steps.append(TraceStep(
            step=step,
            losses=tuple(float(v) for v in losses),
            objective=objective,
            report_objective=objective / self.initial.size,
            attack_objective=attack_objective,
            best_objective=self.best_objective,
            step_size=float(step_size),
            dominance_ratio=gradient_dominance_ratio(grads) if len(grads) > 1 else None,
            max_deviation=max_deviation(inputs, self.origin),
            in_range=bool(np.all(inputs >= budget.low) and np.all(inputs <= budget.high)),
        ))
        log.debug(f"{self.config.label} step {step}: objective {objective:.6g}, best {self.best_objective:.6g}")

    def finish(self, adversarial_inputs):
        self.trace.adversarial_inputs = np.array(adversarial_inputs)
        self.trace.best_inputs = np.array(self.best_inputs)
        return self.trace


def _losses_at(model, batch, inputs):
    return losses_and_input_gradients(model, batch.with_inputs(inputs))


def _prepare(model: BranchedModel, config: AttackConfig, expected: AttackDriver):
    if config.driver is not expected:
        raise AttackConfigError(f"{expected.name} driver called with a {config.driver.name} configuration")
    config.combiner.validate(model.n_tasks)


def _signed_iterations(model, batch, config, n_iter, step_size, random_start, early_stop=None):
    origin = batch.inputs
    budget = config.budget
    clean_losses, clean_grads = _losses_at(model, batch, origin)

    if random_start and budget.epsilon > 0.0:
        rng = np.random.default_rng(config.seed)
        x = project(origin + rng.uniform(-budget.epsilon, budget.epsilon, size=origin.shape), origin, budget)
        losses, grads = _losses_at(model, batch, x)
    else:
        x, losses, grads = origin, clean_losses, clean_grads

    recorder = _TraceRecorder(config, origin, clean_losses)
    recorder.record(0, x, losses, grads, 0.0)

    crossed_at = None
    for k in range(1, n_iter + 1):
        direction = signed_direction(config.combiner, grads, losses)
        x = project(x + step_size * direction, origin, budget)
        losses, grads = _losses_at(model, batch, x)
        recorder.record(k, x, losses, grads, step_size)

        if early_stop is not None:
            if crossed_at is None and recorder.last.objective > early_stop.threshold:
                crossed_at = k
            if crossed_at is not None and k >= crossed_at + early_stop.extra_steps:
                log.debug(f"{config.label}: early stop at step {k} (threshold crossed at {crossed_at})")
                break

    return recorder.finish(x)


def fgsm_attack(model: BranchedModel, batch: LabeledBatch, config: AttackConfig) -> AttackTrace:
    """
    x_adv = project(x + eps * sign(direction)).

    :raises AttackConfigError: if the configuration is not an FGSM one.
    """
    _prepare(model, config, AttackDriver.FGSM)
    return _signed_iterations(model, batch, config, 1, config.budget.epsilon, False)


def pgd_attack(model: BranchedModel, batch: LabeledBatch, config: AttackConfig,
               early_stop: Optional[EarlyStop] = None) -> AttackTrace:
    """
    Iterated signed steps x_k = project(x_{k-1} + eta * sign(direction)),
    with an optional uniform random start inside the budget. Returns the
    last iterate.

    :param early_stop: stop some steps after the relative loss change
                       crosses a threshold.
    :raises AttackConfigError: if the configuration is not a PGD one.
    """
    _prepare(model, config, AttackDriver.PGD)
    return _signed_iterations(model, batch, config, config.n_iter, config.step_size, config.random_start, early_stop)


def apgd_momentum_step(current, previous, projected_step, alpha, origin, budget: PerturbationBudget):
    """
    x_{k+1} = P(x_k + alpha (z_{k+1} - x_k) + (1 - alpha)(x_k - x_{k-1})).
    With alpha = 1 the result is the projected step z_{k+1} itself.
    """
    candidate = current + alpha * (projected_step - current) + (1.0 - alpha) * (current - previous)
    return project(candidate, origin, budget)


def checkpoint_halves_step(successes, window, reduced_at_last_checkpoint, best_objective, best_at_last_checkpoint):
    """Whether an APGD checkpoint halves the step size; the two conditions of apgd_attack."""
    oscillating = successes < SUCCESS_FRACTION * window
    stalled = not reduced_at_last_checkpoint and best_objective <= best_at_last_checkpoint
    return oscillating or stalled


def apgd_attack(model: BranchedModel, batch: LabeledBatch, config: AttackConfig) -> AttackTrace:
    """
    APGD with the configured combiner. The initial losses are captured once;
    the step size halves and the iterate resets to the best point at every
    checkpoint where

        1. fewer than 75% of the steps since the previous checkpoint
           increased the attack objective, or
        2. the step size was not halved at the previous checkpoint and the
           best objective has not improved since then.

    Returns the best iterate.

    :raises AttackConfigError: if the configuration is not an APGD one.
    """
    _prepare(model, config, AttackDriver.APGD)
    origin, budget, alpha = batch.inputs, config.budget, config.alpha
    checkpoints = set(config.checkpoints)
    eta = config.step_size

    losses, grads = _losses_at(model, batch, origin)
    recorder = _TraceRecorder(config, origin, losses)
    recorder.record(0, origin, losses, grads, 0.0)
    previous_objective = recorder.last.attack_objective

    previous = origin
    current = project(origin + eta * signed_direction(config.combiner, grads, losses), origin, budget)
    losses, grads = _losses_at(model, batch, current)
    recorder.record(1, current, losses, grads, eta)
    current_objective = recorder.last.attack_objective

    # success[j] is True when the step x_j -> x_{j+1} increased the objective
    success = {0: current_objective > previous_objective}
    last_checkpoint = 0
    reduced_at_last_checkpoint = False
    best_at_last_checkpoint = recorder.best_objective

    for k in range(1, config.n_iter):
        z = project(current + eta * signed_direction(config.combiner, grads, losses), origin, budget)
        following = apgd_momentum_step(current, previous, z, alpha, origin, budget)
        losses, grads = _losses_at(model, batch, following)
        recorder.record(k + 1, following, losses, grads, eta)

        following_objective = recorder.last.attack_objective
        success[k] = following_objective > current_objective
        previous, current, current_objective = current, following, following_objective

        if k in checkpoints:
            window = k - last_checkpoint
            successes = sum(success[j] for j in range(last_checkpoint + 1, k + 1))
            reduce = checkpoint_halves_step(successes, window, reduced_at_last_checkpoint,
                                            recorder.best_objective, best_at_last_checkpoint)
            if reduce:
                eta /= 2.0
                current = recorder.best_inputs
                losses, grads = recorder.best_losses, recorder.best_grads
                current_objective = recorder.best_objective
                log.debug(f"{config.label}: checkpoint {k}, step size halved to {eta:.3g}, reset to best iterate")
            reduced_at_last_checkpoint = reduce
            best_at_last_checkpoint = recorder.best_objective
            last_checkpoint = k

    return recorder.finish(recorder.best_inputs)


def run_attack(model: BranchedModel, batch: LabeledBatch, config: AttackConfig,
               early_stop: Optional[EarlyStop] = None) -> AttackTrace:
    """Dispatch on the configured driver."""
    if config.driver is AttackDriver.FGSM:
        return fgsm_attack(model, batch, config)
    if config.driver is AttackDriver.PGD:
        return pgd_attack(model, batch, config, early_stop)
    return apgd_attack(model, batch, config)
