# -----------------------------------------------------------------------------
# File: trainer.py
# Description: Plain mini-batch gradient descent on the uniformly weighted
#              sum of task losses. Training works on a functional copy of the
#              model and returns a new model plus the per-epoch loss trace.
#
# License: MIT
# -----------------------------------------------------------------------------

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from mtlattack.exceptions.mtlattack_exception import DivergenceError, NonFiniteValueError
from mtlattack.mtlnet.branched_model import BranchedModel, parameter_gradients, task_losses
from mtlattack.mtlnet.labeled_batch import LabeledBatch


log = logging.getLogger()

# relative rise of the epoch loss above which a warning is logged
TRANSIENT_INCREASE = 0.05


@dataclass(frozen=True)
class TrainingResult:
    """
    Attributes:
        model (BranchedModel): the trained model.
        initial_loss (float): total training loss before the first update.
        loss_trace (tuple): total training loss after every epoch.
    """
    model: BranchedModel
    initial_loss: float
    loss_trace: Tuple[float, ...]


def total_loss(model: BranchedModel, batch: LabeledBatch) -> float:
    return float(np.sum(task_losses(model, batch)))


def minibatch_order(size, batch_size, rng):
    """Index arrays of one shuffled epoch."""
    order = rng.permutation(size)
    return [order[start:start + batch_size] for start in range(0, size, batch_size)]


def sgd_step(model: BranchedModel, batch: LabeledBatch, lr: float, epoch: int) -> BranchedModel:
    """
    One gradient-descent update on `batch`.

    :raises DivergenceError: if the loss or an updated parameter is not finite.
    """
    try:
        _, grads = parameter_gradients(model, batch)
        updated = {name: model.params[name] - lr * grads[name] for name in model.params}
    except NonFiniteValueError as e:
        log.error(f"non-finite value during epoch {epoch}", exc_info=True)
        raise DivergenceError(epoch, e.message)

    for name, value in updated.items():
        if not np.all(np.isfinite(value)):
            raise DivergenceError(epoch, f"parameter '{name}' became non-finite")
    return model.with_params(updated)


def train(model: BranchedModel, dataset: LabeledBatch, epochs: int, lr: float, seed: int,
          batch_size: Optional[int] = None) -> TrainingResult:
    """
    Train with plain gradient descent.

    :param model: the model to start from; it is not modified.
    :param dataset: the training batch.
    :param epochs: number of passes, positive.
    :param lr: step size, non-negative.
    :param seed: seeds the mini-batch shuffling.
    :param batch_size: mini-batch size; the full set when None.
    :raises ValueError: on non-positive epochs, negative lr or batch size.
    :raises DivergenceError: when the loss becomes non-finite, with its epoch.
    """
    if not isinstance(epochs, int) or epochs < 1:
        raise ValueError("epochs must be a positive integer")
    if lr < 0 or not math.isfinite(lr):
        raise ValueError("lr must be a finite non-negative number")
    batch_size = dataset.size if batch_size is None else int(batch_size)
    if batch_size < 1:
        raise ValueError("batch_size must be positive")

    rng = np.random.default_rng(seed)
    initial = total_loss(model, dataset)
    trace = []
    previous = initial
    for epoch in range(1, epochs + 1):
        for indices in minibatch_order(dataset.size, batch_size, rng):
            batch = dataset if len(indices) == dataset.size else dataset.subset(indices)
            model = sgd_step(model, batch, lr, epoch)

        try:
            loss = total_loss(model, dataset)
        except NonFiniteValueError as e:
            raise DivergenceError(epoch, e.message)

        if loss > previous * (1.0 + TRANSIENT_INCREASE):
            log.warning(f"epoch {epoch}: training loss rose from {previous:.6g} to {loss:.6g}")
        log.debug(f"epoch {epoch}: training loss {loss:.6g}")
        trace.append(loss)
        previous = loss

    log.info(f"trained {epochs} epoch(s): loss {initial:.6g} -> {trace[-1]:.6g}")
    return TrainingResult(model=model, initial_loss=initial, loss_trace=tuple(trace))
