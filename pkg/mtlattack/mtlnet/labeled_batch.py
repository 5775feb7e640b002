# -----------------------------------------------------------------------------
# File: labeled_batch.py
# Description: This file defines `LabeledBatch`, a batch of inputs in
#              [0, 1]^d together with one label array per task. Arrays are
#              stored read-only so batches can be shared between workers.
#
# License: MIT
# -----------------------------------------------------------------------------

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from mtlattack.config.head_kinds import HeadKind
from mtlattack.exceptions.mtlattack_exception import DatasetError
from mtlattack.lib.json_envelope import array_from_dict, array_to_dict

UNIT_NORM_TOLERANCE = 1e-9


def _frozen(array):
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LabeledBatch:
    """
    Attributes:
        inputs (numpy.ndarray): (batch, d) values in [0, 1].
        labels (tuple): per task, class indices (batch,) or targets (batch, m).

    Example usage:
        batch = LabeledBatch(np.zeros((2, 4)), (np.array([0, 1]),))
        batch.size   # 2
    """
    inputs: np.ndarray
    labels: Tuple[np.ndarray, ...]

    def __post_init__(self):
        inputs = _frozen(self.inputs)
        labels = tuple(_frozen(label) for label in self.labels)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)
        self.is_valid()

    def is_valid(self):
        """
        :raises DatasetError: on shape mismatches, inputs outside [0, 1] or
                              non-finite values.
        """
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1 or self.inputs.shape[1] < 1:
            raise DatasetError(f"inputs must have shape (batch, d), got {self.inputs.shape}")
        if not np.all(np.isfinite(self.inputs)):
            raise DatasetError("inputs must be finite")
        if np.any(self.inputs < 0.0) or np.any(self.inputs > 1.0):
            raise DatasetError("inputs must lie in [0, 1]")
        for task, label in enumerate(self.labels):
            if label.shape[:1] != (self.size,):
                raise DatasetError(f"labels of task {task} hold {label.shape[:1]} rows for a batch of {self.size}")
            if not np.all(np.isfinite(label)):
                raise DatasetError(f"labels of task {task} must be finite")

    @property
    def size(self):
        return int(self.inputs.shape[0])

    @property
    def input_dim(self):
        return int(self.inputs.shape[1])

    @property
    def n_tasks(self):
        return len(self.labels)

    def check_unit_labels(self, task_specs):
        """
        :raises DatasetError: if a unit-vector label is not of unit norm.
        """
        for spec, label in zip(task_specs, self.labels):
            if spec.head_kind is HeadKind.UNIT_VECTOR:
                norms = np.linalg.norm(label, axis=1)
                if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE):
                    raise DatasetError(f"unit-vector labels of task {spec.task_id} are not normalised")

    def with_inputs(self, inputs):
        """Same labels, new inputs (e.g. an adversarial batch)."""
        return LabeledBatch(inputs, self.labels)

    def subset(self, indices: Sequence[int]):
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledBatch(self.inputs[indices], tuple(label[indices] for label in self.labels))

    def to_dict(self):
        return {"inputs": array_to_dict(self.inputs), "labels": [array_to_dict(label) for label in self.labels]}

    @classmethod
    def from_dict(cls, data):
        return cls(array_from_dict(data["inputs"]), tuple(array_from_dict(label) for label in data["labels"]))
