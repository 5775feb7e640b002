# -----------------------------------------------------------------------------
# File: metric_snapshot.py
# Description: This file defines `MetricSnapshot`, the per-task list of
#              (metric name, orientation, value) triples measured on one
#              model/batch pair. Relative metrics compare two snapshots of
#              identical structure.
#
# License: MIT
# -----------------------------------------------------------------------------

import math
from dataclasses import dataclass
from typing import Tuple

from mtlattack.config.orientation import Orientation
from mtlattack.exceptions.mtlattack_exception import MetricError


@dataclass(frozen=True)
class MetricValue:
    """
    One measured metric.

    Attributes:
        name (str): metric name, e.g. "accuracy".
        orientation (Orientation): which direction is an improvement.
        value (float): the measured value.
    """
    name: str
    orientation: Orientation
    value: float

    def __post_init__(self):
        if isinstance(self.orientation, int) and not isinstance(self.orientation, Orientation):
            object.__setattr__(self, "orientation", Orientation(self.orientation))
        elif isinstance(self.orientation, str):
            object.__setattr__(self, "orientation", Orientation[self.orientation])

        value = float(self.value)
        if not math.isfinite(value):
            raise MetricError(f"metric '{self.name}' has a non-finite value")
        object.__setattr__(self, "value", value)


@dataclass(frozen=True)
class MetricSnapshot:
    """
    Metric values for every task of a model, in task-id order.

    Attributes:
        tasks (tuple): one tuple of MetricValue per task.

    Example usage:
        snapshot = MetricSnapshot.from_lists([
            [("accuracy", Orientation.HIGHER_BETTER, 0.9)],
            [("l1_error", Orientation.LOWER_BETTER, 0.2)],
        ])
    """
    tasks: Tuple[Tuple[MetricValue, ...], ...]

    def __post_init__(self):
        tasks = tuple(tuple(metrics) for metrics in self.tasks)
        if not tasks:
            raise MetricError("a snapshot needs at least one task")
        for index, metrics in enumerate(tasks):
            if not metrics:
                raise MetricError(f"task {index} has no metrics")
        object.__setattr__(self, "tasks", tasks)

    @classmethod
    def from_lists(cls, tasks):
        """Build a snapshot from nested (name, orientation, value) triples."""
        return cls(tuple(tuple(MetricValue(*triple) for triple in metrics) for metrics in tasks))

    @property
    def n_tasks(self):
        return len(self.tasks)

    def structure(self):
        """Names and orientations, without values."""
        return tuple(tuple((m.name, m.orientation) for m in metrics) for metrics in self.tasks)

    def values(self, task):
        """Mapping of metric name to value for one task."""
        return {m.name: m.value for m in self.tasks[task]}

    def to_dict(self):
        return {
            "tasks": [
                [{"name": m.name, "orientation": m.orientation.name, "value": m.value} for m in metrics]
                for metrics in self.tasks
            ]
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(tuple(
                tuple(MetricValue(m["name"], Orientation[m["orientation"]], m["value"]) for m in metrics)
                for metrics in data["tasks"]
            ))
        except (KeyError, TypeError) as e:
            raise MetricError(f"malformed metric snapshot: {e}")
