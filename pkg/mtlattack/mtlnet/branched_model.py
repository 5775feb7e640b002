# -----------------------------------------------------------------------------
# File: branched_model.py
# Description: This file defines `BranchedModel`, a tree-structured
#              multi-task network: one affine+ReLU block per task set per
#              depth of its layout, followed by one affine head per task.
#              Tasks in the same set at a depth route through the same block
#              instance. The model is immutable; it compiles itself into a
#              diffcore computation record per batch size, from which task
#              losses, input gradients and parameter gradients are read.
#
#              Parameter names:
#                  block.<depth>.<set index>.weight / .bias   (depth 1-based)
#                  head.<task>.weight / .bias
#
# License: MIT
# -----------------------------------------------------------------------------

import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Mapping, Sequence, Tuple, Union

import numpy as np

from mtlattack.config.head_kinds import HeadKind
from mtlattack.diffcore.computation_record import ComputationRecord, RecordBuilder, evaluate
from mtlattack.diffcore.tensor import Tensor
from mtlattack.exceptions.mtlattack_exception import CheckpointError, LayoutError, ShapeMismatchError
from mtlattack.lib.json_envelope import JsonEnvelope, array_from_dict, array_to_dict
from mtlattack.metrics.metric_snapshot import MetricSnapshot
from mtlattack.mtlnet.labeled_batch import LabeledBatch
from mtlattack.mtlnet.layout import Layout, format_layout, parse_layout
from mtlattack.mtlnet.task_spec import TaskSpec


log = logging.getLogger()

# lower clamp on every task loss before it is used as a weight or denominator
LOSS_FLOOR = 1e-8

MODEL_FORMAT = "mtlattack.model"


@dataclass(frozen=True)
class RecordHandles:
    """
    Node ids of a compiled model record.

    Attributes:
        inputs (int): the (batch, d) input node.
        labels (tuple): one label input per task.
        predictions (tuple): logits, regression outputs or unit vectors per task.
        losses (tuple): one scalar loss node per task.
        total (int): sum of the task losses.
        parameters (Mapping[str, int]): parameter name -> node id.
    """
    inputs: int
    labels: Tuple[int, ...]
    predictions: Tuple[int, ...]
    losses: Tuple[int, ...]
    total: int
    parameters: Mapping[str, int]


class BranchedModel:
    """
    Immutable branched multi-task model.

    Attributes:
        layout (Layout): per-depth task partitions.
        input_dim (int): d.
        widths (tuple): block width per depth.
        task_specs (tuple): one TaskSpec per task, in task-id order.
        params (Mapping[str, numpy.ndarray]): read-only parameter arrays.
        seed (int): initialisation seed.
    """

    __slots__ = ("layout", "input_dim", "widths", "task_specs", "params", "seed", "_records")

    def __init__(self, layout: Layout, input_dim: int, widths: Sequence[int], task_specs: Sequence[TaskSpec],
                 params: Mapping[str, np.ndarray], seed: int = 0):
        frozen = {}
        for name, value in params.items():
            array = np.array(value, dtype=np.float64, copy=True)
            array.setflags(write=False)
            frozen[name] = array

        self.layout = layout
        self.input_dim = int(input_dim)
        self.widths = tuple(int(w) for w in widths)
        self.task_specs = tuple(task_specs)
        self.params = MappingProxyType(frozen)
        self.seed = int(seed)
        self._records = {}

    def __repr__(self):
        return f"BranchedModel(layout={format_layout(self.layout)}, widths={self.widths}, params={self.parameter_count})"

    @property
    def n_tasks(self):
        return len(self.task_specs)

    @property
    def block_count(self):
        return self.layout.block_count

    @property
    def parameter_count(self):
        """Total number of scalar parameters; shared blocks are counted once."""
        return int(sum(value.size for value in self.params.values()))

    def block_parameter_count(self, depth):
        """Size of one block instance at the 1-based `depth`."""
        fan_in = self.input_dim if depth == 1 else self.widths[depth - 2]
        return fan_in * self.widths[depth - 1] + self.widths[depth - 1]

    def with_params(self, params: Mapping[str, np.ndarray]):
        """
        A new model with the same architecture and the given parameters.

        :raises ShapeMismatchError: if a parameter is missing or misshaped.
        """
        for name, value in self.params.items():
            if name not in params:
                raise ShapeMismatchError(name, value.shape, ())
            if np.shape(params[name]) != value.shape:
                raise ShapeMismatchError(name, value.shape, np.shape(params[name]))
        return BranchedModel(self.layout, self.input_dim, self.widths, self.task_specs,
                             {name: params[name] for name in self.params}, self.seed)

    def compile(self, batch_size) -> Tuple[ComputationRecord, RecordHandles]:
        """
        Computation record for batches of `batch_size` examples. Records are
        cached per batch size.
        """
        cached = self._records.get(batch_size)
        if cached is not None:
            return cached

        builder = RecordBuilder()
        x = builder.input("x", (batch_size, self.input_dim))
        labels = tuple(
            builder.input(f"y.{spec.task_id}", spec.label_shape(batch_size),
                          differentiable=spec.head_kind is not HeadKind.CLASSIFICATION)
            for spec in self.task_specs
        )
        parameters = {name: builder.parameter(name, Tensor(value)) for name, value in self.params.items()}

        outputs = {}
        for depth, partition in enumerate(self.layout.partitions, start=1):
            for index in range(len(partition)):
                source = x if depth == 1 else outputs[(depth - 1, self.layout.parent_index(depth, index))]
                prefix = f"block.{depth}.{index}"
                h = builder.affine(source, parameters[f"{prefix}.weight"], parameters[f"{prefix}.bias"],
                                   name=f"{prefix}.affine")
                outputs[(depth, index)] = builder.relu(h, name=prefix)

        last = self.layout.blocks
        predictions, losses = [], []
        for spec, label in zip(self.task_specs, labels):
            t = spec.task_id
            source = outputs[(last, self.layout.set_index(last, t))]
            z = builder.affine(source, parameters[f"head.{t}.weight"], parameters[f"head.{t}.bias"], name=f"head.{t}")
            if spec.head_kind is HeadKind.CLASSIFICATION:
                predictions.append(z)
                losses.append(builder.softmax_cross_entropy(z, label, name=f"loss.{t}"))
            elif spec.head_kind is HeadKind.REGRESSION:
                predictions.append(z)
                losses.append(builder.l1_loss(z, label, name=f"loss.{t}"))
            else:
                unit = builder.l2_normalize(z, name=f"prediction.{t}")
                predictions.append(unit)
                losses.append(builder.cosine_loss(unit, label, name=f"loss.{t}"))

        total = builder.weighted_sum(losses, [1.0] * len(losses), name="loss.total")
        record = builder.build(outputs=predictions + losses + [total])
        handles = RecordHandles(
            inputs=x, labels=labels, predictions=tuple(predictions), losses=tuple(losses), total=total,
            parameters=MappingProxyType(parameters),
        )
        self._records[batch_size] = (record, handles)
        return record, handles

    def evaluate(self, batch: LabeledBatch):
        """Forward pass on a batch; returns (Evaluation, RecordHandles)."""
        if batch.n_tasks != self.n_tasks:
            raise ShapeMismatchError("labels", (self.n_tasks,), (batch.n_tasks,))
        if batch.input_dim != self.input_dim:
            raise ShapeMismatchError("x", (batch.size, self.input_dim), batch.inputs.shape)

        record, handles = self.compile(batch.size)
        values = {handles.inputs: batch.inputs}
        for spec, node, label in zip(self.task_specs, handles.labels, batch.labels):
            values[node] = label
        return evaluate(record, values), handles

    def predict(self, inputs):
        """
        Per-task predictions for raw inputs: class scores, regression outputs
        or unit vectors.
        """
        inputs = np.asarray(inputs, dtype=np.float64)
        placeholders = tuple(
            np.zeros(spec.label_shape(inputs.shape[0])) for spec in self.task_specs
        )
        evaluation, handles = self.evaluate(LabeledBatch(inputs, placeholders))
        return [np.array(evaluation.values[node]) for node in handles.predictions]


def _widths_for(layout, widths):
    if isinstance(widths, (int, np.integer)):
        return (int(widths),) * layout.blocks
    widths = tuple(int(w) for w in widths)
    if len(widths) != layout.blocks:
        raise LayoutError(f"{len(widths)} widths given for a layout with {layout.blocks} blocks")
    return widths


def build_model(layout: Layout, widths: Union[int, Sequence[int]], task_specs: Sequence[TaskSpec], seed: int,
                input_dim: int) -> BranchedModel:
    """
    Instantiate one block per task set per depth and one head per task, with
    He-normal weights and zero biases drawn from `seed`.

    :raises LayoutError: if the layout is invalid, widths are not positive, or
                         the layout's tasks are not the task specs' ids.
    """
    layout.check()
    widths = _widths_for(layout, widths)
    if any(w < 1 for w in widths):
        raise LayoutError("block widths must be positive")
    if input_dim < 1:
        raise LayoutError("input dimension must be positive")

    task_specs = tuple(sorted(task_specs, key=lambda spec: spec.task_id))
    ids = tuple(spec.task_id for spec in task_specs)
    if ids != tuple(range(len(task_specs))) or layout.tasks != ids:
        raise LayoutError(f"layout tasks {list(layout.tasks)} do not match task specs {list(ids)}")

    rng = np.random.default_rng(seed)
    params: Dict[str, np.ndarray] = {}
    for depth, partition in enumerate(layout.partitions, start=1):
        fan_in = input_dim if depth == 1 else widths[depth - 2]
        for index in range(len(partition)):
            params[f"block.{depth}.{index}.weight"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(widths[depth - 1], fan_in))
            params[f"block.{depth}.{index}.bias"] = np.zeros(widths[depth - 1])

    for spec in task_specs:
        fan_in = widths[-1]
        params[f"head.{spec.task_id}.weight"] = rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(spec.out_dim, fan_in))
        params[f"head.{spec.task_id}.bias"] = np.zeros(spec.out_dim)

    model = BranchedModel(layout, input_dim, widths, task_specs, params, seed)
    log.info(f"built model {format_layout(layout)}: {model.block_count} blocks, {model.parameter_count} parameters")
    return model


def raw_task_losses(model: BranchedModel, batch: LabeledBatch):
    """Unfloored batch-mean loss of every task."""
    evaluation, handles = model.evaluate(batch)
    return np.array([float(evaluation.values[node]) for node in handles.losses])


def task_losses(model: BranchedModel, batch: LabeledBatch):
    """
    Batch-mean loss of every task, clamped from below at LOSS_FLOOR.

    :raises ShapeMismatchError: if the batch does not fit the model.
    """
    return np.maximum(raw_task_losses(model, batch), LOSS_FLOOR)


def losses_and_input_gradients(model: BranchedModel, batch: LabeledBatch):
    """
    Floored task losses and the gradient of every (unfloored) task loss with
    respect to the inputs, from a single forward pass.

    :return: (losses of shape (n,), list of n arrays shaped like batch.inputs)
    """
    evaluation, handles = model.evaluate(batch)
    losses = np.maximum(np.array([float(evaluation.values[node]) for node in handles.losses]), LOSS_FLOOR)
    grads = [evaluation.grad_arrays(node, [handles.inputs])[0] for node in handles.losses]
    return losses, grads


def input_gradients(model: BranchedModel, batch: LabeledBatch):
    """Per-task gradients dL_i/dx, each shaped like the batch inputs."""
    return losses_and_input_gradients(model, batch)[1]


def parameter_gradients(model: BranchedModel, batch: LabeledBatch):
    """
    Gradients of the total loss (sum of task losses) with respect to every
    parameter.

    :return: (floored task losses, dict of parameter name -> gradient array)
    """
    evaluation, handles = model.evaluate(batch)
    losses = np.maximum(np.array([float(evaluation.values[node]) for node in handles.losses]), LOSS_FLOOR)
    names = list(handles.parameters)
    grads = evaluation.grad_arrays(handles.total, [handles.parameters[name] for name in names])
    return losses, dict(zip(names, grads))


def evaluate_metrics(model: BranchedModel, batch: LabeledBatch) -> MetricSnapshot:
    """
    Every configured metric of every task on one batch.
    """
    evaluation, handles = model.evaluate(batch)
    tasks = []
    for spec, node, label in zip(model.task_specs, handles.predictions, batch.labels):
        tasks.append(spec.measure(evaluation.values[node], label))
    return MetricSnapshot(tuple(tasks))


def save_model(model: BranchedModel, path, config_hash=None):
    payload = {
        "layout": format_layout(model.layout),
        "input_dim": model.input_dim,
        "widths": list(model.widths),
        "seed": model.seed,
        "config_hash": config_hash,
        "task_specs": [spec.to_dict() for spec in model.task_specs],
        "params": {name: array_to_dict(value) for name, value in sorted(model.params.items())},
    }
    JsonEnvelope.wrap(MODEL_FORMAT, payload).write(path)
    log.info(f"model checkpoint written to {path}")


def load_model(path) -> BranchedModel:
    """
    :raises CheckpointError: if the file is missing or malformed.
    """
    payload = JsonEnvelope.read(path).unwrap(MODEL_FORMAT)
    try:
        layout = parse_layout(payload["layout"])
        task_specs = tuple(TaskSpec.from_dict(spec) for spec in payload["task_specs"])
        params = {name: array_from_dict(value) for name, value in payload["params"].items()}
        model = BranchedModel(layout, int(payload["input_dim"]), payload["widths"], task_specs, params,
                              int(payload["seed"]))
    except (KeyError, TypeError, ValueError, LayoutError) as e:
        raise CheckpointError(f"malformed model checkpoint {path}: {e}")

    expected = build_model(layout, model.widths, task_specs, model.seed, model.input_dim)
    for name, value in expected.params.items():
        if name not in model.params or model.params[name].shape != value.shape:
            raise CheckpointError(f"checkpoint {path} has a missing or misshaped parameter '{name}'")
    return model
