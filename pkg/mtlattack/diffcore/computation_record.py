# -----------------------------------------------------------------------------
# File: computation_record.py
# Description: This file defines the computation record of the compute core:
#              an immutable, topologically ordered list of primitive
#              applications (affine map, ReLU, row L2-normalisation and the
#              loss reductions) together with the `RecordBuilder` used to
#              assemble one, the forward evaluator and the reverse-mode
#              gradient sweep.
#
#              The primitive set is closed on purpose: affine, relu,
#              l2_normalize, softmax_cross_entropy, l1_loss, cosine_loss,
#              sum_of_squares and weighted_sum. Every value is float64.
#
# License: MIT
# -----------------------------------------------------------------------------

import enum
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from mtlattack.diffcore.tensor import Tensor, as_tensor
from mtlattack.exceptions.mtlattack_exception import (
    NonFiniteValueError, NonScalarOutputError, ShapeMismatchError, UnknownTensorError,
)

# smallest norm used when dividing by a vector length
NORM_FLOOR = 1e-12

TensorRef = Union[int, str]


class Primitive(enum.Enum):
    """
    Enum of the node kinds a computation record may contain.
    """
    INPUT = "input"
    PARAMETER = "parameter"
    AFFINE = "affine"
    RELU = "relu"
    L2_NORMALIZE = "l2_normalize"
    SOFTMAX_CROSS_ENTROPY = "softmax_cross_entropy"
    L1_LOSS = "l1_loss"
    COSINE_LOSS = "cosine_loss"
    SUM_OF_SQUARES = "sum_of_squares"
    WEIGHTED_SUM = "weighted_sum"

    @property
    def is_leaf(self):
        return self in (Primitive.INPUT, Primitive.PARAMETER)

    @classmethod
    def list(cls):
        return [primitive.name for primitive in cls]


@dataclass(frozen=True)
class Node:
    """
    One primitive application.

    Attributes:
        node_id (int): position in the record; operands always have smaller ids.
        name (str): unique human-readable name used in error messages.
        primitive (Primitive): the operation applied.
        operands (tuple): ids of the operand nodes.
        shape (tuple): shape of the value this node produces.
        coefficients (tuple): constant weights of a weighted_sum node.
        differentiable (bool): False for inputs that only carry labels.
    """
    node_id: int
    name: str
    primitive: Primitive
    operands: Tuple[int, ...]
    shape: Tuple[int, ...]
    coefficients: Tuple[float, ...] = ()
    differentiable: bool = True


@dataclass(frozen=True)
class ComputationRecord:
    """
    Immutable, topologically ordered record of primitive applications.

    Attributes:
        nodes (tuple): all nodes, operands before consumers.
        parameters (Mapping[int, Tensor]): values bound to parameter nodes.
        outputs (tuple): ids of the terminal nodes returned by `forward`.
    """
    nodes: Tuple[Node, ...]
    parameters: Mapping[int, Tensor]
    outputs: Tuple[int, ...]

    @property
    def input_ids(self):
        """Ids of the input nodes, in declaration order."""
        return tuple(node.node_id for node in self.nodes if node.primitive is Primitive.INPUT)

    @property
    def input_shapes(self):
        """Declared shapes of the input nodes, in declaration order."""
        return tuple(self.nodes[i].shape for i in self.input_ids)

    def node(self, ref: TensorRef) -> Node:
        """
        Resolve a node by id or by name.

        :raises UnknownTensorError: if no node matches.
        """
        if isinstance(ref, (int, np.integer)) and not isinstance(ref, bool):
            if 0 <= int(ref) < len(self.nodes):
                return self.nodes[int(ref)]
            raise UnknownTensorError(f"unknown tensor id {ref}")

        for node in self.nodes:
            if node.name == ref:
                return node

        raise UnknownTensorError(f"unknown tensor '{ref}'")


class RecordBuilder:
    """
    Assembles a ComputationRecord node by node. Each method returns the id of
    the node it appended; ids are the handles passed to later methods and to
    `grad`.

    Example usage:
        builder = RecordBuilder()
        x = builder.input("x", (2,))
        w = builder.parameter("w", Tensor([[1.0, 0.0], [0.0, 1.0]]))
        b = builder.parameter("b", Tensor([0.0, 0.0]))
        y = builder.affine(x, w, b)
        record = builder.build()
    """

    def __init__(self):
        self._nodes = []
        self._parameters: Dict[int, Tensor] = {}
        self._names = set()

    def _shape(self, node_id):
        if not 0 <= node_id < len(self._nodes):
            raise UnknownTensorError(f"unknown tensor id {node_id}")
        return self._nodes[node_id].shape

    def _append(self, primitive, operands, shape, name=None, coefficients=(), differentiable=True):
        node_id = len(self._nodes)
        name = name or f"{primitive.value}_{node_id}"
        if name in self._names:
            raise ValueError(f"duplicate node name '{name}'")

        self._names.add(name)
        self._nodes.append(Node(
            node_id=node_id, name=name, primitive=primitive, operands=tuple(operands),
            shape=tuple(shape), coefficients=tuple(float(c) for c in coefficients),
            differentiable=differentiable,
        ))
        return node_id

    def input(self, name, shape, differentiable=True):
        """
        Declare an input whose value is supplied at evaluation time.

        :param differentiable: False for label inputs (class indices).
        """
        return self._append(Primitive.INPUT, (), tuple(int(s) for s in shape), name, differentiable=differentiable)

    def parameter(self, name, value):
        """Declare a parameter bound to `value`."""
        tensor = as_tensor(value)
        node_id = self._append(Primitive.PARAMETER, (), tensor.shape, name)
        self._parameters[node_id] = tensor
        return node_id

    def affine(self, x, weight, bias, name=None):
        """y = x W^T + b, with W of shape (k, m) and x of shape (..., m)."""
        x_shape, w_shape, b_shape = self._shape(x), self._shape(weight), self._shape(bias)
        label = name or f"affine_{len(self._nodes)}"
        if len(w_shape) != 2 or not x_shape or x_shape[-1] != w_shape[1]:
            raise ShapeMismatchError(label, x_shape[:-1] + (w_shape[-1],), x_shape)
        if b_shape != (w_shape[0],):
            raise ShapeMismatchError(label, (w_shape[0],), b_shape)
        return self._append(Primitive.AFFINE, (x, weight, bias), x_shape[:-1] + (w_shape[0],), name)

    def relu(self, x, name=None):
        return self._append(Primitive.RELU, (x,), self._shape(x), name)

    def l2_normalize(self, x, name=None):
        """Scale every vector along the last axis to unit L2 norm."""
        return self._append(Primitive.L2_NORMALIZE, (x,), self._shape(x), name)

    def softmax_cross_entropy(self, logits, labels, name=None):
        """Mean softmax cross-entropy of logits (B, C) against class indices (B,)."""
        l_shape, y_shape = self._shape(logits), self._shape(labels)
        if l_shape[:-1] != y_shape:
            raise ShapeMismatchError(name or "softmax_cross_entropy", l_shape[:-1], y_shape)
        return self._append(Primitive.SOFTMAX_CROSS_ENTROPY, (logits, labels), (), name)

    def l1_loss(self, prediction, target, name=None):
        """Mean absolute difference over all components."""
        p_shape, t_shape = self._shape(prediction), self._shape(target)
        if p_shape != t_shape:
            raise ShapeMismatchError(name or "l1_loss", p_shape, t_shape)
        return self._append(Primitive.L1_LOSS, (prediction, target), (), name)

    def cosine_loss(self, prediction, target, name=None):
        """Mean over rows of 1 - cos(prediction_row, target_row)."""
        p_shape, t_shape = self._shape(prediction), self._shape(target)
        if p_shape != t_shape:
            raise ShapeMismatchError(name or "cosine_loss", p_shape, t_shape)
        return self._append(Primitive.COSINE_LOSS, (prediction, target), (), name)

    def sum_of_squares(self, x, name=None):
        return self._append(Primitive.SUM_OF_SQUARES, (x,), (), name)

    def weighted_sum(self, terms, coefficients, name=None):
        """Linear combination of scalar nodes with constant coefficients."""
        terms = tuple(terms)
        if len(terms) != len(coefficients) or not terms:
            raise ValueError("weighted_sum needs one coefficient per term")
        for term in terms:
            if self._shape(term) != ():
                raise NonScalarOutputError(f"weighted_sum term '{self._nodes[term].name}' is not scalar")
        return self._append(Primitive.WEIGHTED_SUM, terms, (), name, coefficients=coefficients)

    def build(self, outputs: Optional[Sequence[int]] = None) -> ComputationRecord:
        """
        Freeze the record. Without explicit outputs, every node that no other
        node consumes (and that is not a leaf) is an output.
        """
        if outputs is None:
            consumed = {operand for node in self._nodes for operand in node.operands}
            outputs = [n.node_id for n in self._nodes if n.node_id not in consumed and not n.primitive.is_leaf]
        for output in outputs:
            self._shape(output)
        return ComputationRecord(
            nodes=tuple(self._nodes),
            parameters=MappingProxyType(dict(self._parameters)),
            outputs=tuple(int(o) for o in outputs),
        )


# -----------------------------------------------------------------------------
# Kernels. Each forward kernel maps operand arrays to the node value; each
# vjp kernel maps the adjoint of the node value to operand adjoints.
# -----------------------------------------------------------------------------

def _as_rows(array):
    return array.reshape(-1, array.shape[-1]) if array.ndim else array.reshape(1, 1)


def _forward_affine(x, w, b):
    return x @ w.T + b


def _vjp_affine(g, x, w, b):
    g2, x2 = _as_rows(g), _as_rows(x)
    return g @ w, g2.T @ x2, g2.sum(axis=0)


def _forward_relu(x):
    return np.where(x > 0.0, x, 0.0)


def _vjp_relu(g, x):
    # subgradient at 0 is 0
    return (g * (x > 0.0),)


def _forward_l2_normalize(x):
    norm = np.maximum(np.linalg.norm(x, axis=-1, keepdims=True), NORM_FLOOR)
    return x / norm


def _vjp_l2_normalize(g, x):
    norm = np.maximum(np.linalg.norm(x, axis=-1, keepdims=True), NORM_FLOOR)
    y = x / norm
    return ((g - y * np.sum(g * y, axis=-1, keepdims=True)) / norm,)


def _class_indices(labels, n_classes, node_name):
    indices = np.rint(labels).astype(np.int64).reshape(-1)
    if np.any(indices < 0) or np.any(indices >= n_classes):
        raise ShapeMismatchError(node_name, (n_classes,), (int(indices.max(initial=0)) + 1,))
    return indices


def _softmax(logits2):
    shifted = logits2 - logits2.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return shifted, exp / exp.sum(axis=1, keepdims=True)


def _forward_softmax_ce(logits, labels, node_name):
    logits2 = _as_rows(logits)
    indices = _class_indices(labels, logits2.shape[1], node_name)
    shifted, _ = _softmax(logits2)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(logits2.shape[0]), indices]
    return np.asarray(np.mean(log_z - picked))


def _vjp_softmax_ce(g, logits, labels, node_name):
    logits2 = _as_rows(logits)
    indices = _class_indices(labels, logits2.shape[1], node_name)
    _, probs = _softmax(logits2)
    probs[np.arange(logits2.shape[0]), indices] -= 1.0
    grad = (g / logits2.shape[0]) * probs
    return grad.reshape(logits.shape), np.zeros_like(labels)


def _forward_l1(p, t):
    return np.asarray(np.mean(np.abs(p - t)))


def _vjp_l1(g, p, t):
    gp = (g / p.size) * np.sign(p - t)
    return gp, -gp


def _row_cosines(p, t):
    p2, t2 = _as_rows(p), _as_rows(t)
    pn = np.maximum(np.linalg.norm(p2, axis=1, keepdims=True), NORM_FLOOR)
    tn = np.maximum(np.linalg.norm(t2, axis=1, keepdims=True), NORM_FLOOR)
    cos = np.sum(p2 * t2, axis=1, keepdims=True) / (pn * tn)
    return p2, t2, pn, tn, cos


def _forward_cosine(p, t):
    _, _, _, _, cos = _row_cosines(p, t)
    return np.asarray(np.mean(1.0 - cos))


def _vjp_cosine(g, p, t):
    p2, t2, pn, tn, cos = _row_cosines(p, t)
    scale = -g / p2.shape[0]
    gp = scale * (t2 / (pn * tn) - cos * p2 / pn ** 2)
    gt = scale * (p2 / (pn * tn) - cos * t2 / tn ** 2)
    return gp.reshape(p.shape), gt.reshape(t.shape)


def _forward_sum_of_squares(x):
    return np.asarray(np.sum(x * x))


def _vjp_sum_of_squares(g, x):
    return (2.0 * g * x,)


class Evaluation:
    """
    The node values of one forward pass. Gradients of any scalar node can be
    taken repeatedly from the same evaluation; each `grad` call allocates its
    own adjoint buffers.

    Attributes:
        record (ComputationRecord): the evaluated record.
        values (tuple): one float64 array per node.
    """

    __slots__ = ("record", "values")

    def __init__(self, record, values):
        self.record = record
        self.values = tuple(values)

    def value(self, ref: TensorRef):
        """Array value of one node."""
        return self.values[self.record.node(ref).node_id]

    def outputs(self):
        """Tensors of the record's terminal nodes."""
        return [Tensor(self.values[i]) for i in self.record.outputs]

    def kink_operands(self):
        """
        Yield (node, array) pairs whose zeros are kinks of the function: ReLU
        inputs and L1 residuals.
        """
        for node in self.record.nodes:
            if node.primitive is Primitive.RELU:
                yield node, self.values[node.operands[0]]
            elif node.primitive is Primitive.L1_LOSS:
                yield node, self.values[node.operands[0]] - self.values[node.operands[1]]

    def grad_arrays(self, output: TensorRef, wrt: Sequence[TensorRef]):
        """
        Reverse-mode gradients of a scalar node as float64 arrays.

        :raises NonScalarOutputError: if `output` is not scalar.
        :raises UnknownTensorError: if a `wrt` entry is not an input or parameter.
        """
        out_node = self.record.node(output)
        if out_node.shape != ():
            raise NonScalarOutputError(f"node '{out_node.name}' has shape {out_node.shape}, expected a scalar")

        targets = []
        for ref in wrt:
            node = self.record.node(ref)
            if not node.primitive.is_leaf:
                raise UnknownTensorError(f"'{node.name}' is neither an input nor a parameter")
            targets.append(node)

        adjoints: Dict[int, np.ndarray] = {out_node.node_id: np.asarray(1.0)}
        nodes, values = self.record.nodes, self.values
        for node_id in range(out_node.node_id, -1, -1):
            g = adjoints.pop(node_id, None) if not nodes[node_id].primitive.is_leaf else None
            if g is None:
                continue
            node = nodes[node_id]
            operand_values = [values[i] for i in node.operands]
            for operand, contribution in zip(node.operands, self._vjp(node, g, operand_values)):
                if operand in adjoints:
                    adjoints[operand] = adjoints[operand] + contribution
                else:
                    adjoints[operand] = contribution

        grads = []
        for node in targets:
            g = adjoints.get(node.node_id)
            if g is None or not node.differentiable:
                g = np.zeros(node.shape)
            grads.append(np.asarray(g, dtype=np.float64).reshape(node.shape))
        return grads

    def grad(self, output: TensorRef, wrt: Sequence[TensorRef]):
        """Reverse-mode gradients of a scalar node as Tensors."""
        return [Tensor(g) for g in self.grad_arrays(output, wrt)]

    @staticmethod
    def _vjp(node, g, operands):
        primitive = node.primitive
        if primitive is Primitive.AFFINE:
            return _vjp_affine(g, *operands)
        if primitive is Primitive.RELU:
            return _vjp_relu(g, *operands)
        if primitive is Primitive.L2_NORMALIZE:
            return _vjp_l2_normalize(g, *operands)
        if primitive is Primitive.SOFTMAX_CROSS_ENTROPY:
            return _vjp_softmax_ce(g, *operands, node.name)
        if primitive is Primitive.L1_LOSS:
            return _vjp_l1(g, *operands)
        if primitive is Primitive.COSINE_LOSS:
            return _vjp_cosine(g, *operands)
        if primitive is Primitive.SUM_OF_SQUARES:
            return _vjp_sum_of_squares(g, *operands)
        if primitive is Primitive.WEIGHTED_SUM:
            return tuple(c * g for c in node.coefficients)
        raise UnknownTensorError(f"no gradient rule for node '{node.name}'")


def _forward_node(node, operands):
    primitive = node.primitive
    if primitive is Primitive.AFFINE:
        return _forward_affine(*operands)
    if primitive is Primitive.RELU:
        return _forward_relu(*operands)
    if primitive is Primitive.L2_NORMALIZE:
        return _forward_l2_normalize(*operands)
    if primitive is Primitive.SOFTMAX_CROSS_ENTROPY:
        return _forward_softmax_ce(*operands, node.name)
    if primitive is Primitive.L1_LOSS:
        return _forward_l1(*operands)
    if primitive is Primitive.COSINE_LOSS:
        return _forward_cosine(*operands)
    if primitive is Primitive.SUM_OF_SQUARES:
        return _forward_sum_of_squares(*operands)
    if primitive is Primitive.WEIGHTED_SUM:
        return np.asarray(sum(c * v for c, v in zip(node.coefficients, operands)))
    raise UnknownTensorError(f"cannot evaluate node '{node.name}'")


def bind_inputs(record, inputs):
    input_ids = record.input_ids
    if isinstance(inputs, Mapping):
        bound = {}
        for ref, value in inputs.items():
            bound[record.node(ref).node_id] = value
        missing = [record.nodes[i].name for i in input_ids if i not in bound]
        if missing:
            raise UnknownTensorError(f"missing values for inputs {missing}")
        return bound

    inputs = list(inputs)
    if len(inputs) != len(input_ids):
        raise ShapeMismatchError("inputs", (len(input_ids),), (len(inputs),))
    return dict(zip(input_ids, inputs))


def evaluate(record: ComputationRecord, inputs) -> Evaluation:
    """
    Run the record forward and keep every node value.

    :param record: ComputationRecord
    :param inputs: sequence aligned with `record.input_ids`, or a mapping from
                   input id / name to value. Values may be Tensors or arrays.
    :raises ShapeMismatchError: naming the input whose shape is wrong.
    :raises NonFiniteValueError: naming the node that produced NaN/Inf.
    """
    bound = bind_inputs(record, inputs)
    values = []
    for node in record.nodes:
        if node.primitive is Primitive.INPUT:
            raw = bound[node.node_id]
            value = raw.numpy() if isinstance(raw, Tensor) else np.asarray(raw, dtype=np.float64)
            if tuple(value.shape) != node.shape:
                raise ShapeMismatchError(node.name, node.shape, value.shape)
        elif node.primitive is Primitive.PARAMETER:
            value = record.parameters[node.node_id].numpy()
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                value = _forward_node(node, [values[i] for i in node.operands])
            if not np.all(np.isfinite(value)):
                raise NonFiniteValueError(f"node '{node.name}' produced non-finite values")
        values.append(value)
    return Evaluation(record, values)


def forward(record: ComputationRecord, inputs):
    """
    Evaluate the record and return the Tensors of its terminal nodes.

    Example usage:
        forward(record, [Tensor([1.0, 2.0])])
    """
    return evaluate(record, inputs).outputs()


def grad(record: ComputationRecord, inputs, output: TensorRef, wrt: Sequence[TensorRef]):
    """
    Exact reverse-mode gradients of the scalar node `output` with respect to
    the input or parameter nodes in `wrt`. Each gradient has the shape of its
    target.
    """
    return evaluate(record, inputs).grad(output, wrt)
