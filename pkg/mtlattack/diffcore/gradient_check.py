# -----------------------------------------------------------------------------
# File: gradient_check.py
# Description: Central finite-difference verification of reverse-mode
#              gradients. The checker refuses evaluation points that sit
#              within one step of a ReLU or L1 kink, and also refuses any
#              point whose +h / -h evaluations switch a kink's side, instead
#              of smoothing the function. Relative errors are taken per
#              component against a magnitude floor.
#
# License: MIT
# -----------------------------------------------------------------------------

import dataclasses
import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, List, Sequence

import numpy as np

from mtlattack.diffcore.computation_record import (
    ComputationRecord, Primitive, TensorRef, bind_inputs, evaluate,
)
from mtlattack.diffcore.tensor import Tensor
from mtlattack.exceptions.mtlattack_exception import KinkProximityError


log = logging.getLogger()


# magnitude below which a gradient component is compared in absolute terms
RELATIVE_ERROR_FLOOR = 1e-4


@dataclass(frozen=True)
class GradientCheckReport:
    """
    Result of one finite-difference check.

    Attributes:
        passed (bool): True iff max_relative_error <= tolerance.
        max_relative_error (float): largest per-component relative error.
        tolerance (float): the tolerance the check was run with.
        step (float): the central-difference step h.
        relative_errors (dict): target name -> per-component relative errors.
        analytic (dict): target name -> reverse-mode gradient.
        numeric (dict): target name -> central-difference gradient.
    """
    passed: bool
    max_relative_error: float
    tolerance: float
    step: float
    relative_errors: Dict[str, np.ndarray]
    analytic: Dict[str, np.ndarray]
    numeric: Dict[str, np.ndarray]


def relative_errors(analytic, numeric, floor=RELATIVE_ERROR_FLOOR):
    """
    Per-component error |a_i - n_i| / max(|a_i|, |n_i|, floor).
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def _kink_signs(evaluation):
    return [(node, np.sign(z)) for node, z in evaluation.kink_operands()]


def _assert_clear_of_kinks(evaluation, step):
    for node, z in evaluation.kink_operands():
        if z.size == 0:
            continue
        distance = float(np.min(np.abs(z)))
        if distance <= step:
            raise KinkProximityError(node.name, distance, step)


def _assert_same_side(base_signs, evaluation, step):
    for (node, base), (_, shifted) in zip(base_signs, _kink_signs(evaluation)):
        if not np.array_equal(base, shifted):
            raise KinkProximityError(node.name, 0.0, step)


def finite_difference_check(record: ComputationRecord, inputs, output: TensorRef,
                            wrt: Sequence[TensorRef], step=1e-5, tolerance=1e-6,
                            floor=RELATIVE_ERROR_FLOOR) -> GradientCheckReport:
    """
    Compare reverse-mode gradients of a scalar node against central finite
    differences (f(v + h) - f(v - h)) / 2h, component by component.

    :param record: ComputationRecord to check.
    :param inputs: input values, as accepted by `evaluate`.
    :param output: the scalar node whose gradient is checked.
    :param wrt: input or parameter nodes to differentiate with respect to.
    :param step: h > 0.
    :param tolerance: maximum allowed relative error.
    :param floor: components smaller than this are compared in absolute terms.
    :raises KinkProximityError: if the evaluation point is within h of a kink, or
                                a shifted evaluation switches the side of a kink.
    :raises ValueError: if step is not positive.
    """
    if step <= 0:
        raise ValueError("finite-difference step must be positive")

    bound = {k: (v.numpy() if isinstance(v, Tensor) else np.asarray(v, dtype=np.float64))
             for k, v in bind_inputs(record, inputs).items()}
    base = evaluate(record, bound)
    _assert_clear_of_kinks(base, step)
    base_signs = _kink_signs(base)
    out_id = record.node(output).node_id

    targets = [record.node(ref) for ref in wrt]
    analytic = base.grad_arrays(output, wrt)

    def shifted_value(node, index, delta):
        if node.primitive is Primitive.INPUT:
            shifted = dict(bound)
            value = bound[node.node_id].copy()
            value[index] += delta
            shifted[node.node_id] = value
            evaluation = evaluate(record, shifted)
        else:
            params = dict(record.parameters)
            value = params[node.node_id].numpy().copy()
            value[index] += delta
            params[node.node_id] = Tensor(value)
            evaluation = evaluate(dataclasses.replace(record, parameters=MappingProxyType(params)), bound)
        _assert_same_side(base_signs, evaluation, step)
        return float(evaluation.values[out_id])

    errors: Dict[str, np.ndarray] = {}
    numeric_grads: Dict[str, np.ndarray] = {}
    analytic_grads: Dict[str, np.ndarray] = {}
    worst = 0.0
    for node, a in zip(targets, analytic):
        numeric = np.zeros(node.shape)
        for index in np.ndindex(*node.shape):
            numeric[index] = (shifted_value(node, index, step) - shifted_value(node, index, -step)) / (2.0 * step)
        err = relative_errors(a, numeric, floor)
        errors[node.name] = err
        numeric_grads[node.name] = numeric
        analytic_grads[node.name] = a
        worst = max(worst, float(np.max(err, initial=0.0)))

    passed = worst <= tolerance
    log.debug(f"finite-difference check over {len(targets)} target(s): max relative error {worst:.3e}")
    return GradientCheckReport(
        passed=passed, max_relative_error=worst, tolerance=float(tolerance), step=float(step),
        relative_errors=errors, analytic=analytic_grads, numeric=numeric_grads,
    )
