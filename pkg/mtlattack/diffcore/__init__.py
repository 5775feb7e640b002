# -----------------------------------------------------------------------------
# File: __init__.py
# Description: Minimal dense-tensor compute core: immutable tensors, frozen
#              computation records, forward evaluation, reverse-mode
#              gradients and the finite-difference checker.
#
# License: MIT
# -----------------------------------------------------------------------------

from .tensor import Tensor, as_tensor
from .computation_record import (
    ComputationRecord, Evaluation, Node, Primitive, RecordBuilder, evaluate, forward, grad,
)
from .gradient_check import GradientCheckReport, finite_difference_check, relative_errors
