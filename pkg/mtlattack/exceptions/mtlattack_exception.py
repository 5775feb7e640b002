# -----------------------------------------------------------------------------
# File: mtlattack_exception.py
# Description: This file defines the exception hierarchy used across the
#              laboratory. The base class `MtlAttackBaseError` is extended by
#              one class per failure an operation can report (shape mismatch,
#              kink proximity in the gradient checker, invalid layouts,
#              training divergence, ...). Every error carries a stable
#              `error_code` so the command line can emit a machine-readable
#              failure line.
#
# License: MIT
# -----------------------------------------------------------------------------


class MtlAttackBaseError(Exception):
    """
    Base exception class for all laboratory errors.

    Attributes:
        message (str): The error message associated with the exception.
        error_code (str): Stable machine-readable identifier of the failure.
    """
    error_code = "mtlattack_error"

    def __init__(self, message):
        """
        Initializes the MtlAttackBaseError with a custom message.

        :param message: str - The error message to be associated with the exception.
        """
        self.message = message
        super().__init__(self.message)

    def to_dict(self):
        """
        Return the error as a JSON-ready dictionary.

        :return: dict - error code, exception class name and message.
        """
        return {"error": self.error_code, "type": type(self).__name__, "message": self.message}


class ShapeMismatchError(MtlAttackBaseError):
    """
    Raised when a tensor handed to a computation does not have the shape the
    consuming node declared.

    Example usage:
        raise ShapeMismatchError("x", (4, 8), (4, 9))
    """
    error_code = "shape_mismatch"

    def __init__(self, node_name, expected, received):
        self.node_name = node_name
        self.expected = tuple(expected)
        self.received = tuple(received)
        super().__init__(f"shape mismatch at node '{node_name}': expected {self.expected}, got {self.received}")


class UnknownTensorError(MtlAttackBaseError):
    """
    Raised when a tensor id or name is not part of a computation record.
    """
    error_code = "unknown_tensor"


class NonScalarOutputError(MtlAttackBaseError):
    """
    Raised when a gradient is requested for an output that is not a scalar.
    """
    error_code = "non_scalar_output"


class NonFiniteValueError(MtlAttackBaseError):
    """
    Raised when a tensor would hold NaN or infinite values.
    """
    error_code = "non_finite_value"


class KinkProximityError(MtlAttackBaseError):
    """
    Raised by the finite-difference checker when the evaluation point lies within
    the step size of a ReLU or L1 kink. Callers should resample the point.

    Attributes:
        node_name (str): The kink-bearing node that was too close to zero.
        distance (float): The smallest distance to the kink that was observed.
    """
    error_code = "kink_proximity"

    def __init__(self, node_name, distance, step):
        self.node_name = node_name
        self.distance = float(distance)
        self.step = float(step)
        super().__init__(
            f"evaluation point within {self.distance:.3e} of a kink at node '{node_name}' "
            f"(step {self.step:.1e}); resample the evaluation point"
        )


class LayoutError(MtlAttackBaseError):
    """
    Raised when a branched layout violates the partition or refinement rules.

    Attributes:
        depth (int): 1-based depth at which the violation was found, if any.
    """
    error_code = "invalid_layout"

    def __init__(self, message, depth=None):
        self.depth = depth
        super().__init__(message)


class DivergenceError(MtlAttackBaseError):
    """
    Raised when training produces a non-finite loss.

    Attributes:
        epoch (int): 1-based index of the epoch in which the loss diverged.
    """
    error_code = "divergence"

    def __init__(self, epoch, detail=""):
        self.epoch = epoch
        suffix = f": {detail}" if detail else ""
        super().__init__(f"training diverged in epoch {epoch}{suffix}")


class LossFloorError(MtlAttackBaseError):
    """
    Raised when a loss-weighted combiner receives a non-positive task loss.
    """
    error_code = "loss_floor_violated"


class OracleDimensionError(MtlAttackBaseError):
    """
    Raised when the exhaustive sign-vector oracle is asked to enumerate a
    dimensionality that is too large.
    """
    error_code = "oracle_dimension"


class MetricError(MtlAttackBaseError):
    """
    Raised when a relative metric would divide by a zero reference value or
    when two snapshots do not line up.
    """
    error_code = "metric_error"


class UndefinedTransferabilityError(MetricError):
    """
    Raised when transferability is requested but the attacked task was not
    degraded (its ARP is not positive).
    """
    error_code = "undefined_transferability"


class AttackConfigError(MtlAttackBaseError):
    """
    Raised when an attack configuration or combiner is inconsistent with the
    driver or the model it is applied to.
    """
    error_code = "invalid_attack_config"


class CheckpointError(MtlAttackBaseError):
    """
    Raised when a checkpoint or dataset envelope is missing or malformed.
    """
    error_code = "checkpoint_error"


class ConfigError(MtlAttackBaseError, ValueError):
    """
    Raised when an experiment configuration is invalid.
    """
    error_code = "invalid_config"


class DatasetError(MtlAttackBaseError, ValueError):
    """
    Raised when a synthetic dataset request is degenerate (too few input
    dimensions, empty splits, a correlation outside [0, 1]) or when a batch
    violates its label invariants.
    """
    error_code = "invalid_dataset"
