# -----------------------------------------------------------------------------
# File: ilp_oracle.py
# Description: Exhaustive maximiser of the linearised multi-task objective
#
#                  max over beta in {-1, 1}^d of  sum_i beta . g_i / L_i
#
#              Only used to check that sign rounding of the DGBA direction is
#              optimal; enumerates all 2^d sign vectors.
#
# License: MIT
# -----------------------------------------------------------------------------

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from mtlattack.exceptions.mtlattack_exception import AttackConfigError, LossFloorError, OracleDimensionError

MAX_ORACLE_DIM = 12


@dataclass(frozen=True)
class OracleResult:
    """
    Attributes:
        optimum (numpy.ndarray): the first optimal sign vector in enumeration order.
        value (float): the maximum objective.
        ties (tuple): every sign vector attaining `value`, as tuples of +-1.
    """
    optimum: np.ndarray
    value: float
    ties: Tuple[Tuple[int, ...], ...]

    @property
    def unique(self):
        return len(self.ties) == 1


def _coefficients(grads, losses):
    grads = [np.asarray(g, dtype=np.float64).ravel() for g in grads]
    losses = np.asarray(losses, dtype=np.float64)
    if not grads or len(grads) != losses.size:
        raise AttackConfigError(f"{len(grads)} gradients given with {losses.size} losses")
    if np.any(losses <= 0.0):
        raise LossFloorError(f"the linearised objective needs positive losses, got {losses.tolist()}")
    return np.sum([g / loss for g, loss in zip(grads, losses)], axis=0)


def linearized_objective(beta, grads: Sequence[np.ndarray], losses: Sequence[float]) -> float:
    """sum_i beta . g_i / L_i for one sign vector."""
    return float(np.dot(np.asarray(beta, dtype=np.float64).ravel(), _coefficients(grads, losses)))


def sign_vectors(dim):
    """All 2^dim vectors over {-1, 1}, one per row; row k encodes the bits of k."""
    codes = np.arange(2 ** dim)[:, None] >> np.arange(dim)[None, :]
    return 1 - 2 * (codes & 1)


def linearized_objective_oracle(grads: Sequence[np.ndarray], losses: Sequence[float],
                                max_dim: int = MAX_ORACLE_DIM) -> OracleResult:
    """
    Brute-force maximum of the linearised objective over {-1, 1}^d.

    Example usage:
        result = linearized_objective_oracle([np.array([2.0, -1.0]), np.array([-1.0, 3.0])], [2.0, 1.0])
        result.ties   # ((1, 1), (-1, 1))

    :param grads: per-task gradients, each with d components in total.
    :param losses: per-task positive losses.
    :param max_dim: largest d the oracle will enumerate.
    :raises OracleDimensionError: if d exceeds max_dim.
    :raises LossFloorError: if a loss is not positive.
    """
    c = _coefficients(grads, losses)
    if c.size > max_dim:
        raise OracleDimensionError(f"the oracle enumerates 2^d vectors; d={c.size} exceeds {max_dim}")

    betas = sign_vectors(c.size)
    values = betas @ c
    value = float(np.max(values))
    winners = betas[values == value]
    return OracleResult(
        optimum=winners[0].copy(),
        value=value,
        ties=tuple(tuple(int(v) for v in row) for row in winners),
    )
