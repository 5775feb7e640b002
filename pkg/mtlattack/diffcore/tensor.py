# -----------------------------------------------------------------------------
# File: tensor.py
# Description: This file defines the `Tensor` class, the immutable dense
#              double-precision array that crosses the public boundary of the
#              compute core. A tensor owns a read-only float64 numpy buffer;
#              its shape extents are positive and its values finite.
#
# License: MIT
# -----------------------------------------------------------------------------

import numpy as np

from mtlattack.exceptions.mtlattack_exception import NonFiniteValueError, ShapeMismatchError


class Tensor:
    """
    Immutable dense tensor of float64 values in row-major order.

    Attributes:
        _data (numpy.ndarray): read-only float64 buffer.

    Example usage:
        t = Tensor([[1.0, 2.0], [3.0, 4.0]])
        t.shape   # (2, 2)
        t.data    # [1.0, 2.0, 3.0, 4.0]
    """

    __slots__ = ("_data",)

    def __init__(self, values, shape=None):
        """
        Initializes the tensor from nested sequences, a numpy array or a flat
        value list plus a shape.

        :param values: array-like - the tensor values.
        :param shape: optional tuple - reshape a flat value list to this shape.
        :raises ShapeMismatchError: if the value count does not match `shape`.
        :raises NonFiniteValueError: if any value is NaN or infinite.
        """
        array = np.array(values, dtype=np.float64, copy=True)
        if shape is not None:
            shape = tuple(int(extent) for extent in shape)
            if array.size != int(np.prod(shape, dtype=np.int64)):
                raise ShapeMismatchError("tensor", shape, array.shape)
            array = array.reshape(shape)

        if any(extent <= 0 for extent in array.shape):
            raise ShapeMismatchError("tensor", tuple(max(extent, 1) for extent in array.shape), array.shape)

        if not np.all(np.isfinite(array)):
            raise NonFiniteValueError("tensor values must be finite")

        array.setflags(write=False)
        self._data = array

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    def __len__(self):
        return self._data.shape[0] if self._data.ndim else 1

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._data, other._data))

    def __hash__(self):
        return hash((self.shape, self._data.tobytes()))

    @property
    def shape(self):
        """Tuple of extents."""
        return tuple(self._data.shape)

    @property
    def data(self):
        """Flat list of values in row-major order."""
        return self._data.ravel().tolist()

    @property
    def size(self):
        """Number of stored values, the product of the shape."""
        return int(self._data.size)

    def numpy(self):
        """Return the read-only float64 array backing this tensor."""
        return self._data

    def item(self):
        """Return the single value of a one-element tensor."""
        if self._data.size != 1:
            raise ShapeMismatchError("tensor", (), self.shape)
        return float(self._data.reshape(()))


def as_tensor(value):
    """
    Return `value` as a Tensor, wrapping numpy arrays and sequences.
    """
    if isinstance(value, Tensor):
        return value
    return Tensor(value)
