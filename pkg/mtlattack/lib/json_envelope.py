# -----------------------------------------------------------------------------
# File: json_envelope.py
# Description: This file defines the `JsonEnvelope` class which wraps the
#              byte content of every artifact the laboratory persists
#              (checkpoints, datasets, run records). An envelope is a JSON
#              object with a `format` tag, a `version`, and a payload. Arrays
#              are stored as shapes plus flat value lists. Encoding is
#              canonical (sorted keys, fixed separators) so identical payloads
#              always produce identical bytes, and the sha256 of the canonical
#              form doubles as a configuration hash.
#
# License: MIT
# -----------------------------------------------------------------------------

import hashlib
import json
import os

import numpy as np

from mtlattack.exceptions.mtlattack_exception import CheckpointError


ENVELOPE_VERSION = 1


def canonical_json(obj):
    """
    Serialize an object to canonical JSON text (sorted keys, no whitespace
    variance). Python floats are written with their shortest round-trip repr,
    so decoding recovers the identical double.

    :param obj: JSON-compatible object.
    :return: str
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(obj, length=12):
    """
    Return a short sha256 digest of the canonical JSON form of `obj`. Because
    keys are sorted first, the hash is stable under key reordering.

    :param obj: JSON-compatible object (typically a config dictionary).
    :param length: number of hex characters to keep.
    :return: str
    """
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:length]


def array_to_dict(array):
    """
    Encode an array as {"shape": [...], "values": [...]} with values in
    row-major order.
    """
    array = np.asarray(array, dtype=np.float64)
    return {"shape": list(array.shape), "values": array.ravel().tolist()}


def array_from_dict(data):
    """
    Decode an {"shape", "values"} dictionary produced by `array_to_dict`.

    :raises CheckpointError: if the value count does not match the shape.
    """
    try:
        shape = tuple(int(extent) for extent in data["shape"])
        values = np.asarray(data["values"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"malformed array entry: {e}")

    if values.size != int(np.prod(shape, dtype=np.int64)):
        raise CheckpointError(f"array entry holds {values.size} values for shape {shape}")

    return values.reshape(shape)


class JsonEnvelope:
    """
    JsonEnvelope manages the byte content of one persisted artifact.

    Attributes:
        data (bytes): The encoded envelope.
    """

    __slots__ = ("data",)

    def __init__(self, data: bytes):
        """
        Initializes the JsonEnvelope with the provided byte data.

        :param data: The byte data that this instance will manage.
        :type data: bytes
        """
        if not isinstance(data, bytes):
            raise TypeError("envelope data must be bytes")
        self.data = data

    def __repr__(self):
        return f"JsonEnvelope({len(self.data)} bytes)"

    def __call__(self):
        """
        Allows the instance to be called like a function, returning the byte data.

        :return: The raw byte data managed by the instance.
        :rtype: bytes
        """
        return self.data

    @classmethod
    def wrap(cls, format_tag, payload, indent=None):
        """
        Build an envelope around a payload dictionary.

        :param format_tag: str - identifies the artifact kind, e.g. "mtlattack.checkpoint".
        :param payload: dict - JSON-compatible content.
        :param indent: optional indentation for human-readable files.
        :return: JsonEnvelope
        """
        body = {"format": format_tag, "version": ENVELOPE_VERSION, "payload": payload}
        if indent is None:
            text = canonical_json(body)
        else:
            text = json.dumps(body, sort_keys=True, indent=indent, allow_nan=False)
        return cls((text + "\n").encode("utf-8"))

    def decode(self):
        """
        Decodes the byte data into a string using UTF-8.

        :rtype: str
        """
        return self.data.decode("utf-8")

    def from_json(self):
        """
        Decodes the byte data into a JSON object.

        :rtype: dict
        """
        try:
            return json.loads(self.decode())
        except ValueError as e:
            raise CheckpointError(f"envelope is not valid JSON: {e}")

    def unwrap(self, format_tag):
        """
        Return the payload after checking the format tag and version.

        :param format_tag: str - the expected artifact kind.
        :raises CheckpointError: if the envelope is of another kind or version.
        """
        body = self.from_json()
        if not isinstance(body, dict) or body.get("format") != format_tag:
            raise CheckpointError(f"expected a '{format_tag}' envelope")

        if body.get("version") != ENVELOPE_VERSION:
            raise CheckpointError(f"unsupported envelope version {body.get('version')}")

        return body["payload"]

    def write(self, path):
        """
        Write the envelope to `path`, creating parent directories. The file is
        written to a temporary sibling and renamed so readers never observe a
        partial file.
        """
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        tmp_path = f"{path}.tmp"
        with open(tmp_path, "wb") as f:
            f.write(self.data)
        os.replace(tmp_path, path)

    @classmethod
    def read(cls, path):
        """
        Read an envelope from disk.

        :raises CheckpointError: if the file does not exist.
        """
        if not os.path.exists(path):
            raise CheckpointError(f"file not found: {path}")

        with open(path, "rb") as f:
            return cls(f.read())
