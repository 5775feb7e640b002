# -----------------------------------------------------------------------------
# File: synthetic_dataset.py
# Description: Seeded synthetic multi-task benchmark. A hidden teacher maps
#              inputs x ~ U[0, 1]^d to a latent code split into one shared
#              block and one private block per task; task i reads
#              rho * shared + (1 - rho) * private_i through its own random
#              readout. rho = 1 makes every task read the same latent vector,
#              rho = 0 gives tasks disjoint latent coordinates.
#
# License: MIT
# -----------------------------------------------------------------------------

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from mtlattack.config.head_kinds import HeadKind
from mtlattack.exceptions.mtlattack_exception import CheckpointError, DatasetError
from mtlattack.lib.json_envelope import JsonEnvelope
from mtlattack.mtlnet.labeled_batch import LabeledBatch
from mtlattack.mtlnet.task_spec import TaskSpec, default_task_specs


log = logging.getLogger()

DATASET_FORMAT = "mtlattack.dataset"


@dataclass(frozen=True)
class SyntheticTeacher:
    """
    Hidden label generator.

    Attributes:
        projection (numpy.ndarray): ((n + 1) * k, d) latent projection.
        offset (numpy.ndarray): ((n + 1) * k,) latent offset.
        mixing (numpy.ndarray): (n, n + 1) weight of every latent block per task;
                                column 0 is the shared block.
        readouts (tuple): per task, a (k, out_dim) readout matrix.
        readout_biases (tuple): per task, an (out_dim,) bias.
        latent_block (int): k, width of one latent block.
    """
    projection: np.ndarray
    offset: np.ndarray
    mixing: np.ndarray
    readouts: Tuple[np.ndarray, ...]
    readout_biases: Tuple[np.ndarray, ...]
    latent_block: int

    def latent(self, inputs):
        pre = (np.asarray(inputs) - 0.5) @ self.projection.T + self.offset
        return np.maximum(pre, 0.0)

    def task_features(self, inputs):
        """(n, batch, k) mixed latent features read by each task."""
        u = self.latent(inputs)
        k = self.latent_block
        blocks = np.stack([u[:, j * k:(j + 1) * k] for j in range(self.mixing.shape[1])])
        return np.einsum("ij,jbk->ibk", self.mixing, blocks)

    def labels(self, inputs, task_specs):
        features = self.task_features(inputs)
        labels = []
        for spec, z, w, b in zip(task_specs, features, self.readouts, self.readout_biases):
            raw = z @ w + b
            if spec.head_kind is HeadKind.CLASSIFICATION:
                labels.append(np.argmax(raw, axis=1).astype(np.float64))
            elif spec.head_kind is HeadKind.REGRESSION:
                labels.append(raw)
            else:
                labels.append(raw / np.linalg.norm(raw, axis=1, keepdims=True))
        return tuple(labels)


@dataclass(frozen=True)
class SyntheticDataset:
    """
    Attributes:
        train (LabeledBatch): training split.
        test (LabeledBatch): test split.
        task_specs (tuple): one TaskSpec per task.
        rho (float): task correlation knob.
        seed (int): generator seed.
        teacher (SyntheticTeacher): the label generator, None after loading.
    """
    train: LabeledBatch
    test: LabeledBatch
    task_specs: Tuple[TaskSpec, ...]
    rho: float
    seed: int
    teacher: Optional[SyntheticTeacher] = None

    @property
    def n_tasks(self):
        return len(self.task_specs)

    @property
    def input_dim(self):
        return self.train.input_dim


def mixing_matrix(n_tasks, rho):
    mixing = np.zeros((n_tasks, n_tasks + 1))
    mixing[:, 0] = rho
    for i in range(n_tasks):
        mixing[i, i + 1] = 1.0 - rho
    return mixing


def generate_synthetic_dataset(n_tasks: int, input_dim: int, sizes: Sequence[int], rho: float, seed: int,
                               task_specs: Optional[Sequence[TaskSpec]] = None, latent_block=8) -> SyntheticDataset:
    """
    Draw a teacher and train/test splits from one seed.

    :param n_tasks: number of tasks n >= 1.
    :param input_dim: input dimensionality d >= 4.
    :param sizes: (train size, test size), both positive.
    :param rho: correlation knob in [0, 1].
    :param seed: generator seed.
    :param task_specs: defaults to classification / regression / unit-vector cycling.
    :raises DatasetError: on degenerate sizes or an out-of-range rho.
    """
    sizes = tuple(int(s) for s in sizes)
    if n_tasks < 1:
        raise DatasetError("a dataset needs at least one task")
    if input_dim < 4:
        raise DatasetError(f"input dimension must be at least 4, got {input_dim}")
    if len(sizes) != 2 or min(sizes) < 1:
        raise DatasetError(f"sizes must be two positive split sizes, got {sizes}")
    if not 0.0 <= rho <= 1.0:
        raise DatasetError(f"rho must lie in [0, 1], got {rho}")
    if latent_block < 1:
        raise DatasetError("latent_block must be positive")

    task_specs = tuple(task_specs) if task_specs is not None else default_task_specs(n_tasks)
    if len(task_specs) != n_tasks:
        raise DatasetError(f"{len(task_specs)} task specs given for {n_tasks} tasks")

    rng = np.random.default_rng(seed)
    latent_dim = (n_tasks + 1) * latent_block
    # (x - 0.5) has variance 1/12 per coordinate
    projection = rng.normal(0.0, np.sqrt(12.0 / input_dim), size=(latent_dim, input_dim))
    offset = rng.normal(0.0, 0.1, size=latent_dim)
    readouts = tuple(rng.normal(0.0, 1.0 / np.sqrt(latent_block), size=(latent_block, s.out_dim)) for s in task_specs)
    biases = tuple(rng.normal(0.0, 0.1, size=s.out_dim) for s in task_specs)
    teacher = SyntheticTeacher(projection, offset, mixing_matrix(n_tasks, float(rho)), readouts, biases, latent_block)

    splits = []
    for size in sizes:
        inputs = rng.uniform(0.0, 1.0, size=(size, input_dim))
        batch = LabeledBatch(inputs, teacher.labels(inputs, task_specs))
        batch.check_unit_labels(task_specs)
        splits.append(batch)

    log.info(f"generated synthetic dataset: {n_tasks} tasks, d={input_dim}, sizes={sizes}, rho={rho}, seed={seed}")
    return SyntheticDataset(splits[0], splits[1], task_specs, float(rho), int(seed), teacher)


def save_dataset(dataset: SyntheticDataset, path, config_hash=None):
    payload = {
        "seed": dataset.seed,
        "rho": dataset.rho,
        "config_hash": config_hash,
        "task_specs": [spec.to_dict() for spec in dataset.task_specs],
        "train": dataset.train.to_dict(),
        "test": dataset.test.to_dict(),
    }
    JsonEnvelope.wrap(DATASET_FORMAT, payload).write(path)
    log.info(f"dataset written to {path}")


def load_dataset(path) -> SyntheticDataset:
    """
    :raises CheckpointError: if the file is missing or malformed.
    """
    payload = JsonEnvelope.read(path).unwrap(DATASET_FORMAT)
    try:
        return SyntheticDataset(
            train=LabeledBatch.from_dict(payload["train"]),
            test=LabeledBatch.from_dict(payload["test"]),
            task_specs=tuple(TaskSpec.from_dict(spec) for spec in payload["task_specs"]),
            rho=float(payload["rho"]),
            seed=int(payload["seed"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"malformed dataset file {path}: {e}")
