# -----------------------------------------------------------------------------
# File: experiment_config.py
# Description: This file defines `ExperimentConfig`, the single description of
#              a laboratory run, and its nested sections: the synthetic
#              dataset, the model grid, the attack grid, clean training,
#              adversarial training and the diagnostics. Nested sections may
#              be given as plain dictionaries (as read from the YAML file) and
#              are normalised into their dataclasses right after construction;
#              every section validates itself through `is_valid()`.
#
#              The config hash is taken over the canonical JSON form, without
#              the output directory, so it is stable under key reordering.
#
# License: MIT
# -----------------------------------------------------------------------------

import itertools
import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Tuple, Union

import yaml

from mtlattack.advtrain.fat_training import FatConfig
from mtlattack.attack.attack_config import AttackConfig
from mtlattack.attack.budget import parse_epsilon
from mtlattack.attack.combiners import GradientCombiner
from mtlattack.config.attack_drivers import AttackDriver
from mtlattack.exceptions.mtlattack_exception import AttackConfigError, ConfigError, LayoutError
from mtlattack.lib.json_envelope import config_hash
from mtlattack.mtlnet.layout import (
    LAYOUT_PRESETS, Layout, format_layout, layout_for_sharing_level, layout_preset, parse_layout, sharing_level_name,
)
from mtlattack.mtlnet.task_spec import TaskSpec, default_task_specs

ALL_SINGLES = "Single(*)"


def _section(cls, value, name):
    """Turn a mapping into the section dataclass, naming the section on failure."""
    if isinstance(value, cls):
        return value
    if value is None:
        return cls()
    if not isinstance(value, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(value) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {', '.join(unknown)}")
    try:
        return cls(**value)
    except (AttackConfigError, LayoutError) as e:
        raise ConfigError(f"invalid '{name}' section: {e.message}")


def _epsilon(value, name):
    try:
        return parse_epsilon(value)
    except AttackConfigError as e:
        raise ConfigError(f"{name}: {e.message}")


@dataclass(frozen=True)
class DatasetSpec:
    """
    Attributes:
        n_tasks (int): number of tasks.
        input_dim (int): input dimensionality d.
        sizes (tuple): (train size, test size).
        rho (float): task correlation knob in [0, 1].
        tasks (tuple): optional TaskSpec mappings; default heads cycle
                       classification, regression and unit-vector.
    """
    n_tasks: int = 3
    input_dim: int = 64
    sizes: Tuple[int, int] = (512, 256)
    rho: float = 0.8
    tasks: Optional[Tuple[dict, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(self.sizes))
        if self.tasks is not None:
            object.__setattr__(self, "tasks", tuple(dict(t) for t in self.tasks))
        self.is_valid()

    def is_valid(self):
        if not isinstance(self.n_tasks, int) or self.n_tasks < 1:
            raise ConfigError("dataset.n_tasks must be a positive integer")
        if not isinstance(self.input_dim, int) or self.input_dim < 4:
            raise ConfigError("dataset.input_dim must be an integer >= 4")
        if len(self.sizes) != 2 or not all(isinstance(s, int) and s >= 1 for s in self.sizes):
            raise ConfigError("dataset.sizes must be two positive integers (train, test)")
        if not 0.0 <= float(self.rho) <= 1.0:
            raise ConfigError("dataset.rho must lie in [0, 1]")
        if self.tasks is not None:
            self.task_specs()

    def task_specs(self) -> Tuple[TaskSpec, ...]:
        if self.tasks is None:
            return default_task_specs(self.n_tasks)
        try:
            specs = tuple(TaskSpec.from_dict(dict(t, task_id=i)) for i, t in enumerate(self.tasks))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"dataset.tasks: {e}")
        if len(specs) != self.n_tasks:
            raise ConfigError(f"dataset.tasks lists {len(specs)} tasks, n_tasks is {self.n_tasks}")
        return specs

    def to_dict(self):
        return {"n_tasks": self.n_tasks, "input_dim": self.input_dim, "sizes": list(self.sizes),
                "rho": float(self.rho), "tasks": None if self.tasks is None else list(self.tasks)}


@dataclass(frozen=True)
class ModelEntry:
    """One model of the grid."""
    model_id: str
    layout: Layout
    sharing_level: Optional[int]
    seed: int


@dataclass(frozen=True)
class ModelGrid:
    """
    Attributes:
        sharing_levels (tuple): levels k of "first k blocks shared" layouts.
        layouts (tuple): explicit layouts, as preset names or layout text.
        blocks (int): number of blocks B of the sharing-level layouts.
        widths (int | tuple): block width, one value or one per depth.
        replicas (int): training seeds per layout; seeds are seed, seed+1, ...
    """
    sharing_levels: Tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    layouts: Tuple[str, ...] = ()
    blocks: int = 5
    widths: Union[int, Tuple[int, ...]] = 32
    replicas: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sharing_levels", tuple(self.sharing_levels or ()))
        object.__setattr__(self, "layouts", tuple(str(text) for text in (self.layouts or ())))
        if not isinstance(self.widths, int):
            object.__setattr__(self, "widths", tuple(self.widths))
        self.is_valid()

    def is_valid(self):
        if not isinstance(self.blocks, int) or self.blocks < 1:
            raise ConfigError("models.blocks must be a positive integer")
        if not self.sharing_levels and not self.layouts:
            raise ConfigError("the model grid is empty: give sharing_levels or layouts")
        for level in self.sharing_levels:
            if not isinstance(level, int) or not 0 <= level <= self.blocks:
                raise ConfigError(f"sharing level {level} is outside [0, {self.blocks}]")
        if len(set(self.sharing_levels)) != len(self.sharing_levels):
            raise ConfigError("models.sharing_levels contains duplicates")
        widths = (self.widths,) if isinstance(self.widths, int) else self.widths
        if not widths or not all(isinstance(w, int) and w >= 1 for w in widths):
            raise ConfigError("models.widths must be positive integers")
        if not isinstance(self.replicas, int) or self.replicas < 1:
            raise ConfigError("models.replicas must be a positive integer")
        for text in self.layouts:
            self._parse(text)

    @staticmethod
    def _parse(text) -> Layout:
        if text in LAYOUT_PRESETS:
            return layout_preset(text)
        try:
            return parse_layout(text)
        except LayoutError as e:
            raise ConfigError(f"layout '{text}': {e.message}")

    def entries(self, n_tasks, seed) -> List[ModelEntry]:
        """
        Every (layout, replica) of the grid in a fixed order.

        :raises ConfigError: if a layout is invalid or does not cover n_tasks tasks.
        """
        named = []
        for level in self.sharing_levels:
            named.append((f"L{level}", layout_for_sharing_level(level, self.blocks, n_tasks), level))
        for index, text in enumerate(self.layouts):
            name = text if text in LAYOUT_PRESETS else f"layout{index}"
            named.append((name, self._parse(text), None))

        entries = []
        for name, layout, level in named:
            try:
                layout.check()
            except LayoutError as e:
                raise ConfigError(f"model '{name}': {e.message}")
            if layout.tasks != tuple(range(n_tasks)):
                raise ConfigError(f"model '{name}' covers tasks {list(layout.tasks)}, the dataset has {n_tasks}")
            for replica in range(self.replicas):
                entries.append(ModelEntry(f"{name}-s{seed + replica}", layout, level, seed + replica))
        return entries

    def level_name(self, level):
        return sharing_level_name(level, self.blocks)

    def to_dict(self):
        return {
            "sharing_levels": list(self.sharing_levels), "layouts": list(self.layouts), "blocks": self.blocks,
            "widths": self.widths if isinstance(self.widths, int) else list(self.widths),
            "replicas": self.replicas,
        }


def _expand_combiners(names, n_tasks) -> List[GradientCombiner]:
    combiners = []
    for name in names:
        if str(name).replace(" ", "").lower() == ALL_SINGLES.lower():
            combiners.extend(GradientCombiner.single(t) for t in range(n_tasks))
        else:
            combiners.append(GradientCombiner.parse(name))
    return combiners


def _check_combiners(names, where):
    for name in names:
        if str(name).replace(" ", "").lower() != ALL_SINGLES.lower():
            try:
                GradientCombiner.parse(name)
            except AttackConfigError as e:
                raise ConfigError(f"{where}: {e.message}")


@dataclass(frozen=True)
class AttackGrid:
    """
    Attributes:
        drivers (tuple): "fgsm", "pgd", "apgd".
        combiners (tuple): combiner names; "Single(*)" expands to every task.
        epsilons (tuple): budgets, numbers or "k/255" text, ascending.
        iterations (dict): optional step count per driver name.
        random_start (bool): PGD random start.
        alpha (float): APGD momentum weight.
    """
    drivers: Tuple[str, ...] = ("fgsm", "pgd", "apgd")
    combiners: Tuple[str, ...] = (ALL_SINGLES, "Total", "SignTotal", "DGBA")
    epsilons: Tuple[float, ...] = (0.0, 1 / 255, 2 / 255, 4 / 255, 8 / 255, 15 / 255)
    iterations: Dict[str, int] = field(default_factory=dict)
    random_start: bool = False
    alpha: float = 0.75

    def __post_init__(self):
        try:
            drivers = tuple(AttackDriver.parse(d).value for d in self.drivers)
            iterations = {AttackDriver.parse(k).value: v for k, v in (self.iterations or {}).items()}
        except ValueError as e:
            raise ConfigError(f"attacks: {e}")
        object.__setattr__(self, "drivers", drivers)
        object.__setattr__(self, "iterations", iterations)
        object.__setattr__(self, "combiners", tuple(str(c) for c in self.combiners))
        object.__setattr__(self, "epsilons", tuple(_epsilon(e, "attacks.epsilons") for e in self.epsilons))
        self.is_valid()

    def is_valid(self):
        if not self.drivers or not self.combiners or not self.epsilons:
            raise ConfigError("attacks needs at least one driver, combiner and epsilon")
        _check_combiners(self.combiners, "attacks.combiners")
        if any(b <= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError(f"attacks.epsilons must be strictly ascending, got {list(self.epsilons)}")
        for name, steps in self.iterations.items():
            if not isinstance(steps, int) or steps < 1:
                raise ConfigError(f"attacks.iterations.{name} must be a positive integer")
        if not isinstance(self.random_start, bool):
            raise ConfigError("attacks.random_start must be a boolean value")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("attacks.alpha must lie in (0, 1]")

    def combiner_set(self, n_tasks):
        return _expand_combiners(self.combiners, n_tasks)

    def configs(self, n_tasks, seed) -> List[AttackConfig]:
        """driver x combiner x epsilon, in that nesting order."""
        configs = []
        for driver, combiner, epsilon in itertools.product(self.drivers, self.combiner_set(n_tasks), self.epsilons):
            configs.append(AttackConfig(
                driver=driver, combiner=combiner, budget=epsilon,
                n_iter=1 if driver == AttackDriver.FGSM.value else self.iterations.get(driver),
                alpha=self.alpha, random_start=self.random_start and driver == AttackDriver.PGD.value, seed=seed,
            ))
        return configs

    def to_dict(self):
        return {
            "drivers": list(self.drivers), "combiners": list(self.combiners), "epsilons": list(self.epsilons),
            "iterations": dict(sorted(self.iterations.items())), "random_start": self.random_start,
            "alpha": self.alpha,
        }


@dataclass(frozen=True)
class TrainingSpec:
    epochs: int = 40
    lr: float = 0.1
    batch_size: Optional[int] = None

    def __post_init__(self):
        self.is_valid()

    def is_valid(self):
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise ConfigError("training.epochs must be a positive integer")
        if not isinstance(self.lr, (int, float)) or not math.isfinite(self.lr) or self.lr < 0:
            raise ConfigError("training.lr must be finite and non-negative")
        if self.batch_size is not None and (not isinstance(self.batch_size, int) or self.batch_size < 1):
            raise ConfigError("training.batch_size must be a positive integer")

    def to_dict(self):
        return {"epochs": self.epochs, "lr": self.lr, "batch_size": self.batch_size}


@dataclass(frozen=True)
class FatSpec:
    """
    Attributes:
        defenses (tuple): combiners to adversarially train against.
        epsilon (float): training and evaluation budget.
        steps (int): K, inner PGD steps.
        tau (int): early-stop extra steps; defaults to K.
        early_stop_threshold (float): None disables the early stop.
        epochs (int), lr (float), batch_size (int): the training schedule.
        eval_driver (str): driver of the robustness evaluation.
        eval_combiners (tuple): attacks of the robustness evaluation.
    """
    defenses: Tuple[str, ...] = ("DGBA",)
    epsilon: float = 8 / 255
    steps: int = 20
    tau: Optional[int] = None
    early_stop_threshold: Optional[float] = None
    epochs: int = 20
    lr: float = 0.1
    batch_size: Optional[int] = 64
    eval_driver: str = "pgd"
    eval_combiners: Tuple[str, ...] = (ALL_SINGLES, "Total", "SignTotal", "DGBA")

    def __post_init__(self):
        object.__setattr__(self, "defenses", tuple(str(d) for d in self.defenses))
        object.__setattr__(self, "eval_combiners", tuple(str(c) for c in self.eval_combiners))
        object.__setattr__(self, "epsilon", _epsilon(self.epsilon, "fat.epsilon"))
        try:
            object.__setattr__(self, "eval_driver", AttackDriver.parse(self.eval_driver).value)
        except ValueError as e:
            raise ConfigError(f"fat.eval_driver: {e}")
        self.is_valid()

    def is_valid(self):
        if not self.defenses:
            raise ConfigError("fat.defenses must name at least one combiner")
        _check_combiners(self.defenses, "fat.defenses")
        _check_combiners(self.eval_combiners, "fat.eval_combiners")
        # the schedule is validated by the FatConfig it produces
        self.fat_config(GradientCombiner.dgba(), 0)

    def defense_set(self, n_tasks):
        return _expand_combiners(self.defenses, n_tasks)

    def fat_config(self, combiner, seed) -> FatConfig:
        return FatConfig(
            attack=AttackConfig(driver="pgd", combiner=combiner, budget=self.epsilon, seed=seed),
            steps=self.steps, tau=self.tau, early_stop_threshold=self.early_stop_threshold,
            epochs=self.epochs, batch_size=self.batch_size, lr=self.lr, seed=seed,
        )

    def eval_attacks(self, n_tasks, seed) -> List[AttackConfig]:
        return [AttackConfig(driver=self.eval_driver, combiner=c, budget=self.epsilon, seed=seed)
                for c in _expand_combiners(self.eval_combiners, n_tasks)]

    def to_dict(self):
        return {
            "defenses": list(self.defenses), "epsilon": self.epsilon, "steps": self.steps, "tau": self.tau,
            "early_stop_threshold": self.early_stop_threshold, "epochs": self.epochs, "lr": self.lr,
            "batch_size": self.batch_size, "eval_driver": self.eval_driver,
            "eval_combiners": list(self.eval_combiners),
        }


@dataclass(frozen=True)
class DiagnoseSpec:
    """
    Attributes:
        driver (str): driver of the Single(x) transferability attacks.
        epsilon (float): their budget.
        alignment_pairs (tuple): task pairs for the alignment cosine; all pairs when None.
        kappa_s (float): alignment report threshold, no default.
        kappa_d (float): dominance report threshold, no default.
    """
    driver: str = "pgd"
    epsilon: float = 8 / 255
    alignment_pairs: Optional[Tuple[Tuple[int, int], ...]] = None
    kappa_s: Optional[float] = None
    kappa_d: Optional[float] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "driver", AttackDriver.parse(self.driver).value)
        except ValueError as e:
            raise ConfigError(f"diagnose.driver: {e}")
        object.__setattr__(self, "epsilon", _epsilon(self.epsilon, "diagnose.epsilon"))
        if self.alignment_pairs is not None:
            object.__setattr__(self, "alignment_pairs", tuple(tuple(p) for p in self.alignment_pairs))
        self.is_valid()

    def is_valid(self):
        for pair in self.alignment_pairs or ():
            if len(pair) != 2 or pair[0] == pair[1]:
                raise ConfigError(f"diagnose.alignment_pairs entries must be two different tasks, got {list(pair)}")

    def pairs(self, n_tasks):
        if self.alignment_pairs is None:
            return list(itertools.combinations(range(n_tasks), 2))
        for a, b in self.alignment_pairs:
            if not (0 <= a < n_tasks and 0 <= b < n_tasks):
                raise ConfigError(f"alignment pair ({a}, {b}) names a task outside [0, {n_tasks})")
        return list(self.alignment_pairs)

    def to_dict(self):
        return {
            "driver": self.driver, "epsilon": self.epsilon,
            "alignment_pairs": None if self.alignment_pairs is None else [list(p) for p in self.alignment_pairs],
            "kappa_s": self.kappa_s, "kappa_d": self.kappa_d,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One file fully determines a run.

    Attributes:
        dataset (DatasetSpec), models (ModelGrid), attacks (AttackGrid),
        training (TrainingSpec), diagnose (DiagnoseSpec): run sections.
        fat (FatSpec): adversarial training, None when not configured.
        output_dir (str): root of runs/, tables/ and plots/.
        seed (int): seeds the dataset, model initialisation and attacks.

    Example usage:
        config = ExperimentConfig.from_file("configs/smoke.yaml").with_overrides(seed=1)
    """
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    models: ModelGrid = field(default_factory=ModelGrid)
    attacks: AttackGrid = field(default_factory=AttackGrid)
    training: TrainingSpec = field(default_factory=TrainingSpec)
    fat: Optional[FatSpec] = None
    diagnose: DiagnoseSpec = field(default_factory=DiagnoseSpec)
    output_dir: str = "out"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dataset", _section(DatasetSpec, self.dataset, "dataset"))
        object.__setattr__(self, "models", _section(ModelGrid, self.models, "models"))
        object.__setattr__(self, "attacks", _section(AttackGrid, self.attacks, "attacks"))
        object.__setattr__(self, "training", _section(TrainingSpec, self.training, "training"))
        object.__setattr__(self, "diagnose", _section(DiagnoseSpec, self.diagnose, "diagnose"))
        if self.fat is not None:
            object.__setattr__(self, "fat", _section(FatSpec, self.fat, "fat"))
        self.is_valid()

    def is_valid(self):
        """
        :raises ConfigError: naming the offending section or field.
        """
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not self.output_dir:
            raise ConfigError("output_dir must not be empty")
        self.model_entries()
        self.diagnose.pairs(self.dataset.n_tasks)
        for name in self.attacks.combiners + (self.fat.defenses if self.fat else ()):
            for combiner in _expand_combiners([name], self.dataset.n_tasks):
                try:
                    combiner.validate(self.dataset.n_tasks)
                except AttackConfigError as e:
                    raise ConfigError(e.message)

    @property
    def n_tasks(self):
        return self.dataset.n_tasks

    def model_entries(self) -> List[ModelEntry]:
        return self.models.entries(self.dataset.n_tasks, self.seed)

    def attack_configs(self) -> List[AttackConfig]:
        return self.attacks.configs(self.dataset.n_tasks, self.seed)

    @classmethod
    def from_dict(cls, data):
        """
        :raises ConfigError: on unknown keys or invalid values.
        """
        if not isinstance(data, dict):
            raise ConfigError("an experiment config must be a mapping")
        unknown = sorted(set(data) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(str(e))

    @classmethod
    def from_file(cls, path):
        """
        Load a YAML experiment file.

        :raises ConfigError: if the file cannot be read or parsed.
        """
        try:
            with open(path, "r", encoding="utf-8") as handle:
                data = yaml.safe_load(handle)
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}")
        except yaml.YAMLError as e:
            raise ConfigError(f"config file {path} is not valid YAML: {e}")
        return cls.from_dict(data or {})

    def with_overrides(self, seed=None, output_dir=None):
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if output_dir is not None:
            changes["output_dir"] = str(output_dir)
        return replace(self, **changes) if changes else self

    def to_dict(self, include_output=True):
        data = {
            "dataset": self.dataset.to_dict(),
            "models": self.models.to_dict(),
            "attacks": self.attacks.to_dict(),
            "training": self.training.to_dict(),
            "fat": None if self.fat is None else self.fat.to_dict(),
            "diagnose": self.diagnose.to_dict(),
            "seed": self.seed,
        }
        if include_output:
            data["output_dir"] = self.output_dir
        return data

    @property
    def config_hash(self):
        return config_hash(self.to_dict(include_output=False))

    def describe_models(self):
        """model id -> layout text, for reports."""
        return {entry.model_id: format_layout(entry.layout) for entry in self.model_entries()}
