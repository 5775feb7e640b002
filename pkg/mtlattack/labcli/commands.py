# -----------------------------------------------------------------------------
# File: commands.py
# Description: The laboratory subcommands. Each command takes an
#              ExperimentConfig, runs its grid through the GridRunner and
#              writes tables and plots under
#
#                  <output_dir>/runs/<config hash>/
#                      dataset.json, models/, robust/
#                      training.json, records.json, diagnose.json, robustness.json
#                      tables/*.csv, plots/*.svg
#
# License: MIT
# -----------------------------------------------------------------------------

import logging
import math
import os
from dataclasses import asdict
from typing import Dict, List

from mtlattack.advtrain.fat_training import fat_train
from mtlattack.advtrain.robust_eval import CLEAN_DEFENSE, RobustnessMatrix, RobustnessRecord, robust_eval
from mtlattack.attack.attack_config import AttackConfig
from mtlattack.attack.combiners import GradientCombiner
from mtlattack.attack.diagnostics import AlignmentResult, perturbation_cosine
from mtlattack.attack.drivers import run_attack
from mtlattack.config.experiment_config import ExperimentConfig, ModelEntry
from mtlattack.exceptions.mtlattack_exception import CheckpointError, ConfigError, MetricError
from mtlattack.labcli import plots, reports
from mtlattack.labcli.grid_runner import GridCell, GridRunner, RecordStore, load_records
from mtlattack.metrics.relative_metrics import arp, transferability
from mtlattack.mtlnet.branched_model import BranchedModel, build_model, evaluate_metrics, load_model, save_model
from mtlattack.mtlnet.layout import format_layout
from mtlattack.mtlnet.synthetic_dataset import SyntheticDataset, generate_synthetic_dataset, load_dataset, save_dataset
from mtlattack.mtlnet.trainer import train


log = logging.getLogger()


def _json_float(value):
    """JSON-safe float: infinities become "inf" / "-inf"."""
    if value is None:
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(value)


class RunContext:
    """
    Paths and shared inputs of one configured run.

    Attributes:
        config (ExperimentConfig): the run configuration.
        run_dir (str): <output_dir>/runs/<config hash>.
    """

    __slots__ = ("config", "run_dir", "_dataset")

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.run_dir = os.path.join(config.output_dir, "runs", config.config_hash)
        self._dataset = None

    def path(self, *parts):
        path = os.path.join(self.run_dir, *parts)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    def model_path(self, model_id):
        return self.path("models", f"{model_id}.json")

    def robust_path(self, model_id, defense):
        return self.path("robust", f"{model_id}--{defense}.json")

    def header(self):
        return {
            "config_hash": self.config.config_hash,
            "seed": self.config.seed,
            "config": self.config.to_dict(include_output=False),
        }

    def store(self, kind, filename):
        return RecordStore(self.path(filename), kind, self.header())

    def dataset(self) -> SyntheticDataset:
        """Load the run's dataset, generating and saving it on first use."""
        if self._dataset is not None:
            return self._dataset

        path = self.path("dataset.json")
        if os.path.exists(path):
            self._dataset = load_dataset(path)
        else:
            spec = self.config.dataset
            self._dataset = generate_synthetic_dataset(
                spec.n_tasks, spec.input_dim, spec.sizes, spec.rho, self.config.seed, task_specs=spec.task_specs(),
            )
            save_dataset(self._dataset, path, self.config.config_hash)
        return self._dataset

    def trained_models(self) -> Dict[str, BranchedModel]:
        """
        :raises CheckpointError: if a grid model has not been trained yet.
        """
        models = {}
        for entry in self.config.model_entries():
            path = self.model_path(entry.model_id)
            if not os.path.exists(path):
                raise CheckpointError(f"missing checkpoint for model '{entry.model_id}'; run 'train' first")
            models[entry.model_id] = load_model(path)
        return models


def _level_name(config, entry: ModelEntry):
    return None if entry.sharing_level is None else config.models.level_name(entry.sharing_level)


# --------------------------------------------------------------------- train

def cmd_train(config: ExperimentConfig, jobs=1) -> List[dict]:
    """Train one checkpoint per grid model."""
    ctx = RunContext(config)
    dataset = ctx.dataset()
    training = config.training

    def worker(cell):
        entry = cell.params
        model = build_model(entry.layout, config.models.widths, dataset.task_specs, entry.seed, dataset.input_dim)
        result = train(model, dataset.train, training.epochs, training.lr, entry.seed, training.batch_size)
        save_model(result.model, ctx.model_path(entry.model_id), config.config_hash)
        return {
            "model_id": entry.model_id,
            "layout": format_layout(entry.layout),
            "sharing_level": entry.sharing_level,
            "seed": entry.seed,
            "parameters": result.model.parameter_count,
            "initial_loss": result.initial_loss,
            "final_loss": result.loss_trace[-1],
            "loss_trace": list(result.loss_trace),
        }

    cells = [GridCell(i, entry.model_id, entry) for i, entry in enumerate(config.model_entries())]
    records = GridRunner(ctx.store("training", "training.json"), jobs).run(cells, worker)
    write_training_outputs(ctx, records)
    return records


def write_training_outputs(ctx, records):
    reports.write_csv(ctx.path("tables", "training.csv"), *reports.training_table(records))


# -------------------------------------------------------------------- attack

def _attack_cell_id(model_id, attack: AttackConfig):
    return f"{model_id}/{attack.label}/{attack.budget.epsilon!r}"


def cmd_attack(config: ExperimentConfig, jobs=1) -> List[dict]:
    """Attack every trained model with every attack of the grid on the test split."""
    ctx = RunContext(config)
    test = ctx.dataset().test
    models = ctx.trained_models()
    clean = {model_id: evaluate_metrics(model, test) for model_id, model in models.items()}

    def worker(cell):
        entry, attack = cell.params
        model = models[entry.model_id]
        trace = run_attack(model, test, attack)
        before = clean[entry.model_id]
        after = evaluate_metrics(model, test.with_inputs(trace.adversarial_inputs))
        try:
            result, error = arp(before, after), None
        except MetricError as e:
            result, error = None, e.message
        return {
            "model_id": entry.model_id,
            "sharing_level": entry.sharing_level,
            "driver": attack.driver.value,
            "combiner": attack.combiner.label,
            "attack": attack.label,
            "epsilon": attack.budget.epsilon,
            "before": before.to_dict(),
            "after": after.to_dict(),
            "arp": result.overall if result else None,
            "per_task_arp": list(result.per_task) if result else None,
            "error": error,
            "trace": trace.summary(),
        }

    cells = []
    for entry in config.model_entries():
        for attack in config.attack_configs():
            cells.append(GridCell(len(cells), _attack_cell_id(entry.model_id, attack), (entry, attack)))
    records = GridRunner(ctx.store("attack", "records.json"), jobs).run(cells, worker)
    write_attack_outputs(ctx, records)
    return records


def write_attack_outputs(ctx, records):
    reports.write_csv(ctx.path("tables", "attack.csv"), *reports.attack_table(records, ctx.config.n_tasks))


# --------------------------------------------------------------------- sweep

def cmd_sweep(config: ExperimentConfig, jobs=1):
    """The attack grid aggregated into epsilon vs overall-ARP curves."""
    records = cmd_attack(config, jobs)
    return write_sweep_outputs(RunContext(config), records)


def write_sweep_outputs(ctx, records):
    curves = reports.sweep_curves(records)
    reports.write_csv(ctx.path("tables", "sweep.csv"), *reports.sweep_table(curves))
    for driver in dict.fromkeys(driver for driver, _ in curves):
        plots.plot_sweep(curves, driver, ctx.path("plots", f"sweep_{driver}.svg"))
    return curves


# ------------------------------------------------------------------ diagnose

def _single_attack_results(model, test, before, config):
    """Per-task ARP and final perturbation of every Single(x) attack."""
    spec = config.diagnose
    results = []
    for task in range(config.n_tasks):
        attack = AttackConfig(driver=spec.driver, combiner=GradientCombiner.single(task), budget=spec.epsilon,
                              seed=config.seed)
        trace = run_attack(model, test, attack)
        after = evaluate_metrics(model, test.with_inputs(trace.adversarial_inputs))
        try:
            per_task = arp(before, after).per_task
        except MetricError as e:
            log.warning(f"Single({task}): ARP undefined ({e.message})")
            per_task = None
        results.append((per_task, trace.adversarial_inputs - test.inputs))
    return results


def _dominance(model, test, config):
    if config.n_tasks < 2:
        return {"initial": None, "max": None, "exceeds_kappa_d": None}
    attack = AttackConfig(driver=config.diagnose.driver, combiner=GradientCombiner.dgba(),
                          budget=config.diagnose.epsilon, seed=config.seed)
    ratios = [step.dominance_ratio for step in run_attack(model, test, attack).steps]
    kappa = config.diagnose.kappa_d
    return {
        "initial": _json_float(ratios[0]),
        "max": _json_float(max(ratios)),
        "exceeds_kappa_d": None if kappa is None else max(ratios) >= kappa,
    }


def cmd_diagnose(config: ExperimentConfig, jobs=1) -> List[dict]:
    """
    Transferability of every Single(x) attack per model, with the gradient
    dominance ratio and the alignment cosines of the task pairs.
    """
    ctx = RunContext(config)
    test = ctx.dataset().test
    models = ctx.trained_models()
    pairs = config.diagnose.pairs(config.n_tasks)

    def worker(cell):
        entry = cell.params
        model = models[entry.model_id]
        before = evaluate_metrics(model, test)
        singles = _single_attack_results(model, test, before, config)

        values = {}
        for task, (per_task, _) in enumerate(singles):
            value = None
            if per_task is not None and config.n_tasks > 1:
                try:
                    value = transferability(per_task, task).value
                except MetricError as e:
                    log.warning(f"model {entry.model_id}: {e.message}")
            values[f"Single({task})"] = value

        alignment = []
        for a, b in pairs:
            result = AlignmentResult(a, b, perturbation_cosine(singles[a][1], singles[b][1]))
            kappa = config.diagnose.kappa_s
            alignment.append({"task_a": a, "task_b": b, "cosine": result.cosine,
                              "exceeds": None if kappa is None else result.exceeds(kappa)})

        return {
            "model_id": entry.model_id,
            "sharing_level": entry.sharing_level,
            "level_name": _level_name(config, entry),
            "per_single_arp": {f"Single({t})": None if p is None else list(p) for t, (p, _) in enumerate(singles)},
            "transferability": values,
            "dominance": _dominance(model, test, config),
            "alignment": alignment,
        }

    cells = [GridCell(i, entry.model_id, entry) for i, entry in enumerate(config.model_entries())]
    records = GridRunner(ctx.store("diagnose", "diagnose.json"), jobs).run(cells, worker)
    write_diagnose_outputs(ctx, records)
    return records


def write_diagnose_outputs(ctx, records):
    header, rows = reports.transferability_table(records, ctx.config.n_tasks)
    reports.write_csv(ctx.path("tables", "transferability.csv"), header, rows)
    reports.write_csv(ctx.path("tables", "diagnostics.csv"), *reports.diagnostics_table(records))
    plots.plot_transferability(header, rows, ctx.path("plots", "transferability.svg"))
    return header, rows


# ------------------------------------------------------------------ advtrain

def cmd_advtrain(config: ExperimentConfig, jobs=1) -> Dict[str, RobustnessMatrix]:
    """
    Adversarially train every grid model against every configured defense
    combiner, then evaluate the defense x attack robustness matrix per model.

    :raises ConfigError: if the config has no 'fat' section.
    """
    if config.fat is None:
        raise ConfigError("the config has no 'fat' section")
    ctx = RunContext(config)
    dataset = ctx.dataset()
    clean_models = ctx.trained_models()
    fat = config.fat
    defenses = fat.defense_set(config.n_tasks)

    def train_worker(cell):
        entry, combiner = cell.params
        model = build_model(entry.layout, config.models.widths, dataset.task_specs, entry.seed, dataset.input_dim)
        result = fat_train(model, dataset.train, fat.fat_config(combiner, entry.seed))
        save_model(result.model, ctx.robust_path(entry.model_id, combiner.label), config.config_hash)
        return {
            "model_id": entry.model_id,
            "defense": combiner.label,
            "initial_loss": result.initial_loss,
            "epochs": [asdict(e) for e in result.epochs],
        }

    entries = config.model_entries()
    cells = []
    for entry in entries:
        for combiner in defenses:
            cells.append(GridCell(len(cells), f"{entry.model_id}/{combiner.label}", (entry, combiner)))
    GridRunner(ctx.store("advtrain", "advtrain.json"), jobs).run(cells, train_worker)

    attacks = fat.eval_attacks(config.n_tasks, config.seed)

    def eval_worker(cell):
        entry = cell.params
        models = {CLEAN_DEFENSE: clean_models[entry.model_id]}
        for combiner in defenses:
            models[combiner.label] = load_model(ctx.robust_path(entry.model_id, combiner.label))
        matrix = robust_eval(models, dataset.test, attacks)
        return {"model_id": entry.model_id, "matrix": [asdict(r) for r in matrix.records]}

    cells = [GridCell(i, entry.model_id, entry) for i, entry in enumerate(entries)]
    records = GridRunner(ctx.store("robustness", "robustness.json"), jobs).run(cells, eval_worker)
    return write_robustness_outputs(ctx, records)


def write_robustness_outputs(ctx, records):
    matrices = {}
    for record in records:
        matrix = RobustnessMatrix([RobustnessRecord(**r) for r in record["matrix"]])
        matrix.write_csv(ctx.path("tables", f"robustness_{record['model_id']}.csv"))
        matrices[record["model_id"]] = matrix
    return matrices


# -------------------------------------------------------------------- report

def cmd_report(config: ExperimentConfig, jobs=1) -> List[str]:
    """
    Re-derive every table and plot from the stored records of the run.

    :raises CheckpointError: if the run has no records at all.
    """
    ctx = RunContext(config)
    written = []
    sources = [
        ("training.json", "training", lambda r: write_training_outputs(ctx, r)),
        ("records.json", "attack", lambda r: (write_attack_outputs(ctx, r), write_sweep_outputs(ctx, r))),
        ("diagnose.json", "diagnose", lambda r: write_diagnose_outputs(ctx, r)),
        ("robustness.json", "robustness", lambda r: write_robustness_outputs(ctx, r)),
    ]
    for filename, kind, writer in sources:
        path = os.path.join(ctx.run_dir, filename)
        if not os.path.exists(path):
            continue
        payload = load_records(path, kind)
        writer(sorted(payload["cells"], key=lambda r: (r["index"], r["cell_id"])))
        written.append(path)

    if not written:
        raise CheckpointError(f"no records found under {ctx.run_dir}")
    log.info(f"reports re-derived from {len(written)} record file(s)")
    return written


COMMANDS = {
    "train": cmd_train,
    "attack": cmd_attack,
    "sweep": cmd_sweep,
    "diagnose": cmd_diagnose,
    "advtrain": cmd_advtrain,
    "report": cmd_report,
}
