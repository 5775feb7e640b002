# -----------------------------------------------------------------------------
# File: robust_eval.py
# Description: Defense x attack robustness matrix. Every defended model (the
#              clean-trained one included) is attacked with every attack of
#              the grid on the test set; each cell holds the ARP of the
#              attack against that model's own clean performance, and each
#              row carries the clean cost of the defense against the
#              clean-trained model.
#
#              The CSV form has one row per defense and one column per
#              attack, and parses back losslessly.
#
# License: MIT
# -----------------------------------------------------------------------------

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence

from mtlattack.attack.attack_config import AttackConfig
from mtlattack.attack.drivers import run_attack
from mtlattack.exceptions.mtlattack_exception import MetricError
from mtlattack.metrics.relative_metrics import arp
from mtlattack.mtlnet.branched_model import BranchedModel, evaluate_metrics
from mtlattack.mtlnet.labeled_batch import LabeledBatch


log = logging.getLogger()

CLEAN_DEFENSE = "clean"
ATTACK_SEPARATOR = "@"


def attack_column(label, epsilon):
    """Column key of an attack: "PGD-DGBA@0.03137254901960784"."""
    return f"{label}{ATTACK_SEPARATOR}{float(epsilon)!r}"


def split_attack_column(column):
    label, _, epsilon = column.rpartition(ATTACK_SEPARATOR)
    return label, float(epsilon)


def _format(value):
    return "" if value is None else repr(float(value))


def _parse(text):
    return None if text == "" else float(text)


@dataclass(frozen=True)
class RobustnessRecord:
    """
    Attributes:
        defense (str): "clean" or the combiner the model was trained against.
        attack (str): attack label, e.g. "PGD-DGBA".
        epsilon (float): attack budget.
        arp (float): overall ARP of the attack, percent; None if undefined.
        clean_cost (float): clean ARP of the defended model against the
                            clean-trained model, percent; None if undefined.
    """
    defense: str
    attack: str
    epsilon: float
    arp: Optional[float]
    clean_cost: Optional[float]

    @property
    def column(self):
        return attack_column(self.attack, self.epsilon)


@dataclass
class RobustnessMatrix:
    records: List[RobustnessRecord] = field(default_factory=list)

    @property
    def defenses(self):
        return list(dict.fromkeys(r.defense for r in self.records))

    @property
    def columns(self):
        return list(dict.fromkeys(r.column for r in self.records))

    @property
    def shape(self):
        return len(self.defenses), len(self.columns)

    def cell(self, defense, attack, epsilon) -> RobustnessRecord:
        """
        :raises KeyError: if the matrix has no such cell.
        """
        column = attack_column(attack, epsilon)
        for record in self.records:
            if record.defense == defense and record.column == column:
                return record
        raise KeyError(f"no cell for defense '{defense}' and attack '{column}'")

    def clean_cost(self, defense):
        for record in self.records:
            if record.defense == defense:
                return record.clean_cost
        raise KeyError(f"unknown defense '{defense}'")

    def to_csv_text(self):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        columns = self.columns
        writer.writerow(["defense", "clean_cost"] + columns)
        for defense in self.defenses:
            cells = {r.column: r for r in self.records if r.defense == defense}
            writer.writerow(
                [defense, _format(self.clean_cost(defense))]
                + [_format(cells[c].arp) if c in cells else "" for c in columns]
            )
        return buffer.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as handle:
            handle.write(self.to_csv_text())

    @classmethod
    def parse_csv_text(cls, text):
        """
        :raises ValueError: if the header is not a robustness matrix header.
        """
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][:2] != ["defense", "clean_cost"]:
            raise ValueError("not a robustness matrix CSV")

        columns = rows[0][2:]
        records = []
        for row in rows[1:]:
            if not row:
                continue
            defense, clean_cost = row[0], _parse(row[1])
            for column, value in zip(columns, row[2:]):
                label, epsilon = split_attack_column(column)
                records.append(RobustnessRecord(defense, label, epsilon, _parse(value), clean_cost))
        return cls(records)

    @classmethod
    def read_csv(cls, path):
        with open(path, "r", newline="", encoding="utf-8") as handle:
            return cls.parse_csv_text(handle.read())


def _overall_arp(before, after, what):
    try:
        return arp(before, after).overall
    except MetricError as e:
        log.warning(f"{what}: ARP undefined ({e.message})")
        return None


def robust_eval(models: Mapping[str, BranchedModel], test: LabeledBatch,
                attacks: Sequence[AttackConfig]) -> RobustnessMatrix:
    """
    Attack every model with every attack on the test set.

    :param models: defense label -> model; must contain "clean", the
                   clean-trained reference, which becomes the first row.
    :param test: the test batch; each example is attacked against its own labels.
    :param attacks: attack grid.
    :raises KeyError: if `models` has no "clean" entry.
    """
    if CLEAN_DEFENSE not in models:
        raise KeyError("robust_eval needs the clean-trained model under 'clean'")

    reference = evaluate_metrics(models[CLEAN_DEFENSE], test)
    order = [CLEAN_DEFENSE] + [name for name in models if name != CLEAN_DEFENSE]
    records = []
    for defense in order:
        model = models[defense]
        before = evaluate_metrics(model, test)
        clean_cost = _overall_arp(reference, before, f"clean cost of '{defense}'")
        for config in attacks:
            trace = run_attack(model, test, config)
            after = evaluate_metrics(model, test.with_inputs(trace.adversarial_inputs))
            value = _overall_arp(before, after, f"{config.label} against '{defense}'")
            records.append(RobustnessRecord(defense, config.label, config.budget.epsilon, value, clean_cost))
            log.info(f"robustness cell {defense} x {config.label} at eps {config.budget.epsilon:.4g}: ARP {value}")
    return RobustnessMatrix(records)
