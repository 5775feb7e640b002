# -----------------------------------------------------------------------------
# File: reports.py
# Description: Tables derived from grid records. Every ARP value in the attack
#              tables is recomputed from the before/after snapshots stored
#              with its cell. Floats are written with repr() so CSV files
#              parse back to the identical values.
#
# License: MIT
# -----------------------------------------------------------------------------

import csv
import io
import logging
from collections import OrderedDict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from mtlattack.exceptions.mtlattack_exception import MetricError
from mtlattack.metrics.metric_snapshot import MetricSnapshot
from mtlattack.metrics.relative_metrics import ArpResult, arp, rank_correlation


log = logging.getLogger()


def format_value(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(text):
    """Inverse of format_value for numeric cells: "" -> None, else float."""
    return None if text == "" else float(text)


def csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(csv_text(header, rows))
    log.info(f"table written to {path}")


def read_csv(path) -> Tuple[List[str], List[List[str]]]:
    with open(path, "r", newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    return rows[0], rows[1:]


def recompute_arp(record) -> Optional[ArpResult]:
    """ARP of one attack cell from its stored snapshots; None when undefined."""
    before = MetricSnapshot.from_dict(record["before"])
    after = MetricSnapshot.from_dict(record["after"])
    try:
        return arp(before, after)
    except MetricError as e:
        log.warning(f"cell {record['cell_id']}: ARP undefined ({e.message})")
        return None


def attack_table(records: Sequence[dict], n_tasks: int):
    """
    One row per cell: model, driver, combiner, epsilon, per-task ARP, overall ARP.
    """
    header = ["model_id", "driver", "combiner", "epsilon"] + [f"arp_t{t}" for t in range(n_tasks)] + ["overall_arp"]
    rows = []
    for record in records:
        result = recompute_arp(record)
        per_task = list(result.per_task) if result else [None] * n_tasks
        rows.append([record["model_id"], record["driver"], record["combiner"], float(record["epsilon"])]
                    + per_task + [result.overall if result else None])
    return header, rows


def sweep_curves(records: Sequence[dict]) -> "OrderedDict[Tuple[str, str], List[Tuple[float, Optional[float]]]]":
    """
    Unweighted mean overall ARP over models, per (driver, combiner) and
    epsilon, in grid order.
    """
    collected: Dict[Tuple[str, str], Dict[float, List[float]]] = OrderedDict()
    for record in records:
        key = (record["driver"], record["combiner"])
        by_epsilon = collected.setdefault(key, OrderedDict())
        values = by_epsilon.setdefault(float(record["epsilon"]), [])
        result = recompute_arp(record)
        if result is not None:
            values.append(result.overall)

    curves = OrderedDict()
    for key, by_epsilon in collected.items():
        curves[key] = [(eps, float(np.mean(v)) if v else None) for eps, v in sorted(by_epsilon.items())]
    return curves


def sweep_table(curves):
    header = ["driver", "combiner", "epsilon", "overall_arp"]
    rows = [[driver, combiner, eps, value] for (driver, combiner), points in curves.items() for eps, value in points]
    return header, rows


def transferability_table(records: Sequence[dict], n_tasks: int):
    """
    Transferability of every Single(x) attack per model, followed by one
    Spearman row (sharing level vs transferability) per column over the
    models that have a sharing level.
    """
    columns = [f"Single({t})" for t in range(n_tasks)]
    header = ["model_id", "sharing_level", "level_name"] + columns
    rows = []
    for record in records:
        values = record["transferability"]
        rows.append([record["model_id"], record.get("sharing_level"), record.get("level_name")]
                    + [values.get(c) for c in columns])

    correlations = []
    for column in columns:
        pairs = [(r["sharing_level"], r["transferability"].get(column)) for r in records]
        pairs = [(level, value) for level, value in pairs if level is not None and value is not None]
        correlations.append(rank_correlation([p[0] for p in pairs], [p[1] for p in pairs]) if pairs else None)
    rows.append(["spearman", None, None] + correlations)
    return header, rows


def diagnostics_table(records: Sequence[dict]):
    """Dominance ratios and alignment cosines per model."""
    header = ["model_id", "dominance_initial", "dominance_max", "task_a", "task_b", "alignment", "exceeds_kappa_s"]
    rows = []
    for record in records:
        dominance = record["dominance"]
        for alignment in record["alignment"] or [{"task_a": None, "task_b": None, "cosine": None, "exceeds": None}]:
            rows.append([
                record["model_id"], dominance["initial"], dominance["max"],
                alignment["task_a"], alignment["task_b"], alignment["cosine"], alignment["exceeds"],
            ])
    return header, rows


def training_table(records: Sequence[dict]):
    header = ["model_id", "layout", "seed", "parameters", "initial_loss", "final_loss"]
    rows = [[r["model_id"], r["layout"], r["seed"], r["parameters"], r["initial_loss"], r["final_loss"]]
            for r in records]
    return header, rows
