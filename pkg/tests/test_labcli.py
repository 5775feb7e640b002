# -----------------------------------------------------------------------------
# File: test_labcli.py
# Description: End-to-end test cases for the laboratory commands on a tiny
#              experiment: checkpoints, record files, resumption, parallel
#              workers, derived tables and plots, and the exit status of the
#              command line.
#
# License: MIT
# -----------------------------------------------------------------------------

import sys
import os
import contextlib
import io
import json
import shutil
import tempfile
import unittest

import yaml

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from mtlattack.advtrain import CLEAN_DEFENSE, RobustnessMatrix
from mtlattack.config.experiment_config import ExperimentConfig
from mtlattack.exceptions.mtlattack_exception import CheckpointError, ConfigError
from mtlattack.labcli import (
    RunContext, cmd_advtrain, cmd_attack, cmd_diagnose, cmd_report, cmd_sweep, cmd_train, load_records,
)
from mtlattack.labcli.grid_runner import RecordStore
from mtlattack.labcli.main import main
from tests.helpers import tiny_config_dict


def read_bytes(path):
    with open(path, "rb") as handle:
        return handle.read()


class LabTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def config(self, name="a", **overrides):
        return ExperimentConfig.from_dict(tiny_config_dict(os.path.join(self.tmp, name), **overrides))

    def run_file(self, ctx, *parts):
        return os.path.join(ctx.run_dir, *parts)


class TestTrain(LabTestCase):
    def test_one_checkpoint_per_grid_model(self):
        config = self.config()
        records = cmd_train(config)
        ctx = RunContext(config)
        self.assertEqual([r["model_id"] for r in records], ["L0-s0", "L1-s0"])
        self.assertEqual(sorted(os.listdir(self.run_file(ctx, "models"))), ["L0-s0.json", "L1-s0.json"])
        self.assertTrue(os.path.exists(self.run_file(ctx, "tables", "training.csv")))

    def test_checkpoints_are_byte_identical_across_runs(self):
        first, second = self.config("a"), self.config("b")
        cmd_train(first)
        cmd_train(second)
        for model_id in ("L0-s0", "L1-s0"):
            self.assertEqual(read_bytes(RunContext(first).model_path(model_id)),
                             read_bytes(RunContext(second).model_path(model_id)))

    def test_run_directory_follows_the_config_hash(self):
        config = self.config()
        self.assertEqual(RunContext(config).run_dir, os.path.join(self.tmp, "a", "runs", config.config_hash))


class TestAttack(LabTestCase):
    def test_attack_needs_trained_models(self):
        with self.assertRaises(CheckpointError):
            cmd_attack(self.config())

    def test_every_cell_is_recorded(self):
        config = self.config()
        cmd_train(config)
        records = cmd_attack(config)
        # 2 models x 2 drivers x (2 singles + DGBA) x 2 budgets
        self.assertEqual(len(records), 24)
        for record in records:
            if record["epsilon"] == 0.0:
                self.assertEqual(record["arp"], 0.0)
            self.assertLessEqual(record["trace"]["max_deviation"], record["epsilon"] + 1e-12)
        payload = load_records(os.path.join(RunContext(config).run_dir, "records.json"), "attack")
        self.assertEqual(payload["config_hash"], config.config_hash)

    def test_resumed_and_parallel_runs_write_identical_records(self):
        full, resumed, parallel = self.config("a"), self.config("b"), self.config("c")
        for config in (full, resumed, parallel):
            cmd_train(config)
        cmd_attack(full)

        # an interrupted run: only the first five cells are on disk
        done = load_records(os.path.join(RunContext(full).run_dir, "records.json"))["cells"]
        ctx = RunContext(resumed)
        store = ctx.store("attack", "records.json")
        for record in done[:5]:
            store.add(record)
        cmd_attack(resumed)
        cmd_attack(parallel, jobs=2)

        expected = read_bytes(os.path.join(RunContext(full).run_dir, "records.json"))
        self.assertEqual(read_bytes(os.path.join(ctx.run_dir, "records.json")), expected)
        self.assertEqual(read_bytes(os.path.join(RunContext(parallel).run_dir, "records.json")), expected)

    def test_records_of_another_run_are_refused(self):
        config = self.config()
        ctx = RunContext(config)
        RecordStore(ctx.path("records.json"), "attack", ctx.header()).flush()
        with self.assertRaises(CheckpointError):
            RecordStore(ctx.path("records.json"), "attack", dict(ctx.header(), config_hash="other"))


class TestSweepAndReport(LabTestCase):
    def test_sweep_writes_tables_and_deterministic_plots(self):
        first, second = self.config("a"), self.config("b")
        for config in (first, second):
            cmd_train(config)
            curves = cmd_sweep(config)

        self.assertEqual(len(curves), 6)
        for points in curves.values():
            self.assertEqual(points[0], (0.0, 0.0))
        for name in ("sweep_fgsm.svg", "sweep_pgd.svg"):
            a = self.run_file(RunContext(first), "plots", name)
            b = self.run_file(RunContext(second), "plots", name)
            self.assertEqual(read_bytes(a), read_bytes(b))
        self.assertTrue(os.path.exists(self.run_file(RunContext(first), "tables", "sweep.csv")))

    def test_report_rederives_the_tables(self):
        config = self.config()
        cmd_train(config)
        cmd_sweep(config)
        ctx = RunContext(config)
        tables = self.run_file(ctx, "tables")
        before = {name: read_bytes(os.path.join(tables, name)) for name in os.listdir(tables)}

        shutil.rmtree(tables)
        written = cmd_report(config)
        self.assertEqual(len(written), 2)
        after = {name: read_bytes(os.path.join(tables, name)) for name in os.listdir(tables)}
        self.assertEqual(after, before)

    def test_report_without_records(self):
        with self.assertRaises(CheckpointError):
            cmd_report(self.config())


class TestDiagnose(LabTestCase):
    def test_diagnose_records(self):
        config = self.config()
        cmd_train(config)
        records = cmd_diagnose(config)
        self.assertEqual(len(records), 2)
        for record in records:
            self.assertEqual(set(record["transferability"]), {"Single(0)", "Single(1)"})
            self.assertEqual([(a["task_a"], a["task_b"]) for a in record["alignment"]], [(0, 1)])
            self.assertIn(record["dominance"]["exceeds_kappa_d"], (True, False))
        self.assertEqual(records[0]["level_name"], "IND/0L")
        ctx = RunContext(config)
        for name in ("tables/transferability.csv", "tables/diagnostics.csv", "plots/transferability.svg"):
            self.assertTrue(os.path.exists(self.run_file(ctx, *name.split("/"))))


class TestAdvtrain(LabTestCase):
    def test_robustness_matrix_per_model(self):
        config = self.config()
        cmd_train(config)
        matrices = cmd_advtrain(config)
        self.assertEqual(sorted(matrices), ["L0-s0", "L1-s0"])
        ctx = RunContext(config)
        for model_id, matrix in matrices.items():
            self.assertEqual(matrix.defenses, [CLEAN_DEFENSE, "DGBA"])
            self.assertEqual(matrix.shape, (2, 1))
            self.assertTrue(os.path.exists(ctx.robust_path(model_id, "DGBA")))
            parsed = RobustnessMatrix.read_csv(self.run_file(ctx, "tables", f"robustness_{model_id}.csv"))
            self.assertEqual(parsed.records, matrix.records)

    def test_advtrain_needs_a_fat_section(self):
        with self.assertRaises(ConfigError):
            cmd_advtrain(self.config(fat=None))


class TestMain(LabTestCase):
    def write_config(self, data):
        path = os.path.join(self.tmp, "config.yaml")
        with open(path, "w", encoding="utf-8") as handle:
            yaml.safe_dump(data, handle)
        return path

    def invoke(self, *argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            status = main(list(argv))
        return status, stdout.getvalue(), stderr.getvalue()

    def test_train_succeeds(self):
        path = self.write_config(tiny_config_dict("unused"))
        out = os.path.join(self.tmp, "cli")
        status, stdout, _ = self.invoke("train", "--config", path, "--out", out)
        self.assertEqual(status, 0)
        self.assertTrue(stdout.strip().startswith(os.path.join(out, "runs")))

    def test_invalid_config_exits_with_two(self):
        path = self.write_config(tiny_config_dict("unused", seed=-1))
        status, _, stderr = self.invoke("train", "--config", path)
        self.assertEqual(status, 2)
        self.assertEqual(json.loads(stderr.strip().splitlines()[-1])["error"], "invalid_config")

    def test_missing_checkpoints_exit_with_one(self):
        path = self.write_config(tiny_config_dict("unused"))
        status, _, stderr = self.invoke("attack", "--config", path, "--out", os.path.join(self.tmp, "cli"))
        self.assertEqual(status, 1)
        self.assertEqual(json.loads(stderr.strip().splitlines()[-1])["error"], "checkpoint_error")

    def test_unwritable_output_exits_with_one(self):
        path = self.write_config(tiny_config_dict("unused"))
        blocker = os.path.join(self.tmp, "blocker")
        with open(blocker, "w", encoding="utf-8") as handle:
            handle.write("not a directory")
        status, stdout, stderr = self.invoke("train", "--config", path, "--out", os.path.join(blocker, "run"))
        self.assertEqual(status, 1)
        self.assertEqual(stdout, "")
        self.assertNotIn("Traceback", stderr)
        error = json.loads(stderr.strip().splitlines()[-1])
        self.assertEqual(error["error"], "checkpoint_error")
        self.assertEqual(error["type"], "CheckpointError")

    def test_jobs_must_be_positive(self):
        path = self.write_config(tiny_config_dict("unused"))
        status, _, _ = self.invoke("train", "--config", path, "--jobs", "0")
        self.assertEqual(status, 2)


if __name__ == "__main__":
    unittest.main()
