# -----------------------------------------------------------------------------
# File: test_benchmarks.py
# Description: Long-running directional checks on the reference benchmark.
#              Skipped unless MTLATTACK_RUN_BENCHMARKS=1.
#
# License: MIT
# -----------------------------------------------------------------------------

import sys
import os
import shutil
import tempfile
import unittest
from collections import defaultdict

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from mtlattack.advtrain import CLEAN_DEFENSE, split_attack_column
from mtlattack.attack import AttackConfig, run_attack, within_budget
from mtlattack.config.experiment_config import ExperimentConfig
from mtlattack.labcli import cmd_advtrain, cmd_attack, cmd_diagnose, cmd_train
from mtlattack.metrics import rank_correlation, relative_loss_change
from mtlattack.mtlnet import train
from tests.helpers import tiny_dataset, tiny_model

REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
RUN_BENCHMARKS = os.environ.get("MTLATTACK_RUN_BENCHMARKS") == "1"


def reference_config(output_dir, **sections):
    config = ExperimentConfig.from_file(os.path.join(REPO_ROOT, "configs", "reference.yaml"))
    data = config.to_dict(include_output=False)
    for name, changes in sections.items():
        data[name] = None if changes is None else dict(data[name], **changes)
    data["output_dir"] = output_dir
    return ExperimentConfig.from_dict(data)


@unittest.skipUnless(RUN_BENCHMARKS, "set MTLATTACK_RUN_BENCHMARKS=1 to run the benchmarks")
class TestSmallScaleBenchmarks(unittest.TestCase):
    def test_budget_holds_on_a_thousand_traces(self):
        violations = 0
        for index in range(1000):
            seed = index // 12
            driver = ("fgsm", "pgd", "apgd")[index % 3]
            combiner = ("Single(0)", "Total", "SignTotal", "DGBA")[(index // 3) % 4]
            model, batch = tiny_model(seed=seed), tiny_dataset(seed=seed, sizes=(4, 6)).test
            eps = float(np.random.default_rng(index).uniform(0.0, 16 / 255))
            config = AttackConfig(driver, combiner, eps, n_iter=1 if driver == "fgsm" else 5,
                                  random_start=driver == "pgd")
            trace = run_attack(model, batch, config)
            if not within_budget(trace.adversarial_inputs, batch.inputs, config.budget):
                violations += 1
            violations += sum(1 for s in trace.steps if s.max_deviation > eps + 1e-12 or not s.in_range)
        self.assertEqual(violations, 0)

    def test_single_sample_overfits(self):
        dataset = tiny_dataset(sizes=(1, 1))
        result = train(tiny_model(), dataset.train, epochs=1000, lr=0.05, seed=0)
        self.assertLess(result.loss_trace[-1], 0.05 * result.initial_loss)

    def test_more_steps_increase_the_loss_change(self):
        dataset = tiny_dataset(sizes=(64, 32), input_dim=16)
        model = train(tiny_model(input_dim=16), dataset.train, epochs=30, lr=0.05, seed=0).model
        changes = []
        for n_iter in (1, 20):
            trace = run_attack(model, dataset.test, AttackConfig("pgd", "DGBA", 8 / 255, n_iter=n_iter))
            changes.append(relative_loss_change(trace.initial_losses, trace.final_losses))
        self.assertGreaterEqual(changes[1], changes[0])


@unittest.skipUnless(RUN_BENCHMARKS, "set MTLATTACK_RUN_BENCHMARKS=1 to run the benchmarks")
class TestReferenceBenchmark(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp()
        cls.config = reference_config(
            os.path.join(cls.tmp, "sweep"), models={"replicas": 5},
            attacks={"drivers": ["pgd", "apgd"], "epsilons": [0, "2/255", "4/255", "8/255", "15/255"]},
        )
        cmd_train(cls.config, jobs=4)
        cls.records = cmd_attack(cls.config, jobs=4)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)

    def test_dgba_has_the_largest_mean_arp(self):
        means = defaultdict(list)
        for record in self.records:
            if record["arp"] is not None:
                means[(record["driver"], record["combiner"], record["epsilon"])].append(record["arp"])

        for driver in ("pgd", "apgd"):
            for eps in self.config.attacks.epsilons:
                if eps < 2 / 255:
                    continue
                dgba = np.mean(means[(driver, "DGBA", eps)])
                for combiner in ("Single(0)", "Single(1)", "Single(2)", "Total", "SignTotal"):
                    with self.subTest(driver=driver, epsilon=eps, combiner=combiner):
                        self.assertGreaterEqual(dgba, np.mean(means[(driver, combiner, eps)]))

    def test_transferability_grows_with_sharing(self):
        records = cmd_diagnose(self.config, jobs=4)
        for column in ("Single(0)", "Single(1)", "Single(2)"):
            levels, values = [], []
            for record in records:
                value = record["transferability"][column]
                if value is not None:
                    levels.append(record["sharing_level"])
                    values.append(value)
            with self.subTest(column=column):
                self.assertGreater(rank_correlation(levels, values), 0.0)


@unittest.skipUnless(RUN_BENCHMARKS, "set MTLATTACK_RUN_BENCHMARKS=1 to run the benchmarks")
class TestTaskCorrelation(unittest.TestCase):
    def test_unrelated_independent_tasks_transfer_less(self):
        with tempfile.TemporaryDirectory() as tmp:
            results = {}
            for rho, level in ((0.0, 0), (0.8, 5)):
                config = reference_config(os.path.join(tmp, f"rho{rho}"), dataset={"rho": rho},
                                          models={"sharing_levels": [level]}, fat=None)
                cmd_train(config)
                (record,) = cmd_diagnose(config)
                results[rho] = record["transferability"]
        for column, value in results[0.0].items():
            with self.subTest(column=column):
                self.assertIsNotNone(value)
                self.assertLess(value, results[0.8][column])
                self.assertLess(value, 0.25)


@unittest.skipUnless(RUN_BENCHMARKS, "set MTLATTACK_RUN_BENCHMARKS=1 to run the benchmarks")
class TestAdversarialTraining(unittest.TestCase):
    def test_dgba_training_halves_every_attack(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = reference_config(os.path.join(tmp, "fat"), models={"sharing_levels": [5]})
            cmd_train(config)
            matrices = cmd_advtrain(config, jobs=2)

        for model_id, matrix in matrices.items():
            for column in matrix.columns:
                label, eps = split_attack_column(column)
                clean = matrix.cell(CLEAN_DEFENSE, label, eps).arp
                defended = matrix.cell("DGBA", label, eps).arp
                with self.subTest(model=model_id, attack=column):
                    self.assertLess(defended, clean)
                    self.assertLessEqual(defended, 0.5 * clean)

            for defense in matrix.defenses:
                if defense == CLEAN_DEFENSE:
                    continue
                row = {split_attack_column(c)[0]: matrix.cell(defense, *split_attack_column(c)).arp
                       for c in matrix.columns}
                dgba = row["PGD-DGBA"]
                with self.subTest(model=model_id, defense=defense):
                    self.assertGreaterEqual(dgba, max(row.values()))


if __name__ == "__main__":
    unittest.main()
