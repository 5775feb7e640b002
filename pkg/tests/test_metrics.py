# -----------------------------------------------------------------------------
# File: test_metrics.py
# Description: Test cases for relative multi-task metrics: ARA, ARP, relative
#              loss change, transferability and rank correlation.
#
# License: MIT
# -----------------------------------------------------------------------------

import sys
import os
import unittest

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from mtlattack.config.orientation import Orientation
from mtlattack.exceptions.mtlattack_exception import MetricError, UndefinedTransferabilityError
from mtlattack.metrics import (
    MetricSnapshot, ara, arp, rank_correlation, relative_loss_change, transferability,
)

LOWER = Orientation.LOWER_BETTER
HIGHER = Orientation.HIGHER_BETTER


class TestAra(unittest.TestCase):
    def test_identical_models(self):
        self.assertEqual(ara([0.7, 0.8], [0.7, 0.8]), 0.0)

    def test_two_tasks(self):
        self.assertAlmostEqual(ara([0.5, 0.9], [1.0, 1.0]), -0.3, delta=1e-12)

    def test_doubled_accuracy(self):
        self.assertAlmostEqual(ara([0.8], [0.4]), 1.0, delta=1e-12)

    def test_zero_baseline(self):
        with self.assertRaises(MetricError):
            ara([0.5], [0.0])

    def test_length_mismatch(self):
        with self.assertRaises(MetricError):
            ara([0.5, 0.6], [0.5])


class TestArp(unittest.TestCase):
    def test_no_change(self):
        snapshot = MetricSnapshot.from_lists([[("l1_error", LOWER, 0.4)], [("accuracy", HIGHER, 0.9)]])
        result = arp(snapshot, snapshot)
        self.assertEqual(result.overall, 0.0)
        self.assertEqual(result.per_task, (0.0, 0.0))

    def test_lower_better_rise(self):
        before = MetricSnapshot.from_lists([[("l1_error", LOWER, 1.0)]])
        after = MetricSnapshot.from_lists([[("l1_error", LOWER, 1.5)]])
        self.assertAlmostEqual(arp(before, after).overall, 50.0, delta=1e-12)

    def test_higher_better_drops_are_averaged_within_a_task(self):
        before = MetricSnapshot.from_lists([[("miou", HIGHER, 40.0), ("pixel_acc", HIGHER, 60.0)]])
        after = MetricSnapshot.from_lists([[("miou", HIGHER, 20.0), ("pixel_acc", HIGHER, 30.0)]])
        result = arp(before, after)
        self.assertAlmostEqual(result.per_task[0], 50.0, delta=1e-12)
        self.assertAlmostEqual(result.overall, 50.0, delta=1e-12)

    def test_improvement_is_negative(self):
        before = MetricSnapshot.from_lists([[("accuracy", HIGHER, 0.5)]])
        after = MetricSnapshot.from_lists([[("accuracy", HIGHER, 0.75)]])
        self.assertAlmostEqual(arp(before, after).overall, -50.0, delta=1e-12)

    def test_structure_mismatch(self):
        before = MetricSnapshot.from_lists([[("accuracy", HIGHER, 0.5)]])
        after = MetricSnapshot.from_lists([[("accuracy", LOWER, 0.5)]])
        with self.assertRaises(MetricError):
            arp(before, after)

    def test_zero_before_value(self):
        before = MetricSnapshot.from_lists([[("l1_error", LOWER, 0.0)]])
        with self.assertRaises(MetricError):
            arp(before, before)

    @staticmethod
    def random_pair(rng):
        """Before and after snapshots of four tasks with one to three metrics each."""
        counts = [1, 3, 2, 1]
        orientations = [[HIGHER if rng.random() < 0.5 else LOWER for _ in range(n)] for n in counts]
        before = rng.uniform(0.1, 2.0, size=sum(counts))
        after = rng.uniform(0.1, 2.0, size=sum(counts))

        def snapshot(values):
            tasks, k = [], 0
            for task, n in enumerate(counts):
                tasks.append([(f"m{j}", orientations[task][j], values[k + j]) for j in range(n)])
                k += n
            return MetricSnapshot.from_lists(tasks)

        return snapshot(before), snapshot(after), orientations

    def test_flipping_orientations_negates_every_task(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            before, after, orientations = self.random_pair(rng)
            flipped = [[LOWER if o is HIGHER else HIGHER for o in task] for task in orientations]
            same = arp(before, after)
            opposite = arp(*[MetricSnapshot.from_lists([
                [(m.name, flipped[t][j], m.value) for j, m in enumerate(metrics)] for t, metrics in enumerate(s.tasks)
            ]) for s in (before, after)])
            np.testing.assert_allclose(opposite.per_task, [-p for p in same.per_task], rtol=0, atol=1e-12)
            self.assertAlmostEqual(opposite.overall, -same.overall, delta=1e-12)

    def test_rescaling_the_metrics_leaves_arp_unchanged(self):
        rng = np.random.default_rng(1)
        for scale in (1e-3, 7.5, 1e4):
            before, after, _ = self.random_pair(rng)
            scaled = [MetricSnapshot.from_lists([
                [(m.name, m.orientation, scale * m.value) for m in metrics] for metrics in s.tasks
            ]) for s in (before, after)]
            np.testing.assert_allclose(arp(*scaled).per_task, arp(before, after).per_task, rtol=0, atol=1e-9)

    def test_tasks_contribute_independently_and_equally(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            before, after, _ = self.random_pair(rng)
            result = arp(before, after)
            for task in range(before.n_tasks):
                alone = arp(MetricSnapshot((before.tasks[task],)), MetricSnapshot((after.tasks[task],)))
                self.assertAlmostEqual(alone.overall, result.per_task[task], delta=1e-12)
            self.assertAlmostEqual(result.overall, float(np.mean(result.per_task)), delta=1e-12)


class TestMetricSnapshot(unittest.TestCase):
    def test_dict_round_trip(self):
        snapshot = MetricSnapshot.from_lists([[("mean_angle", LOWER, 0.3), ("within_threshold", HIGHER, 0.6)]])
        self.assertEqual(MetricSnapshot.from_dict(snapshot.to_dict()), snapshot)

    def test_orientation_is_stored_by_name(self):
        snapshot = MetricSnapshot.from_lists([[("accuracy", HIGHER, 0.5)]])
        self.assertEqual(snapshot.to_dict()["tasks"][0][0]["orientation"], "HIGHER_BETTER")

    def test_non_finite_value(self):
        with self.assertRaises(MetricError):
            MetricSnapshot.from_lists([[("accuracy", HIGHER, float("nan"))]])

    def test_empty_snapshot(self):
        with self.assertRaises(MetricError):
            MetricSnapshot(())

    def test_malformed_dict(self):
        with self.assertRaises(MetricError):
            MetricSnapshot.from_dict({"tasks": [[{"name": "accuracy"}]]})


class TestRelativeLossChange(unittest.TestCase):
    def test_unchanged_losses(self):
        self.assertEqual(relative_loss_change([0.3, 0.7], [0.3, 0.7]), 0.0)

    def test_two_tasks(self):
        self.assertAlmostEqual(relative_loss_change([1.0, 2.0], [2.0, 2.0]), 1.0, delta=1e-12)

    def test_doubling_every_loss_gives_the_task_count(self):
        self.assertAlmostEqual(relative_loss_change([0.1, 0.2, 0.3], [0.2, 0.4, 0.6]), 3.0, delta=1e-12)
        self.assertAlmostEqual(relative_loss_change([0.1, 0.2, 0.3], [0.2, 0.4, 0.6], mean=True), 1.0, delta=1e-12)

    def test_non_positive_initial_loss(self):
        with self.assertRaises(MetricError):
            relative_loss_change([0.0, 1.0], [1.0, 1.0])


class TestTransferability(unittest.TestCase):
    def test_three_tasks(self):
        report = transferability([10.0, 50.0, 15.0], attacked_task=1)
        self.assertAlmostEqual(report.value, 0.25, delta=1e-12)
        self.assertEqual(report.clamped, report.value)

    def test_untouched_tasks(self):
        self.assertEqual(transferability([20.0, 0.0, 0.0], attacked_task=0).value, 0.0)

    def test_clamped_view(self):
        report = transferability([10.0, 30.0], attacked_task=0)
        self.assertAlmostEqual(report.value, 3.0, delta=1e-12)
        self.assertEqual(report.clamped, 1.0)

    def test_undefined_without_degradation(self):
        with self.assertRaises(UndefinedTransferabilityError):
            transferability([0.0, 10.0], attacked_task=0)

    def test_single_task(self):
        with self.assertRaises(MetricError):
            transferability([10.0], attacked_task=0)


class TestRankCorrelation(unittest.TestCase):
    def test_single_level_is_undefined(self):
        self.assertIsNone(rank_correlation([2, 2, 2], [0.1, 0.2, 0.3]))

    def test_monotone_values(self):
        self.assertAlmostEqual(rank_correlation([0, 1, 2, 3], [0.1, 0.4, 0.5, 0.9]), 1.0, delta=1e-12)

    def test_reversed_values(self):
        self.assertAlmostEqual(rank_correlation([0, 1, 2], [3.0, 2.0, 1.0]), -1.0, delta=1e-12)


if __name__ == "__main__":
    unittest.main()
