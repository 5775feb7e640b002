# -----------------------------------------------------------------------------
# File: test_drivers.py
# Description: Test cases for the FGSM, PGD and APGD drivers and the traces
#              they record.
#
# License: MIT
# -----------------------------------------------------------------------------

import sys
import os
import unittest

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from mtlattack.attack import (
    AttackConfig, EarlyStop, GradientCombiner, PerturbationBudget, apgd_attack, apgd_momentum_step,
    checkpoint_halves_step, fgsm_attack, first_order_prediction, pgd_attack, project, run_attack, signed_direction,
    within_budget,
)
from mtlattack.exceptions.mtlattack_exception import AttackConfigError
from mtlattack.metrics import arp, relative_loss_change
from mtlattack.mtlnet import evaluate_metrics, losses_and_input_gradients
from tests.helpers import interior_batch, regression_specs, tiny_dataset, tiny_model

EPS = 8 / 255


def kink_pattern(model, batch):
    evaluation, _ = model.evaluate(batch)
    return [np.sign(value) for _, value in evaluation.kink_operands()]


class DriverTestCase(unittest.TestCase):
    def setUp(self):
        self.model = tiny_model(seed=1)
        self.batch = tiny_dataset(seed=1).test


class TestZeroBudget(DriverTestCase):
    def test_inputs_do_not_move(self):
        specs = regression_specs(3)
        model, batch = tiny_model(task_specs=specs), tiny_dataset(task_specs=specs).test
        for driver in ("fgsm", "pgd", "apgd"):
            with self.subTest(driver=driver):
                trace = run_attack(model, batch, AttackConfig(driver, "DGBA", 0.0))
                np.testing.assert_array_equal(trace.adversarial_inputs, batch.inputs)
                after = evaluate_metrics(model, batch.with_inputs(trace.adversarial_inputs))
                self.assertEqual(arp(evaluate_metrics(model, batch), after).overall, 0.0)


class TestSignedDrivers(DriverTestCase):
    def test_fgsm_is_one_pgd_step(self):
        for combiner in ("Single(0)", "Total", "SignTotal", "DGBA"):
            with self.subTest(combiner=combiner):
                fgsm = fgsm_attack(self.model, self.batch, AttackConfig("fgsm", combiner, EPS))
                pgd = pgd_attack(self.model, self.batch, AttackConfig("pgd", combiner, EPS, n_iter=1, step_size=EPS))
                np.testing.assert_array_equal(fgsm.adversarial_inputs, pgd.adversarial_inputs)

    def test_fgsm_moves_by_the_signed_direction(self):
        trace = fgsm_attack(self.model, self.batch, AttackConfig("fgsm", "DGBA", EPS))
        losses, grads = losses_and_input_gradients(self.model, self.batch)
        expected = project(self.batch.inputs + EPS * signed_direction(GradientCombiner.dgba(), grads, losses),
                           self.batch.inputs, PerturbationBudget(EPS))
        np.testing.assert_array_equal(trace.adversarial_inputs, expected)

    def test_every_iterate_respects_the_budget(self):
        for driver in ("fgsm", "pgd", "apgd"):
            for combiner in ("Single(1)", "Total", "DGBA"):
                with self.subTest(driver=driver, combiner=combiner):
                    config = AttackConfig(driver, combiner, EPS, n_iter=1 if driver == "fgsm" else 6)
                    trace = run_attack(self.model, self.batch, config)
                    self.assertTrue(within_budget(trace.adversarial_inputs, self.batch.inputs, config.budget))
                    for step in trace.steps:
                        self.assertLessEqual(step.max_deviation, EPS + 1e-12)
                        self.assertTrue(step.in_range)

    def test_pgd_records_every_step(self):
        trace = pgd_attack(self.model, self.batch, AttackConfig("pgd", "DGBA", EPS, n_iter=5))
        self.assertEqual(trace.n_steps, 5)
        self.assertEqual([s.step for s in trace.steps], [0, 1, 2, 3, 4, 5])
        self.assertEqual(trace.steps[0].objective, 0.0)
        self.assertEqual(trace.steps[1].step_size, EPS / 4)

    def test_random_start_is_seeded(self):
        config = AttackConfig("pgd", "DGBA", EPS, n_iter=3, random_start=True, seed=5)
        a = pgd_attack(self.model, self.batch, config)
        b = pgd_attack(self.model, self.batch, config)
        np.testing.assert_array_equal(a.adversarial_inputs, b.adversarial_inputs)
        self.assertGreater(a.steps[0].max_deviation, 0.0)

    def test_early_stop_truncates(self):
        config = AttackConfig("pgd", "DGBA", EPS, n_iter=10)
        trace = pgd_attack(self.model, self.batch, config, early_stop=EarlyStop(threshold=-1.0, extra_steps=2))
        self.assertEqual(trace.n_steps, 3)

    def test_early_stop_that_never_fires(self):
        config = AttackConfig("pgd", "DGBA", EPS, n_iter=4)
        plain = pgd_attack(self.model, self.batch, config)
        stopped = pgd_attack(self.model, self.batch, config, early_stop=EarlyStop(threshold=1e9, extra_steps=0))
        np.testing.assert_array_equal(plain.adversarial_inputs, stopped.adversarial_inputs)

    def test_driver_mismatch(self):
        with self.assertRaises(AttackConfigError):
            pgd_attack(self.model, self.batch, AttackConfig("apgd", "DGBA", EPS))

    def test_single_task_out_of_range(self):
        with self.assertRaises(AttackConfigError):
            run_attack(self.model, self.batch, AttackConfig("pgd", "Single(3)", EPS))


class TestApgd(DriverTestCase):
    def test_full_momentum_weight_gives_the_projected_step(self):
        budget = PerturbationBudget(0.1)
        origin = np.array([[0.5, 0.5]])
        z = np.array([[0.55, 0.42]])
        result = apgd_momentum_step(np.array([[0.52, 0.48]]), np.array([[0.4, 0.6]]), z, 1.0, origin, budget)
        np.testing.assert_allclose(result, z, rtol=0, atol=1e-15)

    def test_best_objective_never_decreases(self):
        trace = apgd_attack(self.model, self.batch, AttackConfig("apgd", "DGBA", EPS, n_iter=12))
        best = [s.best_objective for s in trace.steps]
        self.assertEqual(best, sorted(best))
        self.assertEqual(trace.n_steps, 12)

    def test_returns_the_best_iterate(self):
        trace = apgd_attack(self.model, self.batch, AttackConfig("apgd", "Total", EPS, n_iter=10))
        np.testing.assert_array_equal(trace.adversarial_inputs, trace.best_inputs)
        losses, _ = losses_and_input_gradients(self.model, self.batch.with_inputs(trace.adversarial_inputs))
        self.assertAlmostEqual(float(np.sum(losses)), trace.best_objective, delta=1e-12)

    def test_step_size_halves_when_nothing_improves(self):
        # a zero budget pins every iterate, so every checkpoint halves
        config = AttackConfig("apgd", "DGBA", 0.0, n_iter=10, step_size=1.0)
        trace = apgd_attack(self.model, self.batch, config)
        self.assertEqual([s.step_size for s in trace.steps[1:]],
                         [1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.25, 0.125, 0.0625, 0.03125])

    def test_stall_alone_halves_the_step(self):
        # every step of the window succeeded but the best objective did not move
        self.assertTrue(checkpoint_halves_step(5, 5, False, 1.0, 1.0))
        self.assertFalse(checkpoint_halves_step(5, 5, True, 1.0, 1.0))
        self.assertFalse(checkpoint_halves_step(5, 5, False, 1.5, 1.0))

    def test_oscillation_alone_halves_the_step(self):
        self.assertTrue(checkpoint_halves_step(3, 5, True, 1.5, 1.0))
        self.assertFalse(checkpoint_halves_step(4, 5, True, 1.5, 1.0))
        self.assertTrue(checkpoint_halves_step(2, 3, False, 1.5, 1.0))


class TestFirstOrderPrediction(unittest.TestCase):
    def test_small_signed_steps_match_the_prediction(self):
        eta = 1e-6
        checked = 0
        for seed in range(100):
            model = tiny_model(seed=seed)
            batch = interior_batch(tiny_dataset(seed=seed).test)
            losses, grads = losses_and_input_gradients(model, batch)
            direction = signed_direction(GradientCombiner.dgba(), grads, losses)
            moved = batch.with_inputs(batch.inputs + eta * direction)
            if any(np.any(a != b) for a, b in zip(kink_pattern(model, batch), kink_pattern(model, moved))):
                continue
            new_losses, _ = losses_and_input_gradients(model, moved)
            predicted = first_order_prediction(grads, losses, direction, eta)
            self.assertGreater(predicted, 0.0)
            self.assertAlmostEqual(relative_loss_change(losses, new_losses) / predicted, 1.0, delta=1e-2)
            checked += 1
        self.assertGreater(checked, 0)


if __name__ == "__main__":
    unittest.main()
