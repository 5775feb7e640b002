# -----------------------------------------------------------------------------
# File: test_experiment_config.py
# Description: Test cases for the experiment configuration: defaults,
#              validation, YAML loading, the grids it expands to and its hash.
#
# License: MIT
# -----------------------------------------------------------------------------

import sys
import os
import tempfile
import unittest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from mtlattack.config.experiment_config import ExperimentConfig
from mtlattack.exceptions.mtlattack_exception import ConfigError
from mtlattack.mtlnet import format_layout
from tests.helpers import tiny_config_dict

REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))


class TestDefaults(unittest.TestCase):
    def setUp(self):
        self.config = ExperimentConfig()

    def test_default_grid(self):
        self.assertEqual(self.config.n_tasks, 3)
        self.assertEqual([e.model_id for e in self.config.model_entries()],
                         [f"L{level}-s0" for level in range(6)])
        self.assertIsNone(self.config.fat)

    def test_default_attack_grid(self):
        configs = self.config.attack_configs()
        # 3 drivers x (3 singles + Total + SignTotal + DGBA) x 6 budgets
        self.assertEqual(len(configs), 108)
        self.assertEqual(configs[0].label, "FGSM-Single(0)")
        self.assertEqual(configs[0].budget.epsilon, 0.0)
        self.assertEqual(configs[-1].label, "APGD-DGBA")
        self.assertEqual(configs[-1].budget.epsilon, 15 / 255)


class TestValidation(unittest.TestCase):
    def check_invalid(self, **overrides):
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_dict(tiny_config_dict("out", **overrides))

    def test_unknown_top_level_key(self):
        self.check_invalid(colour="blue")

    def test_unknown_section_key(self):
        self.check_invalid(training={"epochs": 1, "momentum": 0.9})

    def test_rho_out_of_range(self):
        self.check_invalid(dataset={"n_tasks": 2, "rho": 1.5})

    def test_sharing_level_beyond_blocks(self):
        self.check_invalid(models={"sharing_levels": [3], "blocks": 2})

    def test_empty_model_grid(self):
        self.check_invalid(models={"sharing_levels": [], "layouts": []})

    def test_descending_epsilons(self):
        self.check_invalid(attacks={"epsilons": ["8/255", "4/255"]})

    def test_unknown_driver(self):
        self.check_invalid(attacks={"drivers": ["cw"]})

    def test_unknown_combiner(self):
        self.check_invalid(attacks={"combiners": ["MGDA"]})

    def test_single_beyond_the_task_count(self):
        self.check_invalid(attacks={"combiners": ["Single(2)"]})

    def test_layout_of_the_wrong_task_count(self):
        self.check_invalid(models={"layouts": ["AS"]})

    def test_malformed_layout(self):
        self.check_invalid(models={"layouts": ["[[{0}, {1}], [{0, 1}]]"]})

    def test_fat_tau_beyond_steps(self):
        self.check_invalid(fat={"defenses": ["DGBA"], "steps": 2, "tau": 3})

    def test_alignment_pair_outside_the_tasks(self):
        self.check_invalid(diagnose={"alignment_pairs": [[0, 4]]})

    def test_config_errors_are_value_errors(self):
        with self.assertRaises(ValueError):
            ExperimentConfig.from_dict({"seed": -1})


class TestExpansion(unittest.TestCase):
    def test_layout_presets_and_replicas(self):
        config = ExperimentConfig.from_dict({"models": {"sharing_levels": [], "layouts": ["AS", "IND"],
                                                        "replicas": 2}})
        entries = config.model_entries()
        self.assertEqual([e.model_id for e in entries], ["AS-s0", "AS-s1", "IND-s0", "IND-s1"])
        self.assertEqual(entries[2].layout.block_count, 15)
        self.assertIsNone(entries[0].sharing_level)

    def test_explicit_layout_text(self):
        text = "[[{0, 1}], [{0}, {1}]]"
        config = ExperimentConfig.from_dict(tiny_config_dict("out", models={"sharing_levels": [], "layouts": [text],
                                                                            "blocks": 2}))
        self.assertEqual(config.describe_models(), {"layout0-s0": format_layout(config.model_entries()[0].layout)})

    def test_fat_configs(self):
        config = ExperimentConfig.from_dict(tiny_config_dict("out"))
        (defense,) = config.fat.defense_set(config.n_tasks)
        fat = config.fat.fat_config(defense, config.seed)
        self.assertEqual(fat.steps, 2)
        self.assertEqual(fat.tau, 2)
        self.assertEqual(fat.inner_attack.label, "PGD-DGBA")
        self.assertEqual([a.label for a in config.fat.eval_attacks(config.n_tasks, 0)], ["PGD-DGBA"])

    def test_single_wildcard_expands_per_task(self):
        config = ExperimentConfig.from_dict(tiny_config_dict("out"))
        labels = [c.combiner.label for c in config.attack_configs() if c.driver.value == "fgsm"]
        self.assertEqual(labels, ["Single(0)", "Single(0)", "Single(1)", "Single(1)", "DGBA", "DGBA"])


class TestHash(unittest.TestCase):
    def test_hash_ignores_key_order(self):
        data = tiny_config_dict("out")
        reordered = dict(reversed(list(data.items())))
        self.assertEqual(ExperimentConfig.from_dict(data).config_hash,
                         ExperimentConfig.from_dict(reordered).config_hash)

    def test_hash_ignores_the_output_directory(self):
        config = ExperimentConfig.from_dict(tiny_config_dict("a"))
        self.assertEqual(config.config_hash, config.with_overrides(output_dir="b").config_hash)

    def test_hash_follows_the_seed(self):
        config = ExperimentConfig.from_dict(tiny_config_dict("a"))
        self.assertNotEqual(config.config_hash, config.with_overrides(seed=1).config_hash)


class TestFromFile(unittest.TestCase):
    def test_bundled_configs_load(self):
        for name in ("reference.yaml", "smoke.yaml"):
            with self.subTest(config=name):
                config = ExperimentConfig.from_file(os.path.join(REPO_ROOT, "configs", name))
                self.assertIsNotNone(config.fat)
                self.assertTrue(config.model_entries())

    def test_smoke_config_values(self):
        config = ExperimentConfig.from_file(os.path.join(REPO_ROOT, "configs", "smoke.yaml"))
        self.assertEqual(config.attacks.epsilons, (0.0, 4 / 255))
        self.assertEqual(config.output_dir, "out-smoke")

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_file("/nonexistent/config.yaml")

    def test_invalid_yaml(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "bad.yaml")
            with open(path, "w", encoding="utf-8") as handle:
                handle.write("dataset: [unclosed\n")
            with self.assertRaises(ConfigError):
                ExperimentConfig.from_file(path)


if __name__ == "__main__":
    unittest.main()
