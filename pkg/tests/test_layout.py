# -----------------------------------------------------------------------------
# File: test_layout.py
# Description: Test cases for branched layouts: validation, the text codec,
#              sharing-level and random layouts, presets and the one-block
#              split used to check parameter additivity.
#
# License: MIT
# -----------------------------------------------------------------------------

import sys
import os
import unittest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from mtlattack.exceptions.mtlattack_exception import LayoutError
from mtlattack.mtlnet import (
    LAYOUT_PRESETS, Layout, build_model, default_task_specs, format_layout, layout_for_sharing_level,
    layout_preset, parse_layout, random_layout, sharing_level_name, split_candidates, split_task_set,
    validate_layout,
)


class TestValidateLayout(unittest.TestCase):
    def test_all_shared_preset_is_valid(self):
        self.assertIsNone(validate_layout(layout_preset("AS")))

    def test_independent_preset_is_valid(self):
        self.assertIsNone(validate_layout(layout_preset("IND")))

    def test_every_preset_is_valid(self):
        for name in LAYOUT_PRESETS:
            with self.subTest(preset=name):
                self.assertTrue(layout_preset(name).is_valid())

    def test_re_merging_is_a_violation_at_depth_two(self):
        violation = validate_layout(Layout([[{0}, {1}], [{0, 1}]]))
        self.assertIsNotNone(violation)
        self.assertEqual(violation.depth, 2)

    def test_overlapping_sets(self):
        violation = validate_layout(Layout([[{0, 1}, {1, 2}]]))
        self.assertEqual(violation.depth, 1)
        self.assertIn("appears in both", violation.message)

    def test_missing_task(self):
        violation = validate_layout(Layout([[{0, 1, 2}], [{0}, {1}]]))
        self.assertEqual(violation.depth, 2)

    def test_empty_layout(self):
        self.assertEqual(validate_layout(Layout(())).depth, 0)

    def test_check_raises_with_depth(self):
        with self.assertRaises(LayoutError) as ctx:
            Layout([[{0}, {1}], [{0, 1}]]).check()
        self.assertEqual(ctx.exception.depth, 2)


class TestLayoutText(unittest.TestCase):
    def test_presets_format_back_to_their_text(self):
        for name, text in LAYOUT_PRESETS.items():
            with self.subTest(preset=name):
                self.assertEqual(format_layout(parse_layout(text)), text)

    def test_set_order_is_kept(self):
        layout = parse_layout("[[{0, 1, 2}], [{1}, {0, 2}]]")
        self.assertEqual(layout.partitions[1], ((1,), (0, 2)))

    def test_malformed_text(self):
        for text in ("[[{0, 1}", "[[{0, a}]]", "[[{0}]] extra", "{0}"):
            with self.subTest(text=text):
                with self.assertRaises(LayoutError):
                    parse_layout(text)


class TestBlockCounts(unittest.TestCase):
    def test_all_shared_has_one_block_per_depth(self):
        self.assertEqual(layout_preset("AS").block_count, 5)

    def test_independent_has_one_block_per_task_and_depth(self):
        self.assertEqual(layout_preset("IND").block_count, 15)

    def test_mixed_layout(self):
        self.assertEqual(parse_layout("[[{0, 1, 2}], [{1}, {0, 2}]]").block_count, 3)

    def test_model_instantiates_one_block_per_task_set(self):
        model = build_model(parse_layout("[[{0, 1, 2}], [{1}, {0, 2}]]"), 4, default_task_specs(3), 0, 6)
        blocks = {name.rsplit(".", 1)[0] for name in model.params if name.startswith("block.")}
        self.assertEqual(blocks, {"block.1.0", "block.2.0", "block.2.1"})


class TestSharingLevels(unittest.TestCase):
    def test_level_zero_is_independent(self):
        self.assertEqual(layout_for_sharing_level(0, 5, 3).block_count, 15)

    def test_full_level_is_all_shared(self):
        self.assertEqual(format_layout(layout_for_sharing_level(5, 5, 3)), LAYOUT_PRESETS["AS"])

    def test_intermediate_level(self):
        layout = layout_for_sharing_level(2, 4, 3)
        self.assertEqual(layout.block_count, 2 + 3 * 2)
        self.assertTrue(layout.is_valid())

    def test_level_out_of_range(self):
        with self.assertRaises(LayoutError):
            layout_for_sharing_level(6, 5, 3)

    def test_level_names(self):
        self.assertEqual(sharing_level_name(0, 5), "IND/0L")
        self.assertEqual(sharing_level_name(3, 5), "3L")
        self.assertEqual(sharing_level_name(5, 5), "AS/5L")


class TestRandomLayouts(unittest.TestCase):
    def test_random_layouts_are_valid(self):
        for seed in range(30):
            with self.subTest(seed=seed):
                layout = random_layout(4, 5, seed)
                self.assertTrue(layout.is_valid())
                self.assertEqual(layout.tasks, (0, 1, 2, 3))

    def test_random_layouts_are_seeded(self):
        self.assertEqual(random_layout(4, 5, 11), random_layout(4, 5, 11))


class TestSplitTaskSet(unittest.TestCase):
    def test_each_split_adds_exactly_one_block_of_parameters(self):
        specs = default_task_specs(3)
        for name in ("AS", "23", "38", "48"):
            layout = layout_preset(name)
            base = build_model(layout, 4, specs, 0, 6)
            for depth, task_set, subset in split_candidates(layout):
                with self.subTest(preset=name, depth=depth, task_set=task_set):
                    split = split_task_set(layout, depth, task_set, subset)
                    self.assertTrue(split.is_valid())
                    model = build_model(split, 4, specs, 0, 6)
                    self.assertEqual(model.parameter_count - base.parameter_count, base.block_parameter_count(depth))

    def test_split_must_be_a_proper_subset(self):
        layout = layout_preset("AS")
        with self.assertRaises(LayoutError):
            split_task_set(layout, 1, (0, 1, 2), (0, 1, 2))

    def test_split_may_not_straddle_deeper_sets(self):
        layout = parse_layout("[[{0, 1, 2}], [{0, 1}, {2}]]")
        with self.assertRaises(LayoutError):
            split_task_set(layout, 1, (0, 1, 2), (0,))


if __name__ == "__main__":
    unittest.main()
