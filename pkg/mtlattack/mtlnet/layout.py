# -----------------------------------------------------------------------------
# File: layout.py
# Description: This file defines the `Layout` class, the per-depth task
#              partitions that describe a branched multi-task architecture,
#              together with its validator, the bracketed-set text codec
#              ("[[{0, 1, 2}], [{1}, {0, 2}]]"), sharing-level layouts, random
#              layouts and the single-split helper used by the parameter
#              additivity checks.
#
#              Depths are 1-based in every message and argument. The order of
#              task sets inside a depth and of tasks inside a set is kept as
#              written, so formatting a parsed layout reproduces its text.
#
# License: MIT
# -----------------------------------------------------------------------------

import logging
import re
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from mtlattack.exceptions.mtlattack_exception import LayoutError


log = logging.getLogger()

TaskSet = Tuple[int, ...]
Partition = Tuple[TaskSet, ...]

_TOKEN = re.compile(r"\s*(\[|\]|\{|\}|,|-?\d+)")


@dataclass(frozen=True)
class Layout:
    """
    Per-depth partitions of the task set. `partitions[i]` lists the task sets
    that share one block at depth i + 1.

    A Layout may be constructed in an invalid state; `validate_layout` reports
    what is wrong and `build_model` refuses it.

    Example usage:
        layout = Layout([[{0, 1, 2}], [{1}, {0, 2}]])
        layout.blocks       # 2
        str(layout)         # "[[{0, 1, 2}], [{1}, {0, 2}]]"
    """
    partitions: Tuple[Partition, ...]

    def __post_init__(self):
        partitions = tuple(
            tuple(tuple(sorted(task_set)) if isinstance(task_set, (set, frozenset)) else tuple(int(t) for t in task_set)
                  for task_set in depth)
            for depth in self.partitions
        )
        object.__setattr__(self, "partitions", partitions)

    def __str__(self):
        return format_layout(self)

    @property
    def blocks(self):
        """Number of depths B."""
        return len(self.partitions)

    @property
    def tasks(self):
        """Sorted task ids of the first depth."""
        if not self.partitions:
            return ()
        return tuple(sorted(t for task_set in self.partitions[0] for t in task_set))

    @property
    def n_tasks(self):
        return len(self.tasks)

    @property
    def block_count(self):
        """Number of block instances: one per task set per depth."""
        return sum(len(depth) for depth in self.partitions)

    def set_index(self, depth, task):
        """
        Index of the task set holding `task` at the 1-based `depth`.

        :raises LayoutError: if the task is not present at that depth.
        """
        for index, task_set in enumerate(self.partitions[depth - 1]):
            if task in task_set:
                return index
        raise LayoutError(f"task {task} is missing at depth {depth}", depth=depth)

    def parent_index(self, depth, index):
        """Index of the set at depth - 1 containing set `index` of `depth`."""
        return self.set_index(depth - 1, self.partitions[depth - 1][index][0])

    def is_valid(self):
        return validate_layout(self) is None

    def check(self):
        """
        :raises LayoutError: describing the first violation found.
        """
        violation = validate_layout(self)
        if violation is not None:
            raise LayoutError(violation.message, depth=violation.depth)

    @classmethod
    def parse(cls, text):
        return parse_layout(text)


@dataclass(frozen=True)
class LayoutViolation:
    """
    Attributes:
        depth (int): 1-based depth of the violation; 0 when the layout is empty.
        sets (tuple): the offending task sets.
        message (str): human readable description.
    """
    depth: int
    sets: Tuple[TaskSet, ...]
    message: str


def _fmt_set(task_set):
    return "{" + ", ".join(str(t) for t in task_set) + "}"


def validate_layout(layout: Layout) -> Optional[LayoutViolation]:
    """
    Check the partition and refinement rules. Returns None when the layout is
    valid, otherwise the first violation in depth order.

    Rules:
        - at least one depth; every depth holds non-empty task sets
        - the sets of a depth are pairwise disjoint and cover the task set of
          the first depth
        - every set at depth i + 1 is a subset of one set at depth i
    """
    if not layout.partitions:
        return LayoutViolation(0, (), "a layout needs at least one block")

    full = set().union(*(set(task_set) for task_set in layout.partitions[0]))

    previous = None
    for depth_index, depth in enumerate(layout.partitions):
        depth_no = depth_index + 1
        if not depth:
            return LayoutViolation(depth_no, (), f"depth {depth_no} has no task sets")

        seen = {}
        for task_set in depth:
            if not task_set:
                return LayoutViolation(depth_no, (task_set,), f"depth {depth_no} contains an empty task set")
            if any(t < 0 for t in task_set):
                return LayoutViolation(depth_no, (task_set,), f"depth {depth_no}: task ids must be non-negative")
            if len(set(task_set)) != len(task_set):
                return LayoutViolation(
                    depth_no, (task_set,), f"depth {depth_no}: task set {_fmt_set(task_set)} repeats a task"
                )
            for task in task_set:
                if task in seen:
                    other = seen[task]
                    return LayoutViolation(
                        depth_no, (other, task_set),
                        f"depth {depth_no}: task {task} appears in both {_fmt_set(other)} and {_fmt_set(task_set)}",
                    )
                seen[task] = task_set

        covered = set(seen)
        if covered != full:
            missing = sorted(full - covered)
            extra = sorted(covered - full)
            return LayoutViolation(
                depth_no, tuple(depth),
                f"depth {depth_no} covers tasks {sorted(covered)} instead of {sorted(full)} "
                f"(missing {missing}, extra {extra})",
            )

        if previous is not None:
            for task_set in depth:
                parents = [p for p in previous if set(task_set) <= set(p)]
                if not parents:
                    return LayoutViolation(
                        depth_no, (task_set,),
                        f"depth {depth_no}: task set {_fmt_set(task_set)} is not contained in a single set of "
                        f"depth {depth_no - 1}; tasks may not re-merge",
                    )
        previous = depth

    return None


def format_layout(layout: Layout) -> str:
    """Bracketed-set text, e.g. "[[{0, 1, 2}], [{1}, {0, 2}]]"."""
    return "[" + ", ".join(
        "[" + ", ".join(_fmt_set(task_set) for task_set in depth) + "]" for depth in layout.partitions
    ) + "]"


def parse_layout(text: str) -> Layout:
    """
    Parse the bracketed-set text produced by `format_layout`. Set and task
    order are preserved.

    :raises LayoutError: on malformed text.
    """
    tokens = []
    position = 0
    stripped = text.rstrip()
    while position < len(stripped):
        match = _TOKEN.match(stripped, position)
        if match is None:
            raise LayoutError(f"unexpected character {stripped[position]!r} at offset {position} in layout text")
        tokens.append(match.group(1))
        position = match.end()

    cursor = 0

    def expect(token):
        nonlocal cursor
        if cursor >= len(tokens) or tokens[cursor] != token:
            found = tokens[cursor] if cursor < len(tokens) else "end of text"
            raise LayoutError(f"expected '{token}' in layout text, found '{found}'")
        cursor += 1

    def peek():
        return tokens[cursor] if cursor < len(tokens) else None

    def sequence(open_token, close_token, item):
        nonlocal cursor
        expect(open_token)
        items = []
        if peek() == close_token:
            cursor += 1
            return items
        while True:
            items.append(item())
            if peek() == ",":
                cursor += 1
                continue
            expect(close_token)
            return items

    def task():
        nonlocal cursor
        token = peek()
        if token is None or not re.fullmatch(r"-?\d+", token):
            raise LayoutError(f"expected a task id in layout text, found '{token}'")
        cursor += 1
        return int(token)

    partitions = sequence("[", "]", lambda: sequence("[", "]", lambda: sequence("{", "}", task)))
    if cursor != len(tokens):
        raise LayoutError("trailing content after layout text")
    return Layout(tuple(tuple(tuple(s) for s in depth) for depth in partitions))


def layout_for_sharing_level(level: int, blocks: int, n_tasks: int) -> Layout:
    """
    Layout whose first `level` depths are shared by all tasks and whose
    remaining depths are independent. Level 0 is the independent model and
    level `blocks` the all-shared model.

    :raises LayoutError: if the level is outside [0, blocks].
    """
    if blocks < 1 or n_tasks < 1:
        raise LayoutError("a sharing-level layout needs at least one block and one task")
    if not 0 <= level <= blocks:
        raise LayoutError(f"sharing level {level} is outside [0, {blocks}]")

    shared = (tuple(range(n_tasks)),)
    independent = tuple((t,) for t in range(n_tasks))
    return Layout(tuple(shared if depth < level else independent for depth in range(blocks)))


def sharing_level_name(level: int, blocks: int) -> str:
    """"IND/0L" ... "AS/5L" style label."""
    if level == 0:
        return "IND/0L"
    if level == blocks:
        return f"AS/{level}L"
    return f"{level}L"


def random_layout(n_tasks: int, blocks: int, seed: int, split_probability=0.35) -> Layout:
    """
    Valid random layout grown depth by depth: every set may split into two
    non-empty parts when moving to the next depth.
    """
    if n_tasks < 1 or blocks < 1:
        raise LayoutError("a random layout needs at least one block and one task")

    rng = np.random.default_rng(seed)
    current = [tuple(range(n_tasks))]
    partitions = []
    for _ in range(blocks):
        refined = []
        for task_set in current:
            if len(task_set) > 1 and rng.random() < split_probability:
                order = rng.permutation(len(task_set))
                cut = int(rng.integers(1, len(task_set)))
                refined.append(tuple(sorted(task_set[i] for i in order[:cut])))
                refined.append(tuple(sorted(task_set[i] for i in order[cut:])))
            else:
                refined.append(task_set)
        current = refined
        partitions.append(tuple(current))
    return Layout(tuple(partitions))


def split_candidates(layout: Layout) -> Iterator[Tuple[int, TaskSet, TaskSet]]:
    """
    Yield (depth, task set, subset) triples for which `split_task_set` adds
    exactly one block: the set has more than one task and, below the last
    depth, is already split at the next depth.
    """
    for depth_index, depth in enumerate(layout.partitions):
        for task_set in depth:
            if len(task_set) < 2:
                continue
            if depth_index + 1 == layout.blocks:
                yield depth_index + 1, task_set, task_set[:1]
                continue
            children = [c for c in layout.partitions[depth_index + 1] if set(c) <= set(task_set)]
            if len(children) > 1:
                yield depth_index + 1, task_set, children[0]


def split_task_set(layout: Layout, depth: int, task_set: Sequence[int], subset: Sequence[int]) -> Layout:
    """
    Replace `task_set` at the 1-based `depth` by `subset` and its complement.

    :raises LayoutError: if the set is not at that depth, the subset is not a
                         proper non-empty subset, or a deeper set straddles
                         the new boundary.
    """
    task_set = tuple(task_set)
    subset = tuple(subset)
    if not 1 <= depth <= layout.blocks:
        raise LayoutError(f"depth {depth} is outside [1, {layout.blocks}]", depth=depth)
    if task_set not in layout.partitions[depth - 1]:
        raise LayoutError(f"depth {depth} has no task set {_fmt_set(task_set)}", depth=depth)
    if not subset or not set(subset) < set(task_set):
        raise LayoutError(f"{_fmt_set(subset)} is not a proper non-empty subset of {_fmt_set(task_set)}", depth=depth)

    left = set(subset)
    for deeper in layout.partitions[depth:]:
        for s in deeper:
            if set(s) <= set(task_set) and not (set(s) <= left or not set(s) & left):
                raise LayoutError(f"deeper set {_fmt_set(s)} straddles the split of {_fmt_set(task_set)}", depth=depth)

    complement = tuple(t for t in task_set if t not in left)
    new_depth = []
    for s in layout.partitions[depth - 1]:
        if s == task_set:
            new_depth.extend([subset, complement])
        else:
            new_depth.append(s)

    partitions = list(layout.partitions)
    partitions[depth - 1] = tuple(new_depth)
    return Layout(tuple(partitions))


# Named three-task layouts, keyed by model index; "IND" and "AS" are the
# independent and all-shared extremes.
LAYOUT_PRESETS = {
    "IND": "[[{0}, {2}, {1}], [{0}, {2}, {1}], [{0}, {2}, {1}], [{0}, {2}, {1}], [{0}, {2}, {1}]]",
    "9": "[[{1}, {0, 2}], [{1}, {0, 2}], [{1}, {2}, {0}], [{1}, {2}, {0}], [{1}, {2}, {0}]]",
    "14": "[[{2}, {0, 1}], [{2}, {0, 1}], [{2}, {1}, {0}], [{2}, {1}, {0}], [{2}, {1}, {0}]]",
    "4": "[[{1, 2}, {0}], [{1, 2}, {0}], [{0}, {2}, {1}], [{0}, {2}, {1}], [{0}, {2}, {1}]]",
    "23": "[[{0, 1, 2}], [{1}, {0, 2}], [{1}, {2}, {0}], [{1}, {2}, {0}], [{1}, {2}, {0}]]",
    "10": "[[{1}, {0, 2}], [{1}, {0, 2}], [{1}, {0, 2}], [{1}, {2}, {0}], [{1}, {2}, {0}]]",
    "5": "[[{1, 2}, {0}], [{1, 2}, {0}], [{1, 2}, {0}], [{0}, {2}, {1}], [{0}, {2}, {1}]]",
    "28": "[[{0, 1, 2}], [{2}, {0, 1}], [{2}, {0, 1}], [{2}, {1}, {0}], [{2}, {1}, {0}]]",
    "38": "[[{0, 1, 2}], [{0, 1, 2}], [{2}, {0, 1}], [{2}, {1}, {0}], [{2}, {1}, {0}]]",
    "41": "[[{0, 1, 2}], [{0, 1, 2}], [{0, 1, 2}], [{0}, {2}, {1}], [{0}, {2}, {1}]]",
    "33": "[[{0, 1, 2}], [{0, 1, 2}], [{1, 2}, {0}], [{1, 2}, {0}], [{0}, {2}, {1}]]",
    "39": "[[{0, 1, 2}], [{0, 1, 2}], [{2}, {0, 1}], [{2}, {0, 1}], [{2}, {1}, {0}]]",
    "42": "[[{0, 1, 2}], [{0, 1, 2}], [{0, 1, 2}], [{1, 2}, {0}], [{0}, {2}, {1}]]",
    "44": "[[{0, 1, 2}], [{0, 1, 2}], [{0, 1, 2}], [{1}, {0, 2}], [{1}, {2}, {0}]]",
    "48": "[[{0, 1, 2}], [{0, 1, 2}], [{0, 1, 2}], [{0, 1, 2}], [{0}, {2}, {1}]]",
    "26": "[[{0, 1, 2}], [{2}, {0, 1}], [{2}, {0, 1}], [{2}, {0, 1}], [{2}, {0, 1}]]",
    "17": "[[{0, 1, 2}], [{1, 2}, {0}], [{1, 2}, {0}], [{1, 2}, {0}], [{1, 2}, {0}]]",
    "34": "[[{0, 1, 2}], [{0, 1, 2}], [{1}, {0, 2}], [{1}, {0, 2}], [{1}, {0, 2}]]",
    "43": "[[{0, 1, 2}], [{0, 1, 2}], [{0, 1, 2}], [{1}, {0, 2}], [{1}, {0, 2}]]",
    "49": "[[{0, 1, 2}], [{0, 1, 2}], [{0, 1, 2}], [{0, 1, 2}], [{1}, {0, 2}]]",
    "AS": "[[{0, 1, 2}], [{0, 1, 2}], [{0, 1, 2}], [{0, 1, 2}], [{0, 1, 2}]]",
}


def layout_preset(name: str) -> Layout:
    """
    :raises LayoutError: for an unknown preset name.
    """
    try:
        return parse_layout(LAYOUT_PRESETS[str(name)])
    except KeyError:
        raise LayoutError(f"unknown layout preset '{name}'; valid presets are: {', '.join(LAYOUT_PRESETS)}")
