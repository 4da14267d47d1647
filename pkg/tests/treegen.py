"""Helpers to enumerate and sample small labeled ordered trees for TED and
retrieval tests."""

from __future__ import annotations

import itertools
import random

from sqlsynth.sqlast import RaNode

# Three labels over two groups: exercises the equal-group/unequal-value and
# unequal-group cost cells. (The unequal-group/equal-value cell is
# unreachable under deterministic label->group assignment.)
ALPHABET = ("COUNT", "AVG", "AND")


def all_shapes(n: int):
    """All ordered tree shapes with exactly n nodes (as nested tuples)."""
    if n == 1:
        return [()]
    shapes = []
    for split in _compositions(n - 1):
        children_options = [all_shapes(size) for size in split]
        for combo in itertools.product(*children_options):
            shapes.append(tuple(combo))
    return shapes


def _compositions(total: int):
    if total == 0:
        return [()]
    out = []
    for head in range(1, total + 1):
        for rest in _compositions(total - head):
            out.append((head,) + rest)
    return out


def shape_size(shape) -> int:
    return 1 + sum(shape_size(child) for child in shape)


def label_shape(shape, labels) -> RaNode:
    """Deterministically label a shape from an iterator of labels."""
    value = next(labels)
    return RaNode(value, tuple(label_shape(c, labels) for c in shape))


def random_tree(rng: random.Random, max_nodes: int) -> RaNode:
    n = rng.randint(1, max_nodes)
    shape = rng.choice(all_shapes(n))
    labels = iter([rng.choice(ALPHABET) for _ in range(n)])
    return label_shape(shape, labels)
