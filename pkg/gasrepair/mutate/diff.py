"""
Structural tree distance between contracts.

Top-down comparison: nodes of different classes cost the size of both subtrees;
nodes of the same class cost 1 if their own attributes (names, operators, literal
values, types) differ, plus the distance of their children.  Sequence children
(statements of a block, members of a contract) are aligned with an edit-distance
table in which substituting costs the subtree distance and inserting or deleting
costs the subtree size.  The result is symmetric and 0 exactly for equal trees.
"""

from __future__ import annotations

from typing import Optional, Sequence

from ..lang import nodes as n


def diff(a: Optional[n.Node], b: Optional[n.Node]) -> int:
    if a == b:
        return 0
    if a is None or b is None or type(a) is not type(b):
        return n.tree_size(a) + n.tree_size(b)
    cost = 0 if a.attributes() == b.attributes() else 1
    for name in a.CHILDREN:
        left, right = getattr(a, name), getattr(b, name)
        if isinstance(left, tuple) or isinstance(right, tuple):
            cost += _sequence_diff(left or (), right or ())
        else:
            cost += diff(left, right)
    return cost


def _sequence_diff(left: Sequence[n.Node], right: Sequence[n.Node]) -> int:
    rows, cols = len(left), len(right)
    sizes_left = [n.tree_size(node) for node in left]
    sizes_right = [n.tree_size(node) for node in right]
    table = [[0] * (cols + 1) for _ in range(rows + 1)]
    for i in range(1, rows + 1):
        table[i][0] = table[i - 1][0] + sizes_left[i - 1]
    for j in range(1, cols + 1):
        table[0][j] = table[0][j - 1] + sizes_right[j - 1]
    for i in range(1, rows + 1):
        for j in range(1, cols + 1):
            table[i][j] = min(
                table[i - 1][j] + sizes_left[i - 1],
                table[i][j - 1] + sizes_right[j - 1],
                table[i - 1][j - 1] + diff(left[i - 1], right[j - 1]),
            )
    return table[rows][cols]
