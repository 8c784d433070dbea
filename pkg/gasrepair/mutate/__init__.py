"""Mutation operators, patches, structural diff and the seven mutation spaces"""

from .diff import diff
from .edits import (
    EditOp,
    Insert,
    Move,
    Patch,
    Position,
    Replace,
    apply,
    apply_edit,
    mutation_distance,
)
from .spaces import (
    SPACE_OPS,
    Sampler,
    SpaceId,
    mutate_i,
    mutate_m,
    mutate_r,
    space_of,
    space_validity,
)

__all__ = [
    "EditOp",
    "Insert",
    "Move",
    "Patch",
    "Position",
    "Replace",
    "SPACE_OPS",
    "Sampler",
    "SpaceId",
    "apply",
    "apply_edit",
    "diff",
    "mutate_i",
    "mutate_m",
    "mutate_r",
    "mutation_distance",
    "space_of",
    "space_validity",
]
