"""Search-based repair: candidates, NSGA-II selection, generator workers, the engine"""

from .candidates import (
    Candidate,
    FitnessVector,
    evaluate,
    filter_plausible,
    reverify,
)
from .engine import RepairEngine, repair, repair_urs
from .nsga import crowding_distance, fast_non_dominated_sort, nsga2_select
from .report import PlausiblePatch, RepairReport
from .workers import GeneratorPool, GeneratorWorker

__all__ = [
    "Candidate",
    "FitnessVector",
    "GeneratorPool",
    "GeneratorWorker",
    "PlausiblePatch",
    "RepairEngine",
    "RepairReport",
    "crowding_distance",
    "evaluate",
    "fast_non_dominated_sort",
    "filter_plausible",
    "nsga2_select",
    "repair",
    "repair_urs",
    "reverify",
]
