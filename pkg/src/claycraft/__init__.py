"""Grid-discretized clay-squeezing workbench.

A deterministic 2D mass-conserving clay simulator driven by discrete squeeze
actions between labeled grid cells, with letter-shape goals, shape-similarity
metrics (Chamfer, assignment EMD, contour curvature, perimeter-to-area ratio),
LLM and scripted planners, iterative / self-consistency / tree-search rollout
strategies, and an experiment harness with a CLI and an HTTP session service.
"""

from .grid import (
    CellId,
    GridSpec,
    SqueezeAction,
    Strength,
    StrengthTable,
    canonicalize,
    cell_center,
    format_cell,
    parse_cell,
)
from .sim import ClayField, SqueezeOutcome, apply_squeeze, initial_disc, occupancy_mask, point_set

__all__ = [
    "CellId",
    "GridSpec",
    "SqueezeAction",
    "Strength",
    "StrengthTable",
    "canonicalize",
    "cell_center",
    "format_cell",
    "parse_cell",
    "ClayField",
    "SqueezeOutcome",
    "apply_squeeze",
    "initial_disc",
    "occupancy_mask",
    "point_set",
]

__version__ = "0.1.0"
