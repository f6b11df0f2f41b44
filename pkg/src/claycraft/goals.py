"""Letter goal library: stroke definitions rasterized to sub-cell goal masks.

Strokes are polylines in normalized [0,1]^2 coordinates (same orientation as
the workspace: origin top-left, y down) with a width in mm. A sub-cell belongs
to the goal mask when its center lies within half the stroke width of any
segment after scaling to the workspace. Goal point sets are the occupied
sub-cell centers of the mask, mirroring the simulator's point_set so state and
goal are compared on equal footing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TextOnlyGoalError
from .grid import GridSpec
from .sim import subcell_centers

LETTERS = ("C", "I", "L", "T", "X")

DEFAULT_STROKE_WIDTH_MM = 15.0


@dataclass(frozen=True)
class StrokeDef:
    """One or more polylines in normalized coordinates plus a stroke width."""

    polylines: tuple[tuple[tuple[float, float], ...], ...]
    stroke_width_mm: float = DEFAULT_STROKE_WIDTH_MM

    def __post_init__(self) -> None:
        if not self.polylines:
            raise ValueError("StrokeDef requires at least one polyline")
        if self.stroke_width_mm <= 0:
            raise ValueError("stroke width must be positive")
        for line in self.polylines:
            if len(line) < 1:
                raise ValueError("polyline must have at least one point")


@dataclass
class GoalSpec:
    """A crafting goal: letter id, text description, optional raster form."""

    letter: str | None
    text_description: str
    mask: np.ndarray | None = None
    target_points: np.ndarray | None = None
    provide_image: bool = True

    def __post_init__(self) -> None:
        if (self.mask is None) != (self.target_points is None):
            raise ValueError("mask and target_points must be provided together")

    @property
    def has_raster(self) -> bool:
        return self.mask is not None

    def require_mask(self) -> np.ndarray:
        if self.mask is None:
            raise TextOnlyGoalError(f"goal {self.text_description!r} has no raster form")
        return self.mask


def _segment_distances(px: np.ndarray, py: np.ndarray, seg: tuple) -> np.ndarray:
    """Distance from each (px, py) to one segment; handles degenerate points."""
    (x0, y0), (x1, y1) = seg
    dx, dy = x1 - x0, y1 - y0
    length_sq = dx * dx + dy * dy
    if length_sq == 0.0:
        return np.hypot(px - x0, py - y0)
    t = ((px - x0) * dx + (py - y0) * dy) / length_sq
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(px - (x0 + t * dx), py - (y0 + t * dy))


def rasterize_goal(stroke: StrokeDef, grid: GridSpec) -> np.ndarray:
    """Boolean sub-cell mask: center within stroke_width/2 of any segment."""
    x_grid, y_grid = subcell_centers(grid)
    w, h = grid.width_mm, grid.height_mm
    half = stroke.stroke_width_mm / 2.0
    mask = np.zeros(grid.raster_shape, dtype=bool)
    for line in stroke.polylines:
        pts = [(x * w, y * h) for x, y in line]
        if len(pts) == 1:
            mask |= np.hypot(x_grid - pts[0][0], y_grid - pts[0][1]) <= half
            continue
        for seg in zip(pts[:-1], pts[1:]):
            mask |= _segment_distances(x_grid, y_grid, seg) <= half
    return mask


def _arc(cx: float, cy: float, radius: float, start_deg: float, end_deg: float, n: int = 24):
    """Polyline approximation of a circular arc, angles in image coords (y down)."""
    angles = np.linspace(np.radians(start_deg), np.radians(end_deg), n)
    return tuple((cx + radius * float(np.cos(a)), cy + radius * float(np.sin(a))) for a in angles)


def builtin_letters(stroke_width_mm: float = DEFAULT_STROKE_WIDTH_MM) -> dict[str, StrokeDef]:
    """Stroke definitions for the five built-in letter goals.

    C is an open arc (the action vocabulary cannot create holes, so closed
    letters are out). All glyphs keep a margin from the workspace edge and X
    is symmetric under 180-degree rotation.
    """
    return {
        "C": StrokeDef(
            polylines=(_arc(0.54, 0.5, 0.26, 55.0, 305.0),),
            stroke_width_mm=stroke_width_mm,
        ),
        "I": StrokeDef(
            polylines=(((0.5, 0.18), (0.5, 0.82)),),
            stroke_width_mm=stroke_width_mm,
        ),
        "L": StrokeDef(
            polylines=(((0.34, 0.18), (0.34, 0.78), (0.74, 0.78)),),
            stroke_width_mm=stroke_width_mm,
        ),
        "T": StrokeDef(
            polylines=(
                ((0.22, 0.22), (0.78, 0.22)),
                ((0.5, 0.22), (0.5, 0.82)),
            ),
            stroke_width_mm=stroke_width_mm,
        ),
        "X": StrokeDef(
            polylines=(
                ((0.25, 0.2), (0.75, 0.8)),
                ((0.75, 0.2), (0.25, 0.8)),
            ),
            stroke_width_mm=stroke_width_mm,
        ),
    }


def load_letter_library(path: str | Path) -> dict[str, StrokeDef]:
    """Load/override stroke definitions from a JSON file.

    Format: {"X": {"polylines": [[[x, y], ...], ...], "stroke_width_mm": 15.0}}
    """
    doc = json.loads(Path(path).read_text())
    library: dict[str, StrokeDef] = {}
    for letter, spec in doc.items():
        polylines = tuple(tuple((float(x), float(y)) for x, y in line) for line in spec["polylines"])
        library[letter.upper()] = StrokeDef(
            polylines=polylines,
            stroke_width_mm=float(spec.get("stroke_width_mm", DEFAULT_STROKE_WIDTH_MM)),
        )
    return library


def make_goal(
    letter: str,
    grid: GridSpec,
    provide_image: bool = True,
    library: dict[str, StrokeDef] | None = None,
) -> GoalSpec:
    """Rasterize a letter from the library into a full GoalSpec."""
    library = library if library is not None else builtin_letters()
    key = letter.upper()
    if key not in library:
        raise KeyError(f"unknown goal letter {letter!r}; have {sorted(library)}")
    mask = rasterize_goal(library[key], grid)
    x_grid, y_grid = subcell_centers(grid)
    points = np.column_stack([x_grid[mask], y_grid[mask]])
    return GoalSpec(
        letter=key,
        text_description=f"the letter {key}",
        mask=mask,
        target_points=points,
        provide_image=provide_image,
    )


def text_only_goal(description: str, letter: str | None = None) -> GoalSpec:
    """Semantic goal with no raster form (goal image cannot be provided)."""
    return GoalSpec(letter=letter, text_description=description, provide_image=False)


def goal_area_mm2(goal: GoalSpec, grid: GridSpec) -> float:
    return float(goal.require_mask().sum()) * grid.subcell_mm**2
