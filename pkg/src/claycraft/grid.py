"""Workspace geometry, cell coordinates, and the squeeze action vocabulary.

Conventions used everywhere downstream:
  - columns are lettered A, B, C, ... left to right; rows are numbered 1, 2, ...
    top to bottom, so the top-left cell is "A1"
  - the workspace frame is in millimetres with the origin at the top-left
    corner of the grid and y increasing downward (image-row order)
  - grids are square, 2x2 up to 16x16
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import CellParseError

COLUMN_LETTERS = "ABCDEFGHIJKLMNOP"

MAX_GRID_SIZE = len(COLUMN_LETTERS)

# Width of the parallel-gripper fingertip, which sets the lateral extent of
# every squeeze corridor regardless of grid resolution.
FINGERTIP_WIDTH_MM = 20.0


class Strength(Enum):
    """Squeeze strength; FIXED is the single-strength mode (same gap as MEDIUM)."""

    MIN = "min"
    MEDIUM = "medium"
    MAX = "max"
    FIXED = "fixed"

    @property
    def sort_index(self) -> int:
        return _STRENGTH_ORDER[self]


_STRENGTH_ORDER = {Strength.MIN: 0, Strength.MEDIUM: 1, Strength.MAX: 2, Strength.FIXED: 3}

VARIED_STRENGTHS = (Strength.MIN, Strength.MEDIUM, Strength.MAX)


@dataclass(frozen=True)
class StrengthTable:
    """Final fingertip gap in mm for each squeeze strength."""

    min_gap_mm: float = 25.0
    medium_gap_mm: float = 15.0
    max_gap_mm: float = 8.0
    fixed_gap_mm: float = 15.0

    def __post_init__(self) -> None:
        if not (0.0 < self.max_gap_mm < self.medium_gap_mm < self.min_gap_mm):
            raise ValueError(
                "gaps must be strictly positive and strictly decreasing from min to max"
            )
        if self.fixed_gap_mm <= 0.0:
            raise ValueError("fixed gap must be positive")

    def gap_mm(self, strength: Strength) -> float:
        return {
            Strength.MIN: self.min_gap_mm,
            Strength.MEDIUM: self.medium_gap_mm,
            Strength.MAX: self.max_gap_mm,
            Strength.FIXED: self.fixed_gap_mm,
        }[strength]


@dataclass(frozen=True)
class GridSpec:
    """Square cell grid over the workspace plus the sub-cell raster resolution."""

    rows: int
    cols: int
    cell_size_mm: float = 20.0
    subdiv: int = 8

    def __post_init__(self) -> None:
        if self.rows != self.cols:
            raise ValueError(f"grid must be square, got {self.rows}x{self.cols}")
        if not (2 <= self.rows <= MAX_GRID_SIZE):
            raise ValueError(f"grid size must be in [2, {MAX_GRID_SIZE}], got {self.rows}")
        if self.cell_size_mm <= 0:
            raise ValueError("cell_size_mm must be positive")
        if self.subdiv < 2:
            raise ValueError("subdiv must be at least 2")

    @property
    def width_mm(self) -> float:
        return self.cols * self.cell_size_mm

    @property
    def height_mm(self) -> float:
        return self.rows * self.cell_size_mm

    @property
    def subcell_mm(self) -> float:
        return self.cell_size_mm / self.subdiv

    @property
    def raster_shape(self) -> tuple[int, int]:
        """(rows, cols) of the sub-cell mass raster."""
        return (self.rows * self.subdiv, self.cols * self.subdiv)

    @classmethod
    def square(cls, size: int, workspace_mm: float = 80.0, subdiv: int = 8) -> "GridSpec":
        """Grid of `size` x `size` cells tiling a fixed workspace extent."""
        return cls(rows=size, cols=size, cell_size_mm=workspace_mm / size, subdiv=subdiv)


@dataclass(frozen=True, order=True)
class CellId:
    """Grid cell addressed by zero-based (col, row); textual form is e.g. "A1"."""

    col: int
    row: int

    def label(self) -> str:
        return f"{COLUMN_LETTERS[self.col]}{self.row + 1}"


def format_cell(cell: CellId) -> str:
    return cell.label()


def parse_cell(text: str, grid: GridSpec) -> CellId:
    """Parse a letter+number cell label, case-insensitively. Inverse of format_cell."""
    cleaned = text.strip().upper()
    if len(cleaned) < 2:
        raise CellParseError(f"malformed cell label: {text!r}")
    letter, digits = cleaned[0], cleaned[1:]
    if letter not in COLUMN_LETTERS or not digits.isdigit():
        raise CellParseError(f"malformed cell label: {text!r}")
    col = COLUMN_LETTERS.index(letter)
    row = int(digits) - 1
    if col >= grid.cols or not (0 <= row < grid.rows):
        raise CellParseError(f"cell {cleaned} outside {grid.rows}x{grid.cols} grid")
    return CellId(col=col, row=row)


@dataclass(frozen=True)
class SqueezeAction:
    """Pinch two distinct cells toward each other to the strength's final gap."""

    a: CellId
    b: CellId
    strength: Strength

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError("squeeze requires two distinct cells")

    def label(self) -> str:
        return f"squeeze {self.a.label()} and {self.b.label()} at {self.strength.value}"

    def sort_key(self) -> tuple[int, int, int, int, int]:
        return (self.a.col, self.a.row, self.b.col, self.b.row, self.strength.sort_index)


def canonicalize(action: SqueezeAction) -> SqueezeAction:
    """Order the cell pair lexicographically by (col, row); idempotent and swap-symmetric."""
    if (action.b.col, action.b.row) < (action.a.col, action.a.row):
        return SqueezeAction(a=action.b, b=action.a, strength=action.strength)
    return action


def cell_center(cell: CellId, grid: GridSpec) -> tuple[float, float]:
    """Center of a cell in workspace mm; origin top-left, y down."""
    if not (0 <= cell.col < grid.cols and 0 <= cell.row < grid.rows):
        raise ValueError(f"cell {cell} outside grid {grid.rows}x{grid.cols}")
    return (
        (cell.col + 0.5) * grid.cell_size_mm,
        (cell.row + 0.5) * grid.cell_size_mm,
    )


def all_cells(grid: GridSpec) -> list[CellId]:
    """Every cell in the grid, row-major (A1, B1, ..., A2, ...)."""
    return [CellId(col=c, row=r) for r in range(grid.rows) for c in range(grid.cols)]


def all_cell_pairs(grid: GridSpec) -> list[tuple[CellId, CellId]]:
    """Every unordered distinct pair, each in canonical (col, row) order."""
    cells = sorted(all_cells(grid))
    return [(cells[i], cells[j]) for i in range(len(cells)) for j in range(i + 1, len(cells))]
