"""Gridded top-down renders of clay state and goals, plus the binary cell array.

Rendering is pure pixel painting: occupied sub-cells become solid blocks of
clay color, grid lines are drawn on cell boundaries, and the column letters /
row numbers live in a top/left margin band so they never overlap the clay.
PNGs are encoded with fixed settings and no timestamps or ancillary metadata,
so equal fields always produce byte-identical files.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .errors import TextOnlyGoalError
from .goals import GoalSpec
from .grid import COLUMN_LETTERS, GridSpec
from .sim import ClayField, occupancy_mask

Color = tuple[int, int, int]


@dataclass(frozen=True)
class RenderSpec:
    """Pixel geometry and palette for state/goal renders.

    image_px is the clay area (must divide evenly into sub-cells); margin_px
    adds the label band on the top and left edges, so the full canvas is
    (margin_px + image_px) square.
    """

    image_px: int = 512
    margin_px: int = 28
    clay_color: Color = (196, 121, 78)
    background_color: Color = (235, 235, 235)
    gridline_color: Color = (90, 90, 90)
    label_color: Color = (25, 25, 25)
    label_font_px: int = 14

    def validate_for(self, grid: GridSpec) -> None:
        subcells = grid.cols * grid.subdiv
        if self.image_px % subcells != 0:
            raise ValueError(
                f"image_px {self.image_px} not divisible by cols*subdiv = {subcells}"
            )
        if self.margin_px < 0 or self.label_font_px <= 0:
            raise ValueError("margin and font size must be positive")

    def canvas_px(self) -> int:
        return self.margin_px + self.image_px


def render_spec_for(grid: GridSpec, target_px: int = 512, **overrides) -> RenderSpec:
    """RenderSpec whose clay area is the closest multiple of cols*subdiv to
    target_px (512 is not divisible by e.g. a 6x6 grid's 48 sub-cells)."""
    subcells = grid.cols * grid.subdiv
    per = max(1, round(target_px / subcells))
    return RenderSpec(image_px=per * subcells, **overrides)


def _load_font(size: int) -> ImageFont.ImageFont:
    try:
        return ImageFont.load_default(size=size)
    except TypeError:  # older Pillow: fixed-size bitmap font
        return ImageFont.load_default()


def _paint_mask(mask: np.ndarray, grid: GridSpec, spec: RenderSpec) -> Image.Image:
    spec.validate_for(grid)
    block = spec.image_px // (grid.cols * grid.subdiv)
    margin = spec.margin_px
    canvas = spec.canvas_px()

    pixels = np.empty((canvas, canvas, 3), dtype=np.uint8)
    pixels[:, :] = spec.background_color

    clay = np.kron(mask, np.ones((block, block), dtype=bool))
    area = pixels[margin:, margin:]
    area[clay] = spec.clay_color

    cell_px = spec.image_px // grid.cols
    for k in range(grid.cols + 1):
        x = margin + min(k * cell_px, spec.image_px - 1)
        pixels[margin:, x] = spec.gridline_color
    for k in range(grid.rows + 1):
        y = margin + min(k * cell_px, spec.image_px - 1)
        pixels[y, margin:] = spec.gridline_color

    image = Image.fromarray(pixels)
    draw = ImageDraw.Draw(image)
    font = _load_font(spec.label_font_px)
    for col in range(grid.cols):
        cx = margin + col * cell_px + cell_px // 2
        draw.text((cx, margin // 2), COLUMN_LETTERS[col], fill=spec.label_color,
                  font=font, anchor="mm")
    for row in range(grid.rows):
        cy = margin + row * cell_px + cell_px // 2
        draw.text((margin // 2, cy), str(row + 1), fill=spec.label_color,
                  font=font, anchor="mm")
    return image


def _encode_png(image: Image.Image) -> bytes:
    buf = io.BytesIO()
    image.save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def render_state(field: ClayField, spec: RenderSpec | None = None) -> bytes:
    """Deterministic PNG of the occupancy mask with grid lines and labels."""
    spec = spec if spec is not None else render_spec_for(field.grid)
    return _encode_png(_paint_mask(occupancy_mask(field), field.grid, spec))


def render_goal(goal: GoalSpec, grid: GridSpec, spec: RenderSpec | None = None) -> bytes:
    """Goal mask rendered with the same conventions as render_state."""
    if not goal.has_raster:
        raise TextOnlyGoalError(
            f"goal {goal.text_description!r} is text-only and has no image form"
        )
    spec = spec if spec is not None else render_spec_for(grid)
    return _encode_png(_paint_mask(goal.mask, grid, spec))


def render_mask(mask: np.ndarray, grid: GridSpec, spec: RenderSpec | None = None) -> bytes:
    """Render an arbitrary sub-cell mask (used by reports and debugging)."""
    spec = spec if spec is not None else render_spec_for(grid)
    return _encode_png(_paint_mask(mask, grid, spec))


def binary_array(field: ClayField) -> np.ndarray:
    """Per-cell 0/1 array: 1 iff strictly more than half of the cell's
    sub-cells are occupied."""
    g = field.grid
    occ = occupancy_mask(field, 0.5)
    per_cell = occ.reshape(g.rows, g.subdiv, g.cols, g.subdiv).sum(axis=(1, 3))
    return (per_cell > (g.subdiv * g.subdiv) / 2).astype(np.int8)


def binary_array_text(field: ClayField) -> str:
    """Row-per-line text form of the binary cell array for prompts."""
    return "\n".join(" ".join(str(v) for v in row) for row in binary_array(field))


def decode_png(png_bytes: bytes) -> np.ndarray:
    """PNG bytes -> (H, W, 3) uint8 array (test and analysis helper)."""
    with Image.open(io.BytesIO(png_bytes)) as img:
        return np.asarray(img.convert("RGB"))
