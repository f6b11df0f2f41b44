"""Offline greedy planner: exhaustive one-step lookahead over the discrete
action space, minimizing the symmetric difference between the resulting
occupancy and the goal mask. Deterministic tie-break by canonical action
order, so runs are bit-reproducible."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidActionError, NoImprovementError
from ..goals import GoalSpec
from ..grid import (
    FINGERTIP_WIDTH_MM,
    GridSpec,
    SqueezeAction,
    Strength,
    StrengthTable,
    VARIED_STRENGTHS,
    all_cell_pairs,
    cell_center,
)
from ..sim import ClayField, apply_squeeze, occupancy_mask
from .base import PlannerResponse, TokenUsage


def _occupied_bbox_mm(field: ClayField) -> tuple[float, float, float, float] | None:
    occupied = field.mass > 0.0
    if not occupied.any():
        return None
    rows = np.nonzero(occupied.any(axis=1))[0]
    cols = np.nonzero(occupied.any(axis=0))[0]
    sub = field.grid.subcell_mm
    return (cols[0] * sub, rows[0] * sub, (cols[-1] + 1) * sub, (rows[-1] + 1) * sub)


def _corridor_misses_bbox(
    pa: tuple[float, float],
    pb: tuple[float, float],
    half_width: float,
    bbox: tuple[float, float, float, float],
) -> bool:
    """Conservative reject: corridor AABB vs clay AABB."""
    (ax, ay), (bx, by) = pa, pb
    lo_x = min(ax, bx) - half_width
    hi_x = max(ax, bx) + half_width
    lo_y = min(ay, by) - half_width
    hi_y = max(ay, by) + half_width
    return hi_x < bbox[0] or lo_x > bbox[2] or hi_y < bbox[1] or lo_y > bbox[3]


def candidate_actions(
    grid: GridSpec, strengths: StrengthTable, varied: bool
) -> list[SqueezeAction]:
    """All valid canonical actions: unordered cell pairs x allowed strengths,
    keeping only pairs whose center distance exceeds the strength's gap."""
    modes = VARIED_STRENGTHS if varied else (Strength.FIXED,)
    actions = []
    for a, b in all_cell_pairs(grid):
        ax, ay = cell_center(a, grid)
        bx, by = cell_center(b, grid)
        dist = float(np.hypot(bx - ax, by - ay))
        for strength in modes:
            if strengths.gap_mm(strength) < dist:
                actions.append(SqueezeAction(a=a, b=b, strength=strength))
    return actions


def scripted_plan(
    field: ClayField,
    goal: GoalSpec,
    strengths: StrengthTable,
    varied: bool = False,
    fingertip_width_mm: float = FINGERTIP_WIDTH_MM,
) -> PlannerResponse:
    """Greedy single-action plan minimizing |occupancy XOR goal mask|.

    Simulates every valid canonical action one step ahead; ties break on the
    canonical action ordering. Raises NoImprovementError at a local optimum
    (no action strictly shrinks the symmetric difference).
    """
    goal_mask = goal.require_mask()
    current_symdiff = int(np.logical_xor(occupancy_mask(field), goal_mask).sum())

    bbox = _occupied_bbox_mm(field)
    half_width = fingertip_width_mm / 2.0
    grid = field.grid

    best_action: SqueezeAction | None = None
    best_symdiff = current_symdiff
    for action in candidate_actions(grid, strengths, varied):
        if bbox is not None:
            pa = cell_center(action.a, grid)
            pb = cell_center(action.b, grid)
            if _corridor_misses_bbox(pa, pb, half_width, bbox):
                continue
        try:
            outcome = apply_squeeze(field, action, strengths, fingertip_width_mm)
        except InvalidActionError:
            continue
        if outcome.displaced_mass == 0.0:
            continue  # no change; cannot strictly improve
        symdiff = int(np.logical_xor(occupancy_mask(outcome.field), goal_mask).sum())
        if symdiff < best_symdiff or (
            symdiff == best_symdiff
            and best_action is not None
            and action.sort_key() < best_action.sort_key()
        ):
            best_symdiff = symdiff
            best_action = action

    if best_action is None or best_symdiff >= current_symdiff:
        raise NoImprovementError(
            f"no action improves symmetric difference below {current_symdiff} subcells"
        )
    rationale = (
        f"greedy: symmetric difference {current_symdiff} -> {best_symdiff} subcells"
    )
    return PlannerResponse(
        raw_text=best_action.label(),
        trajectory=[best_action],
        rationale=rationale,
        usage=TokenUsage(),
    )


class ScriptedPlanner:
    """Planner/proposer/voter backed by exhaustive greedy search (no LLM)."""

    def __init__(
        self,
        strengths: StrengthTable,
        varied: bool = False,
        fingertip_width_mm: float = FINGERTIP_WIDTH_MM,
    ) -> None:
        self.strengths = strengths
        self.varied = varied
        self.fingertip_width_mm = fingertip_width_mm

    def plan(
        self, field: ClayField, goal: GoalSpec, history: list[SqueezeAction]
    ) -> PlannerResponse:
        return scripted_plan(field, goal, self.strengths, self.varied, self.fingertip_width_mm)

    def propose(
        self,
        field: ClayField,
        goal: GoalSpec,
        history: list[SqueezeAction],
        k: int,
    ) -> list[SqueezeAction]:
        """Top-k distinct improving actions by (symmetric difference, order)."""
        goal_mask = goal.require_mask()
        current = int(np.logical_xor(occupancy_mask(field), goal_mask).sum())
        scored: list[tuple[int, tuple, SqueezeAction]] = []
        for action in candidate_actions(field.grid, self.strengths, self.varied):
            try:
                outcome = apply_squeeze(field, action, self.strengths, self.fingertip_width_mm)
            except InvalidActionError:
                continue
            if outcome.displaced_mass == 0.0:
                continue
            symdiff = int(np.logical_xor(occupancy_mask(outcome.field), goal_mask).sum())
            if symdiff < current:
                scored.append((symdiff, action.sort_key(), action))
        scored.sort(key=lambda item: (item[0], item[1]))
        return [action for _, _, action in scored[:k]]

    def vote(self, candidate_fields: list[ClayField], goal: GoalSpec) -> int:
        """Index of the candidate with the smallest symmetric difference."""
        goal_mask = goal.require_mask()
        scores = [
            int(np.logical_xor(occupancy_mask(f), goal_mask).sum()) for f in candidate_fields
        ]
        return int(np.argmin(scores))
