"""Parsing of planner and judge responses."""

from __future__ import annotations

import re

from ..errors import CellParseError, TrajectoryParseError
from ..grid import GridSpec, SqueezeAction, Strength, canonicalize, parse_cell

_ACTION_RE = re.compile(
    r"squeeze\s+([a-p]\s*\d{1,2})\s+and\s+([a-p]\s*\d{1,2})"
    r"(?:\s+at\s+(min|medium|max))?",
    re.IGNORECASE,
)

_VERDICT_RE = re.compile(r"\b(stop|continue)\b", re.IGNORECASE)

_VOTE_RE = re.compile(r"vote\s*[:#]?\s*(\d+)", re.IGNORECASE)


def parse_trajectory(text: str, grid: GridSpec) -> list[SqueezeAction]:
    """Extract squeeze actions from free-form text, canonicalized, in order.

    Grammar (case-insensitive, tolerant of surrounding prose):
        SQUEEZE <cell> AND <cell> [AT <min|medium|max>]
    Omitted strength defaults to the fixed squeeze mode.
    """
    actions: list[SqueezeAction] = []
    for match in _ACTION_RE.finditer(text):
        cell_a_text, cell_b_text, strength_text = match.groups()
        try:
            a = parse_cell(cell_a_text.replace(" ", ""), grid)
            b = parse_cell(cell_b_text.replace(" ", ""), grid)
        except CellParseError as exc:
            raise TrajectoryParseError(str(exc)) from exc
        if a == b:
            raise TrajectoryParseError(f"action names the same cell twice: {match.group(0)!r}")
        strength = Strength(strength_text.lower()) if strength_text else Strength.FIXED
        actions.append(canonicalize(SqueezeAction(a=a, b=b, strength=strength)))
    if not actions:
        raise TrajectoryParseError("no action line found in response")
    return actions


def parse_termination_verdict(text: str) -> bool:
    """True for STOP, False for CONTINUE; the last verdict word wins."""
    matches = _VERDICT_RE.findall(text)
    if not matches:
        raise TrajectoryParseError("no STOP/CONTINUE verdict found in response")
    return matches[-1].lower() == "stop"


def parse_vote(text: str, n_candidates: int) -> int:
    """Zero-based index of the voted candidate from a 'VOTE: k' line."""
    matches = _VOTE_RE.findall(text)
    if not matches:
        raise TrajectoryParseError("no VOTE found in response")
    picked = int(matches[-1])
    if not (1 <= picked <= n_candidates):
        raise TrajectoryParseError(f"vote {picked} outside 1..{n_candidates}")
    return picked - 1
