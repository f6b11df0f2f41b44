"""Prompt assembly for the action, termination, proposal, and vote prompts.

The action prompt is built from seven ordered components; the termination
prompt from five. Each ablatable piece lives in its own template file, and the
PromptConfig toggles control file inclusion, so an ablation run is exactly a
prompt with some files left out. Content blocks carry their component index so
structural tests (and the request builder) can see the ordering; the wire
format strips it.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, fields
from functools import lru_cache
from importlib import resources

from ..errors import PromptConfigError, TextOnlyGoalError
from ..goals import GoalSpec
from ..grid import COLUMN_LETTERS, GridSpec, SqueezeAction, StrengthTable

TOGGLE_NAMES = (
    "goal_image",
    "state_goal_comparison",
    "predicted_effect",
    "grasp_types_explanation",
    "step_by_step",
    "grid_explanation",
    "clay_behavior",
    "goal_text",
    "termination_enabled",
)


@dataclass(frozen=True)
class PromptConfig:
    """Nine ablation toggles plus the squeeze-strength vocabulary mode.

    All toggles on is the full prompt; each toggle removes one component or
    sub-block. Disabling everything leaves no prompt and is rejected.
    """

    goal_image: bool = True
    state_goal_comparison: bool = True
    predicted_effect: bool = True
    grasp_types_explanation: bool = True
    step_by_step: bool = True
    grid_explanation: bool = True
    clay_behavior: bool = True
    goal_text: bool = True
    termination_enabled: bool = True
    varied_strength: bool = True

    def __post_init__(self) -> None:
        if not any(getattr(self, name) for name in TOGGLE_NAMES):
            raise PromptConfigError("all nine prompt toggles disabled: nothing left to send")

    def toggles(self) -> dict[str, bool]:
        return {name: getattr(self, name) for name in TOGGLE_NAMES}

    def with_toggle(self, name: str, value: bool) -> "PromptConfig":
        if name not in TOGGLE_NAMES:
            raise KeyError(f"unknown prompt toggle {name!r}")
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        current[name] = value
        return PromptConfig(**current)


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    return resources.files(__package__).joinpath("templates", f"{name}.txt").read_text()


def _text_block(component: int, text: str) -> dict:
    return {"type": "text", "text": text, "component": component}


def _image_block(component: int, png_bytes: bytes) -> dict:
    return {
        "type": "image",
        "base64": base64.b64encode(png_bytes).decode("ascii"),
        "component": component,
    }


def _grid_fields(grid: GridSpec) -> dict:
    return {
        "grid_size": grid.rows,
        "cell_mm": grid.cell_size_mm,
        "col_first": COLUMN_LETTERS[0],
        "col_last": COLUMN_LETTERS[grid.cols - 1],
        "row_last": grid.rows,
    }


def _strength_line(cfg: PromptConfig, strengths: StrengthTable) -> str:
    if cfg.varied_strength:
        return (
            "You also choose the squeeze strength: min closes to "
            f"{strengths.min_gap_mm:.0f}mm between the fingertips, medium to "
            f"{strengths.medium_gap_mm:.0f}mm, and max to {strengths.max_gap_mm:.0f}mm."
        )
    return (
        "Every squeeze closes to the same fixed separation of "
        f"{strengths.fixed_gap_mm:.0f}mm between the fingertips."
    )


def _grammar(cfg: PromptConfig, strengths: StrengthTable) -> str:
    if cfg.varied_strength:
        return _template("grammar_varied").format(
            min_gap_mm=strengths.min_gap_mm,
            medium_gap_mm=strengths.medium_gap_mm,
            max_gap_mm=strengths.max_gap_mm,
        )
    return _template("grammar_fixed").format(fixed_gap_mm=strengths.fixed_gap_mm)


def _history_text(history: list[SqueezeAction]) -> str:
    if not history:
        return "No squeezes have been executed yet."
    lines = [f"{i + 1}. {a.label()}" for i, a in enumerate(history)]
    return "Actions executed so far:\n" + "\n".join(lines)


def _action_components(
    cfg: PromptConfig,
    grid: GridSpec,
    strengths: StrengthTable,
    state_png: bytes,
    goal: GoalSpec,
    goal_png: bytes | None,
    history: list[SqueezeAction],
) -> list[dict]:
    g = _grid_fields(grid)
    blocks: list[dict] = []

    blocks.append(_text_block(1, _template("action_1_embodiment").format(fingertip_mm=20.0)))

    env = _template("action_2_environment").format(**g)
    if cfg.grid_explanation:
        env += "\n" + _template("action_2_grid_explanation").format(**g)
    blocks.append(_text_block(2, env))

    grasp = _template("action_3_grasp").format(strength_line=_strength_line(cfg, strengths))
    if cfg.grasp_types_explanation:
        grasp += "\n" + _template("action_3_grasp_types")
    if cfg.clay_behavior:
        grasp += "\n" + _template("action_3_clay_behavior")
    blocks.append(_text_block(3, grasp))

    parts = [_template("action_4_trajectory").format(grammar=_grammar(cfg, strengths))]
    if cfg.state_goal_comparison:
        parts.append(_template("action_4_state_goal_comparison"))
    if cfg.predicted_effect:
        parts.append(_template("action_4_predicted_effect"))
    if cfg.step_by_step:
        parts.append(_template("action_4_step_by_step"))
    blocks.append(_text_block(4, "\n".join(parts)))

    if cfg.goal_image:
        if goal_png is None:
            raise TextOnlyGoalError(
                "goal image requested by the prompt config but the goal has no raster"
            )
        blocks.append(_text_block(5, _template("action_5_goal_image")))
        blocks.append(_image_block(5, goal_png))

    blocks.append(_text_block(6, _template("action_6_state_image")))
    blocks.append(_image_block(6, state_png))
    blocks.append(_text_block(6, _history_text(history)))

    goal_clause = f", {goal.text_description}" if cfg.goal_text else ""
    blocks.append(_text_block(7, _template("action_7_command").format(goal_clause=goal_clause)))
    return blocks


def build_action_prompt(
    cfg: PromptConfig,
    grid: GridSpec,
    strengths: StrengthTable,
    state_png: bytes,
    goal: GoalSpec,
    goal_png: bytes | None = None,
    history: list[SqueezeAction] | None = None,
) -> list[dict]:
    """Multimodal content blocks for the action prompt, components 1-7 in order."""
    return _action_components(cfg, grid, strengths, state_png, goal, goal_png, history or [])


def build_proposal_prompt(
    cfg: PromptConfig,
    grid: GridSpec,
    strengths: StrengthTable,
    state_png: bytes,
    goal: GoalSpec,
    k: int,
    goal_png: bytes | None = None,
    history: list[SqueezeAction] | None = None,
    exclude: list[SqueezeAction] | None = None,
) -> list[dict]:
    """Action prompt with the command replaced by a k-distinct-proposals request."""
    blocks = _action_components(cfg, grid, strengths, state_png, goal, goal_png, history or [])
    command = _template("proposal_command").format(k=k)
    if exclude:
        listed = "; ".join(a.label() for a in exclude)
        command += f"\nDo not propose any of these already-known actions: {listed}."
    blocks[-1] = _text_block(7, command)
    return blocks


def build_termination_prompt(
    cfg: PromptConfig,
    state_png: bytes,
    goal: GoalSpec,
    goal_png: bytes | None = None,
) -> list[dict]:
    """Multimodal content blocks for the termination prompt, components 1-5."""
    if not cfg.termination_enabled:
        raise PromptConfigError("termination prompt requested but the toggle is disabled")
    blocks = [
        _text_block(1, _template("term_1_overview")),
        _text_block(2, _template("term_2_decision")),
        _text_block(3, _template("term_3_state_image")),
        _image_block(3, state_png),
    ]
    if cfg.goal_image and goal_png is not None:
        blocks.append(_text_block(4, _template("term_4_goal_image")))
        blocks.append(_image_block(4, goal_png))
    else:
        blocks.append(_text_block(4, f"Goal (described in text): {goal.text_description}."))
    blocks.append(_text_block(5, _template("term_5_command")))
    return blocks


def build_vote_prompt(
    candidate_pngs: list[bytes],
    goal: GoalSpec,
    goal_png: bytes | None = None,
) -> list[dict]:
    """Vote prompt: numbered candidate renders, then the goal, then the ask."""
    if not candidate_pngs:
        raise ValueError("vote prompt needs at least one candidate")
    blocks = [_text_block(1, _template("vote_overview").format(k=len(candidate_pngs)))]
    for i, png in enumerate(candidate_pngs, start=1):
        blocks.append(_text_block(2, f"Candidate {i}:"))
        blocks.append(_image_block(2, png))
    if goal_png is not None:
        blocks.append(_text_block(3, "Goal:"))
        blocks.append(_image_block(3, goal_png))
    else:
        blocks.append(_text_block(3, f"Goal (described in text): {goal.text_description}."))
    blocks.append(_text_block(4, _template("vote_command")))
    return blocks


def corrective_message(problem: str, cfg: PromptConfig, strengths: StrengthTable) -> str:
    """Follow-up text sent after an unparseable reply, quoting the grammar."""
    return _template("corrective").format(problem=problem, grammar=_grammar(cfg, strengths))


def prompt_text(blocks: list[dict]) -> str:
    """Concatenated text of a prompt's text blocks (determinism checks, logs)."""
    return "\n".join(b["text"] for b in blocks if b["type"] == "text")
