"""Termination agents: the LLM judge and the metric fallback.

The fallback stops when the IoU between the state occupancy and the goal mask
reaches a threshold, so offline (scripted) runs need no network at all.
"""

from __future__ import annotations

from ..errors import TextOnlyGoalError
from ..goals import GoalSpec
from ..sim import ClayField, mask_iou, occupancy_mask
from .base import TerminationDecision, TokenUsage
from .client import LlmClient
from .parsing import parse_termination_verdict
from .prompts import PromptConfig, build_termination_prompt

DEFAULT_IOU_THRESHOLD = 0.85


class MetricTerminator:
    """Stop when IoU(occupancy, goal mask) reaches the threshold."""

    def __init__(self, iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> None:
        if not (0.0 < iou_threshold <= 1.0):
            raise ValueError("iou_threshold must be in (0, 1]")
        self.iou_threshold = iou_threshold

    def decide(self, field: ClayField, goal: GoalSpec) -> TerminationDecision:
        if not goal.has_raster:
            raise TextOnlyGoalError("metric terminator needs a goal mask")
        iou = mask_iou(occupancy_mask(field), goal.mask)
        stop = iou >= self.iou_threshold
        return TerminationDecision(
            stop=stop,
            rationale=f"IoU {iou:.4f} {'>=' if stop else '<'} {self.iou_threshold}",
        )

    def iou(self, field: ClayField, goal: GoalSpec) -> float:
        return mask_iou(occupancy_mask(field), goal.require_mask())


class LlmTerminator:
    """Asks the termination prompt and parses the STOP/CONTINUE verdict."""

    def __init__(
        self,
        client: LlmClient,
        prompt_cfg: PromptConfig,
        strengths,
        render_state_fn,
        render_goal_fn,
    ) -> None:
        self.client = client
        self.prompt_cfg = prompt_cfg
        self.strengths = strengths
        self._render_state = render_state_fn
        self._render_goal = render_goal_fn

    def decide(self, field: ClayField, goal: GoalSpec) -> TerminationDecision:
        state_png = self._render_state(field)
        goal_png = self._render_goal(goal) if (goal.has_raster and self.prompt_cfg.goal_image) else None
        prompt = build_termination_prompt(self.prompt_cfg, state_png, goal, goal_png)
        verdict, text, usage = self.client.ask(
            prompt,
            parse=parse_termination_verdict,
            problem_label="Answer STOP or CONTINUE.",
            prompt_cfg=self.prompt_cfg,
            strengths=self.strengths,
        )
        return TerminationDecision(stop=bool(verdict), rationale=text, usage=usage)


def decide_termination(terminator, field: ClayField, goal: GoalSpec) -> TerminationDecision:
    """Run whichever termination agent the session is configured with."""
    return terminator.decide(field, goal)
