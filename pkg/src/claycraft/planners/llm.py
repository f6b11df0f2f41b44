"""LLM-backed planner and voter: render the state, build the prompt, ask,
parse. One planner instance serves plan (low temperature), sample (sampling
temperature, for self-consistency), and propose (k-candidate requests for
tree search)."""

from __future__ import annotations

from ..errors import TrajectoryParseError, VoterError
from ..goals import GoalSpec
from ..grid import GridSpec, SqueezeAction, StrengthTable
from ..render import RenderSpec, render_goal, render_state
from ..sim import ClayField
from .base import PlannerResponse, TokenUsage
from .client import LlmClient
from .parsing import parse_trajectory, parse_vote
from .prompts import (
    PromptConfig,
    build_action_prompt,
    build_proposal_prompt,
    build_vote_prompt,
)


class LlmPlanner:
    """Plans squeeze trajectories through a chat-completion endpoint."""

    def __init__(
        self,
        client: LlmClient,
        prompt_cfg: PromptConfig,
        grid: GridSpec,
        strengths: StrengthTable,
        render_spec: RenderSpec,
    ) -> None:
        self.client = client
        self.prompt_cfg = prompt_cfg
        self.grid = grid
        self.strengths = strengths
        self.render_spec = render_spec
        self._goal_png_cache: tuple[int, bytes] | None = None

    def _goal_png(self, goal: GoalSpec) -> bytes | None:
        if not (self.prompt_cfg.goal_image and goal.has_raster):
            return None
        if self._goal_png_cache is None or self._goal_png_cache[0] != id(goal):
            png = render_goal(goal, self.grid, self.render_spec)
            self._goal_png_cache = (id(goal), png)
        return self._goal_png_cache[1]

    def _prompt(self, field: ClayField, goal: GoalSpec, history: list[SqueezeAction]) -> list[dict]:
        state_png = render_state(field, self.render_spec)
        return build_action_prompt(
            self.prompt_cfg,
            self.grid,
            self.strengths,
            state_png,
            goal,
            self._goal_png(goal),
            history,
        )

    def plan(
        self, field: ClayField, goal: GoalSpec, history: list[SqueezeAction]
    ) -> PlannerResponse:
        prompt = self._prompt(field, goal, history)
        return self.client.plan(prompt, self.grid, self.prompt_cfg, self.strengths)

    def sample(
        self, field: ClayField, goal: GoalSpec, history: list[SqueezeAction]
    ) -> PlannerResponse:
        """One stochastic trajectory draw (self-consistency sampling)."""
        prompt = self._prompt(field, goal, history)
        return self.client.plan(
            prompt,
            self.grid,
            self.prompt_cfg,
            self.strengths,
            temperature=self.client.endpoint.sampling_temperature,
        )

    def propose(
        self,
        field: ClayField,
        goal: GoalSpec,
        history: list[SqueezeAction],
        k: int,
    ) -> list[SqueezeAction]:
        """Up to k distinct candidate actions; duplicates after
        canonicalization trigger one re-request, then are dropped."""
        state_png = render_state(field, self.render_spec)
        goal_png = self._goal_png(goal)
        prompt = build_proposal_prompt(
            self.prompt_cfg, self.grid, self.strengths, state_png, goal, k, goal_png, history
        )
        response = self.client.plan(prompt, self.grid, self.prompt_cfg, self.strengths,
                                    temperature=self.client.endpoint.sampling_temperature)
        distinct = _dedup(response.trajectory)
        if len(distinct) < k:
            retry_prompt = build_proposal_prompt(
                self.prompt_cfg,
                self.grid,
                self.strengths,
                state_png,
                goal,
                k - len(distinct),
                goal_png,
                history,
                exclude=distinct,
            )
            try:
                more = self.client.plan(
                    retry_prompt,
                    self.grid,
                    self.prompt_cfg,
                    self.strengths,
                    temperature=self.client.endpoint.sampling_temperature,
                )
                distinct = _dedup(distinct + more.trajectory)
            except Exception:
                pass  # keep what we have; duplicates are dropped, not fatal
        return distinct[:k]


def _dedup(actions: list[SqueezeAction]) -> list[SqueezeAction]:
    seen: set[tuple] = set()
    unique = []
    for action in actions:
        key = action.sort_key()
        if key not in seen:
            seen.add(key)
            unique.append(action)
    return unique


class LlmVoter:
    """Casts one vote per call over rendered candidate states."""

    def __init__(
        self,
        client: LlmClient,
        prompt_cfg: PromptConfig,
        grid: GridSpec,
        strengths: StrengthTable,
        render_spec: RenderSpec,
    ) -> None:
        self.client = client
        self.prompt_cfg = prompt_cfg
        self.grid = grid
        self.strengths = strengths
        self.render_spec = render_spec

    def vote(self, candidate_fields: list[ClayField], goal: GoalSpec) -> int:
        pngs = [render_state(f, self.render_spec) for f in candidate_fields]
        goal_png = (
            render_goal(goal, self.grid, self.render_spec)
            if (self.prompt_cfg.goal_image and goal.has_raster)
            else None
        )
        prompt = build_vote_prompt(pngs, goal, goal_png)

        def parse(text: str) -> int:
            return parse_vote(text, len(candidate_fields))

        try:
            picked, _, _ = self.client.ask(
                prompt,
                parse=parse,
                problem_label="Answer with VOTE: <candidate number>.",
                prompt_cfg=self.prompt_cfg,
                strengths=self.strengths,
                temperature=self.client.endpoint.sampling_temperature,
            )
        except Exception as exc:
            raise VoterError(str(exc)) from exc
        return int(picked)
