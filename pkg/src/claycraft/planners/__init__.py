"""Planners: prompt assembly, LLM transport, response parsing, the scripted
greedy planner, and termination agents."""

from .base import PlannerResponse, TerminationDecision, TokenUsage, usage_cost_usd
from .client import LlmClient, LlmEndpointConfig, LlmTransport, llm_plan
from .parsing import parse_termination_verdict, parse_trajectory, parse_vote
from .prompts import (
    PromptConfig,
    build_action_prompt,
    build_proposal_prompt,
    build_termination_prompt,
    build_vote_prompt,
)
from .scripted import ScriptedPlanner, scripted_plan
from .termination import LlmTerminator, MetricTerminator, decide_termination

__all__ = [
    "PlannerResponse",
    "TerminationDecision",
    "TokenUsage",
    "usage_cost_usd",
    "LlmClient",
    "LlmEndpointConfig",
    "LlmTransport",
    "llm_plan",
    "parse_termination_verdict",
    "parse_trajectory",
    "parse_vote",
    "PromptConfig",
    "build_action_prompt",
    "build_proposal_prompt",
    "build_termination_prompt",
    "build_vote_prompt",
    "ScriptedPlanner",
    "scripted_plan",
    "LlmTerminator",
    "MetricTerminator",
    "decide_termination",
]
