"""Shared planner data types and cost accounting."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..grid import SqueezeAction


@dataclass
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            input_tokens=self.input_tokens + other.input_tokens,
            output_tokens=self.output_tokens + other.output_tokens,
        )

    def to_dict(self) -> dict:
        return {"input_tokens": self.input_tokens, "output_tokens": self.output_tokens}


def usage_cost_usd(usage: TokenUsage, price_in_per_mtok: float, price_out_per_mtok: float) -> float:
    """USD cost of a usage total at per-million-token prices."""
    return (
        usage.input_tokens * price_in_per_mtok + usage.output_tokens * price_out_per_mtok
    ) / 1e6


@dataclass
class PlannerResponse:
    """A planner's answer: the raw text, the parsed trajectory, and usage."""

    raw_text: str
    trajectory: list[SqueezeAction]
    rationale: str = ""
    usage: TokenUsage = field(default_factory=TokenUsage)

    def __post_init__(self) -> None:
        if not self.trajectory:
            raise ValueError("PlannerResponse requires a non-empty trajectory")


@dataclass
class TerminationDecision:
    stop: bool
    rationale: str = ""
    usage: TokenUsage = field(default_factory=TokenUsage)
