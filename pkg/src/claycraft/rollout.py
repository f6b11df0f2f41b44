"""Deployment strategies driving planner + simulator + terminator to a
finished run: open-loop (no replanning), iterative replanning, self-consistency
sampling with modal-trajectory selection, and breadth-first tree search with
vote-based candidate values.

All closed-loop strategies share the same outer loop: check the terminator,
stop on budget, decide one action, execute it, repeat. They differ only in how
the next action is decided.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field as dataclass_field

from .errors import (
    CraftError,
    InvalidActionError,
    NoImprovementError,
    PlannerError,
    VoterError,
    WorkspaceFullError,
)
from .goals import GoalSpec
from .grid import SqueezeAction, StrengthTable, canonicalize
from .planners.base import PlannerResponse, TokenUsage
from .sim import ClayField, apply_squeeze

logger = logging.getLogger(__name__)

STRATEGIES = ("no_replan", "iterative", "self_consistency", "tree_of_thought")

REASON_TERMINATOR = "terminator_stop"
REASON_MAX_STEPS = "max_steps"
REASON_PLANNER = "planner_stop"
REASON_ERROR = "error"


@dataclass(frozen=True)
class RolloutConfig:
    strategy: str = "iterative"
    max_steps: int = 12
    sc_samples: int = 10
    tot_branching: int = 4
    tot_depth: int = 2
    tot_beam: int = 4
    vote_samples: int = 5

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.sc_samples < 1:
            raise ValueError("sc_samples must be >= 1")
        if self.tot_branching < 2:
            raise ValueError("tot_branching must be >= 2")
        if self.tot_depth < 1 or self.tot_beam < 1 or self.vote_samples < 1:
            raise ValueError("tot_depth, tot_beam and vote_samples must be >= 1")


@dataclass
class StepRecord:
    pre_field: ClayField
    action: SqueezeAction
    post_field: ClayField
    rationale: str
    usage: TokenUsage


@dataclass
class RunTrace:
    steps: list[StepRecord]
    termination_reason: str
    error: str = ""
    llm_calls: int = 0
    total_usage: TokenUsage = dataclass_field(default_factory=TokenUsage)

    @property
    def n_actions(self) -> int:
        return len(self.steps)

    def final_field(self, initial: ClayField) -> ClayField:
        return self.steps[-1].post_field if self.steps else initial


@dataclass
class Session:
    """Everything one rollout needs: state, goal, planner, terminator, voter."""

    initial_field: ClayField
    goal: GoalSpec
    strengths: StrengthTable
    planner: object
    terminator: object | None = None
    voter: object | None = None
    config: RolloutConfig = dataclass_field(default_factory=RolloutConfig)
    llm_call_counter: object | None = None  # anything with .request_count

    def calls(self) -> int:
        counter = self.llm_call_counter
        return int(counter.request_count) if counter is not None else 0


def run(session: Session) -> RunTrace:
    strategy = session.config.strategy
    if strategy == "no_replan":
        return run_no_replan(session)
    if strategy == "iterative":
        return run_iterative(session)
    if strategy == "self_consistency":
        return run_self_consistency(session)
    return run_tree_of_thought(session)


# ---------------------------------------------------------------------------
# Open loop
# ---------------------------------------------------------------------------


def run_no_replan(session: Session) -> RunTrace:
    """One up-front trajectory, executed open loop (no re-observation)."""
    cfg = session.config
    calls_before = session.calls()
    response: PlannerResponse = session.planner.plan(session.initial_field, session.goal, [])
    trajectory = [canonicalize(a) for a in response.trajectory]
    truncated = len(trajectory) > cfg.max_steps

    steps: list[StepRecord] = []
    field = session.initial_field
    error = ""
    reason = REASON_MAX_STEPS if truncated else REASON_PLANNER
    for i, action in enumerate(trajectory[: cfg.max_steps]):
        try:
            outcome = apply_squeeze(field, action, session.strengths)
        except (InvalidActionError, WorkspaceFullError) as exc:
            reason, error = REASON_ERROR, str(exc)
            break
        steps.append(
            StepRecord(
                pre_field=field,
                action=action,
                post_field=outcome.field,
                rationale=response.rationale if i == 0 else "",
                usage=response.usage if i == 0 else TokenUsage(),
            )
        )
        field = outcome.field
    return RunTrace(
        steps=steps,
        termination_reason=reason,
        error=error,
        llm_calls=session.calls() - calls_before,
        total_usage=response.usage,
    )


# ---------------------------------------------------------------------------
# Closed loop
# ---------------------------------------------------------------------------


def _closed_loop(session: Session, decide) -> RunTrace:
    """Common skeleton: terminate? -> budget? -> decide -> execute -> repeat.

    `decide(field, history) -> (action, rationale, usage)` raises
    NoImprovementError for a clean planner stop and CraftError subclasses for
    error termination.
    """
    cfg = session.config
    calls_before = session.calls()
    field = session.initial_field
    steps: list[StepRecord] = []
    history: list[SqueezeAction] = []
    total_usage = TokenUsage()
    reason, error = REASON_MAX_STEPS, ""

    while True:
        if session.terminator is not None:
            decision = session.terminator.decide(field, session.goal)
            total_usage = total_usage + decision.usage
            if decision.stop:
                reason = REASON_TERMINATOR
                break
        if len(steps) >= cfg.max_steps:
            reason = REASON_MAX_STEPS
            break
        try:
            action, rationale, usage = decide(field, history)
        except NoImprovementError:
            reason = REASON_PLANNER
            break
        except (PlannerError, VoterError, CraftError) as exc:
            reason, error = REASON_ERROR, str(exc)
            break
        total_usage = total_usage + usage
        action = canonicalize(action)
        try:
            outcome = apply_squeeze(field, action, session.strengths)
        except (InvalidActionError, WorkspaceFullError) as exc:
            reason, error = REASON_ERROR, str(exc)
            break
        steps.append(
            StepRecord(
                pre_field=field,
                action=action,
                post_field=outcome.field,
                rationale=rationale,
                usage=usage,
            )
        )
        field = outcome.field
        history.append(action)

    return RunTrace(
        steps=steps,
        termination_reason=reason,
        error=error,
        llm_calls=session.calls() - calls_before,
        total_usage=total_usage,
    )


def run_iterative(session: Session) -> RunTrace:
    """Plan a trajectory, execute only its first action, re-observe, repeat."""

    def decide(field: ClayField, history: list[SqueezeAction]):
        response = session.planner.plan(field, session.goal, history)
        return response.trajectory[0], response.rationale, response.usage

    return _closed_loop(session, decide)


def trajectory_key(trajectory: list[SqueezeAction]) -> tuple:
    """Canonical comparison key: trajectories are equal iff their canonical
    action sequences are equal."""
    return tuple(canonicalize(a).sort_key() for a in trajectory)


def select_modal_trajectory(samples: list[list[SqueezeAction]]) -> list[SqueezeAction]:
    """Most frequent canonical trajectory; ties go to the lexicographically
    smallest canonical key."""
    if not samples:
        raise PlannerError("no trajectory samples to select from")
    keyed = [( trajectory_key(t), [canonicalize(a) for a in t]) for t in samples]
    counts = Counter(key for key, _ in keyed)
    best_key = min(counts, key=lambda k: (-counts[k], k))
    for key, trajectory in keyed:
        if key == best_key:
            return trajectory
    raise AssertionError("unreachable")


def run_self_consistency(session: Session) -> RunTrace:
    """Draw sc_samples trajectories per decision and execute the first action
    of the modal one; failed samples are dropped and logged."""
    cfg = session.config
    sample = getattr(session.planner, "sample", session.planner.plan)

    def decide(field: ClayField, history: list[SqueezeAction]):
        drawn: list[PlannerResponse] = []
        usage = TokenUsage()
        no_improvement = 0
        for i in range(cfg.sc_samples):
            try:
                response = sample(field, session.goal, history)
            except NoImprovementError:
                no_improvement += 1
                continue
            except PlannerError as exc:
                logger.warning("self-consistency sample %d dropped: %s", i + 1, exc)
                continue
            drawn.append(response)
            usage = usage + response.usage
        if not drawn:
            if no_improvement == cfg.sc_samples:
                raise NoImprovementError("every sample reported a local optimum")
            raise PlannerError("all self-consistency samples failed")
        chosen = select_modal_trajectory([r.trajectory for r in drawn])
        rationale = (
            f"self-consistency: modal trajectory over {len(drawn)}/{cfg.sc_samples} samples"
        )
        return chosen[0], rationale, usage

    return _closed_loop(session, decide)


@dataclass
class _TreeNode:
    field: ClayField
    first_action: SqueezeAction | None
    path_votes: int
    order: int


def run_tree_of_thought(session: Session) -> RunTrace:
    """Breadth-first search: propose tot_branching actions per frontier node,
    simulate children, vote vote_samples times per level, keep the tot_beam
    best, then execute the first action of the top-voted path."""
    cfg = session.config
    if session.voter is None:
        raise ValueError("tree_of_thought needs a voter")

    def decide(field: ClayField, history: list[SqueezeAction]):
        usage = TokenUsage()
        frontier = [_TreeNode(field=field, first_action=None, path_votes=0, order=0)]
        order = 1
        for _level in range(cfg.tot_depth):
            children: list[_TreeNode] = []
            for node in frontier:
                node_history = history if node.first_action is None else history + [node.first_action]
                proposals = session.planner.propose(
                    node.field, session.goal, node_history, cfg.tot_branching
                )
                for action in proposals:
                    try:
                        outcome = apply_squeeze(node.field, action, session.strengths)
                    except (InvalidActionError, WorkspaceFullError):
                        continue
                    children.append(
                        _TreeNode(
                            field=outcome.field,
                            first_action=node.first_action or canonicalize(action),
                            path_votes=node.path_votes,
                            order=order,
                        )
                    )
                    order += 1
            if not children:
                raise PlannerError("tree search: zero valid proposals at a level")
            votes = [0] * len(children)
            candidate_fields = [child.field for child in children]
            for _ in range(cfg.vote_samples):
                picked = session.voter.vote(candidate_fields, session.goal)
                votes[picked] += 1
            for child, vote_count in zip(children, votes):
                child.path_votes += vote_count
            children.sort(key=lambda n: (-n.path_votes, n.order))
            frontier = children[: cfg.tot_beam]
        best = frontier[0]  # already (most votes, first proposed)
        assert best.first_action is not None
        rationale = f"tree search: best path votes {best.path_votes}"
        return best.first_action, rationale, usage

    return _closed_loop(session, decide)
