"""Exception hierarchy shared across the package."""


class CraftError(Exception):
    """Base class for all claycraft errors."""


class CellParseError(CraftError):
    """Cell text is malformed or names a cell outside the grid."""


class InvalidActionError(CraftError):
    """Action violates a simulator precondition (identical cells, gap >= center distance)."""


class WorkspaceFullError(CraftError):
    """No spare capacity anywhere in the workspace to relocate displaced mass."""


class EmptyMaskError(CraftError):
    """Mask has no component large enough to trace a contour from."""


class DegenerateContourError(CraftError):
    """Contour has a sample with near-zero speed; curvature is undefined."""


class TextOnlyGoalError(CraftError):
    """Goal has no raster form, so it cannot be rendered or compared by mask."""


class TrajectoryParseError(CraftError):
    """Planner response text contains no parseable action line, or a malformed one."""


class NoImprovementError(CraftError):
    """No candidate action strictly improves on the current state (greedy local optimum)."""


class PlannerError(CraftError):
    """Planner failed after exhausting retries (transport or parse failure)."""


class VoterError(CraftError):
    """Vote collection failed after exhausting retries."""


class PromptConfigError(CraftError):
    """Prompt toggle combination is invalid (e.g. every component disabled)."""


class ConfigError(CraftError):
    """Experiment or endpoint configuration is inconsistent."""
