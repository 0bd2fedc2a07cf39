"""
Exception hierarchy shared by the simulator, the learner and the front ends
"""

from typing import Any, Dict, Optional


class SchedLabError(Exception):
    """Base class for all domain errors"""


class InvalidGraphError(SchedLabError):
    """Bad DAG parameters or a graph that is not acyclic"""


class IllegalActionError(SchedLabError):
    """Action not allowed by the current masks"""


class EpisodeNotFinishedError(SchedLabError):
    """Result queried before the episode terminated"""


class ShapeError(SchedLabError):
    """Incompatible operand shapes or degenerate masks"""


class CheckpointError(SchedLabError):
    """Checkpoint cannot be read or does not match the requested architecture"""


class TrainingDivergedError(SchedLabError):
    """A loss became non-finite during an update"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
