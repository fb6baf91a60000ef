"""Deterministic simulator and experiment harness for decentralized
multiagent rollout on unmapped grid worlds."""

from .grid import Control, GridWorld, Position, View, ViewMode
from .instances import Instance, generate, validate
from .schedule import LambdaMode, Policy, ProtocolParams, build_schedule
from .engine import RunRecord, run_episode

__version__ = "0.1.0"

__all__ = [
    "Control", "GridWorld", "Position", "View", "ViewMode",
    "Instance", "generate", "validate",
    "LambdaMode", "Policy", "ProtocolParams", "build_schedule",
    "RunRecord", "run_episode", "__version__",
]
