"""Clarification-dialogue environment toolkit.

Builds clarification graphs from underspecified queries, enumerates expert
trajectories, synthesizes dialogues, scores clarification turns, simulates an
intent-aware user, runs teacher-forced rollouts, and serves episodes over HTTP.
"""

from .cdag import CDag, CDagOption, QuestionNode, parse_cdag, serialize_cdag, validate_cdag
from .errors import ClarienvError, PipelineError, UsageError
from .metrics import intent_pr, quality_score
from .providers import (
    CannedChatProvider,
    EchoUserProvider,
    HashedTokenEmbedder,
    ScriptedChatProvider,
    cosine,
)
from .reward import PenaltyBreakdown, RewardBreakdown, RewardConfig, turn_reward
from .simulator import Episode, SimulatorConfig, create_episode, step
from .traversal import Trajectory, enumerate_trajectories, init_traversal, visit

__version__ = "0.1.0"

__all__ = [
    "CDag",
    "CDagOption",
    "CannedChatProvider",
    "ClarienvError",
    "EchoUserProvider",
    "Episode",
    "HashedTokenEmbedder",
    "PenaltyBreakdown",
    "PipelineError",
    "QuestionNode",
    "RewardBreakdown",
    "RewardConfig",
    "ScriptedChatProvider",
    "SimulatorConfig",
    "Trajectory",
    "UsageError",
    "cosine",
    "create_episode",
    "enumerate_trajectories",
    "init_traversal",
    "intent_pr",
    "parse_cdag",
    "quality_score",
    "serialize_cdag",
    "step",
    "turn_reward",
    "validate_cdag",
    "visit",
]
