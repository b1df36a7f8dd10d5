"""Turn-level reward engine: content score, format score, penalties, and their
stage-scoped combination.

The combination is piecewise: a clean turn earns beta * content + format; a
penalized turn earns -beta * penalty_total + format. Penalties apply only in
stage II; stage I histories are expert trajectories and carry no flags.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import JudgeError, UsageError
from .prompts import FORMAT_JUDGE_PROMPT, render
from .providers import chat_request, cosine
from .traversal import IntentSet

DEFAULT_BETA = 2.0
DEFAULT_GAMMA = 2.0

QUESTION_MARKS = ("?", "？")


@dataclass(frozen=True)
class RewardConfig:
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA
    stage: str = "I"  # "I" | "II"
    format_mode: str = "heuristic"  # "heuristic" | "llm"

    def __post_init__(self):
        if self.beta <= 0 or self.gamma <= 0:
            raise UsageError("beta and gamma must be positive")
        if self.stage not in ("I", "II"):
            raise UsageError(f"unknown stage {self.stage!r}")
        if self.format_mode not in ("heuristic", "llm"):
            raise UsageError(f"unknown format mode {self.format_mode!r}")


@dataclass(frozen=True)
class PenaltyBreakdown:
    rep: float = 0.0
    inv: float = 0.0
    div: float = 0.0

    @property
    def total(self) -> float:
        return self.rep + self.inv + self.div


@dataclass(frozen=True)
class RewardBreakdown:
    content: float
    format: float
    penalties: PenaltyBreakdown
    total: float
    stage: str

    def to_json(self) -> dict:
        return {
            "content": self.content,
            "format": self.format,
            "rep": self.penalties.rep,
            "inv": self.penalties.inv,
            "div": self.penalties.div,
            "total": self.total,
            "stage": self.stage,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RewardBreakdown":
        return cls(
            content=data["content"],
            format=data["format"],
            penalties=PenaltyBreakdown(
                rep=data["rep"], inv=data["inv"], div=data["div"]
            ),
            total=data["total"],
            stage=data["stage"],
        )


def content_score(question: str, targets: IntentSet, embedder) -> float:
    """Maximum cosine similarity between the question and any target intent."""
    if not question:
        raise UsageError("question must be non-empty")
    if not targets.intents:
        raise UsageError("target intent set must be non-empty")
    vectors = embedder.embed([question, *targets.intents])
    q = vectors[0]
    return max(cosine(q, v) for v in vectors[1:])


def count_subquestions(question: str) -> int:
    """Heuristic sub-question count: question-mark characters, minimum 1."""
    n = sum(question.count(mark) for mark in QUESTION_MARKS)
    return max(n, 1)


_FORMAT_TAG = re.compile(r"<format_score>\s*([0-9.]+)\s*</format_score>")


def _score_from_count(n: int) -> float:
    if n == 1:
        return 1.0
    if n == 2:
        return 0.5
    return 0.0


def format_score(question: str, judge=None, mode: str = "heuristic") -> float:
    """Piecewise format score {1, 0.5, 0} by number of distinct sub-questions.

    Heuristic mode counts question marks locally; llm mode asks the judge
    provider and parses the <format_score> tag, retrying once.
    """
    if not question:
        raise UsageError("question must be non-empty")
    if mode == "heuristic":
        return _score_from_count(count_subquestions(question))
    if mode != "llm":
        raise UsageError(f"unknown format mode {mode!r}")
    if judge is None:
        raise UsageError("llm format mode requires a judge provider")
    prompt = render(FORMAT_JUDGE_PROMPT, question=question)
    for attempt in range(2):
        reply = judge.chat(chat_request("", prompt))
        match = _FORMAT_TAG.search(reply)
        if match:
            value = float(match.group(1))
            if value in (0.0, 0.5, 1.0):
                return value
    raise JudgeError("format judge reply had no parseable <format_score> tag")


def assess_penalties(
    redundant: bool = False,
    irrelevant: bool = False,
    insignificant: bool = False,
    c_rep: int = 0,
    c_div: int = 0,
    config: RewardConfig | None = None,
) -> PenaltyBreakdown:
    """Penalty terms from the gate flags and the pre-turn counters.

    c_rep and c_div are the counts accumulated in the history *before* this
    turn; the current turn's own repetition contributes through the +1 offset.
    The insignificance term is binary.
    """
    if c_rep < 0 or c_div < 0:
        raise UsageError("counters must be non-negative")
    config = config or RewardConfig()
    return PenaltyBreakdown(
        rep=config.gamma * (c_rep + 1) if redundant else 0.0,
        inv=1.0 if insignificant else 0.0,
        div=float(c_div) if irrelevant else 0.0,
    )


def turn_reward(
    content: float,
    format_: float,
    penalties: PenaltyBreakdown,
    config: RewardConfig,
) -> RewardBreakdown:
    """Combine the components into the piecewise turn reward."""
    if format_ not in (0.0, 0.5, 1.0):
        raise UsageError(f"format score must be in {{0, 0.5, 1}}, got {format_}")
    effective = penalties if config.stage == "II" else PenaltyBreakdown()
    if effective.total > 0:
        total = -config.beta * effective.total + format_
    else:
        total = config.beta * content + format_
    return RewardBreakdown(
        content=content,
        format=format_,
        penalties=effective,
        total=total,
        stage=config.stage,
    )
