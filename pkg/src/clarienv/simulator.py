"""Intent-aware user simulator.

Each episode is a fixed-budget state machine over a latent intent set. A step
passes the agent's question through two embedding gates (repetition against
prior questions, relevance against the latent intents), optionally an
LLM insignificance judge, and only then generates a grounded user response.
Flagged turns get canned feedback, consume the turn budget, and feed the
penalty counters.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import JudgeError, UsageError
from .prompts import INSIGNIFICANCE_JUDGE_PROMPT, USER_SIMULATOR_PROMPT, render
from .providers import ChatMessage, ChatRequest, EmbeddingVector, chat_request, cosine
from .reward import (
    PenaltyBreakdown,
    RewardBreakdown,
    RewardConfig,
    assess_penalties,
    content_score,
    format_score,
    turn_reward,
)
from .traversal import IntentSet

DEFAULT_TAU_REP = 0.92
DEFAULT_TAU_REL = 0.8
DEFAULT_MAX_TURNS = 9

REDUNDANT_FEEDBACK = "You already asked that."
IRRELEVANT_FEEDBACK = "This question is not important to me."
INSIGNIFICANT_FEEDBACK = (
    "This question just restates my request; it is not important to me."
)

STATUS_ANSWERED = "answered"
STATUS_REDUNDANT = "redundant"
STATUS_IRRELEVANT = "irrelevant"
STATUS_INSIGNIFICANT = "insignificant"

_VERDICT_TAG = re.compile(r"<verdict>\s*([01])\s*</verdict>")


@dataclass(frozen=True)
class SimulatorConfig:
    tau_rep: float = DEFAULT_TAU_REP
    tau_rel: float = DEFAULT_TAU_REL
    max_turns: int = DEFAULT_MAX_TURNS
    reward: RewardConfig = field(default_factory=lambda: RewardConfig(stage="II"))
    insignificance_judging: bool = False
    redundant_feedback: str = REDUNDANT_FEEDBACK
    irrelevant_feedback: str = IRRELEVANT_FEEDBACK
    insignificant_feedback: str = INSIGNIFICANT_FEEDBACK

    def __post_init__(self):
        if not (0.0 < self.tau_rep <= 1.0):
            raise UsageError("tau_rep must be in (0, 1]")
        if not (0.0 <= self.tau_rel < 1.0):
            raise UsageError("tau_rel must be in [0, 1)")
        if self.tau_rel >= self.tau_rep:
            raise UsageError("tau_rel must be below tau_rep")
        if self.max_turns < 1:
            raise UsageError("max_turns must be positive")


@dataclass
class TurnRecord:
    question: str
    status: str
    response: str
    reward: RewardBreakdown | None = None
    origin: str = "policy"  # "policy" | "forced"


@dataclass
class StepOutcome:
    status: str
    response: str
    reward: RewardBreakdown
    c_rep: int
    c_div: int
    turn: int
    done: bool


@dataclass
class Episode:
    episode_id: str
    simple_query: str
    latent_intents: tuple[str, ...]
    config: SimulatorConfig
    embedder: object
    user_chat: object | None = None
    judge_chat: object | None = None
    history: list[TurnRecord] = field(default_factory=list)
    c_rep: int = 0
    c_div: int = 0
    closed: bool = False
    intent_vectors: tuple[EmbeddingVector, ...] = ()
    question_vectors: list[EmbeddingVector] = field(default_factory=list)

    @property
    def turn(self) -> int:
        return len(self.history)


def create_episode(
    simple_query: str,
    intents: list[str],
    config: SimulatorConfig,
    embedder,
    user_chat=None,
    judge_chat=None,
    episode_id: str = "",
) -> Episode:
    """Build an episode with the latent intent embeddings precomputed once."""
    if not intents:
        raise UsageError("latent intent list must be non-empty")
    if not simple_query.strip():
        raise UsageError("simple query must be non-empty")
    return Episode(
        episode_id=episode_id,
        simple_query=simple_query,
        latent_intents=tuple(intents),
        config=config,
        embedder=embedder,
        user_chat=user_chat,
        judge_chat=judge_chat,
        intent_vectors=tuple(embedder.embed(list(intents))),
    )


def is_done(episode: Episode) -> bool:
    return episode.closed or episode.turn >= episode.config.max_turns


def close_episode(episode: Episode) -> None:
    episode.closed = True


def seed_forced_turns(episode: Episode, turns: list[tuple[str, str]]) -> None:
    """Append expert (question, answer) turns as forced history.

    Forced turns carry no flags and no reward; their questions still count for
    the repetition gate of later policy turns.
    """
    if episode.history:
        raise UsageError("forced turns must be seeded before any step")
    if len(turns) >= episode.config.max_turns:
        raise UsageError("forced prefix must be shorter than the turn budget")
    for question, answer in turns:
        episode.question_vectors.append(episode.embedder.embed_one(question))
        episode.history.append(TurnRecord(
            question=question,
            status=STATUS_ANSWERED,
            response=answer,
            reward=None,
            origin="forced",
        ))


def _user_messages(episode: Episode, question: str) -> tuple[ChatMessage, ...]:
    messages = [ChatMessage("user", episode.simple_query)]
    for record in episode.history:
        messages.append(ChatMessage("assistant", record.question))
        messages.append(ChatMessage("user", record.response))
    messages.append(ChatMessage("assistant", question))
    return tuple(messages)


def _judge_insignificant(episode: Episode, question: str) -> bool:
    prompt = render(
        INSIGNIFICANCE_JUDGE_PROMPT,
        original_query=episode.simple_query,
        question=question,
    )
    for _ in range(2):
        reply = episode.judge_chat.chat(chat_request("", prompt))
        match = _VERDICT_TAG.search(reply)
        if match:
            return match.group(1) == "1"
    raise JudgeError("insignificance judge reply had no parseable <verdict> tag")


def step(
    episode: Episode,
    question: str,
    target_intents_for_reward: IntentSet | None = None,
) -> StepOutcome:
    """Run one simulator turn. Atomic: provider failures leave the episode
    unchanged. Gates short-circuit, so at most one flag fires and no user
    response is generated for a flagged question."""
    if is_done(episode):
        raise UsageError("episode is done; no further steps allowed")
    if not question.strip():
        raise UsageError("question must be non-empty")

    config = episode.config
    q_vec = episode.embedder.embed_one(question)

    redundant = any(
        cosine(q_vec, prior) > config.tau_rep
        for prior in episode.question_vectors
    )
    irrelevant = False
    if not redundant:
        relevance = max(cosine(q_vec, v) for v in episode.intent_vectors)
        irrelevant = relevance < config.tau_rel
    insignificant = False
    if (
        not redundant
        and not irrelevant
        and config.reward.stage == "II"
        and config.insignificance_judging
        and episode.judge_chat is not None
    ):
        insignificant = _judge_insignificant(episode, question)

    fmt = format_score(
        question,
        judge=episode.judge_chat,
        mode=config.reward.format_mode,
    )
    targets = target_intents_for_reward or IntentSet(
        intents=episode.latent_intents, node_ids=()
    )
    content = content_score(question, targets, episode.embedder)
    penalties = assess_penalties(
        redundant=redundant,
        irrelevant=irrelevant,
        insignificant=insignificant,
        c_rep=episode.c_rep,
        c_div=episode.c_div,
        config=config.reward,
    )
    reward = turn_reward(content, fmt, penalties, config.reward)

    if redundant:
        status, response = STATUS_REDUNDANT, config.redundant_feedback
    elif irrelevant:
        status, response = STATUS_IRRELEVANT, config.irrelevant_feedback
    elif insignificant:
        status, response = STATUS_INSIGNIFICANT, config.insignificant_feedback
    else:
        status = STATUS_ANSWERED
        if episode.user_chat is None:
            raise UsageError("episode has no user chat provider for answers")
        system = render(
            USER_SIMULATOR_PROMPT,
            intent_list="\n".join(f"- {i}" for i in episode.latent_intents),
        )
        response = episode.user_chat.chat(
            ChatRequest(system, _user_messages(episode, question))
        )

    # Commit: everything that can fail has already run.
    episode.question_vectors.append(q_vec)
    episode.history.append(TurnRecord(question, status, response, reward))
    if redundant:
        episode.c_rep += 1
    if irrelevant:
        episode.c_div += 1
    return StepOutcome(
        status=status,
        response=response,
        reward=reward,
        c_rep=episode.c_rep,
        c_div=episode.c_div,
        turn=episode.turn,
        done=is_done(episode),
    )


def episode_transcript(episode: Episode) -> list[dict]:
    """One JSON row per turn, suitable for JSONL output."""
    rows = []
    for i, record in enumerate(episode.history, start=1):
        rows.append({
            "episode_id": episode.episode_id,
            "turn": i,
            "question": record.question,
            "status": record.status,
            "response": record.response,
            "reward": record.reward.to_json() if record.reward else None,
            "c_rep": episode.c_rep,
            "c_div": episode.c_div,
        })
    return rows
