"""Stage-II data engine: partial teacher forcing plus on-policy continuation.

Rollouts seed an episode with a ground-truth dialogue prefix, let a policy chat
provider continue against the simulator, then decompose the result into
turn-level training samples and mix them with stage-I data.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .cdag import CDag
from .errors import ClarienvError, ConsistencyError, UsageError
from .pipeline import Dialogue, TurnSample, history_prefix, STAGE_II
from .prompts import AGENT_SYSTEM_PROMPT
from .providers import ChatMessage, ChatRequest, cosine
from .reward import RewardBreakdown
from .simulator import (
    Episode,
    SimulatorConfig,
    create_episode,
    is_done,
    seed_forced_turns,
    step,
)
from .traversal import (
    IntentSet,
    Trajectory,
    init_traversal,
    intent_text,
    target_intents,
    visit,
)

DEFAULT_ROLLOUTS_PER_QUERY = 8
MAX_PREFIX_LENGTHS = 4


@dataclass(frozen=True)
class RolloutSpec:
    policy: object  # chat provider acting as the agent
    rollouts_per_query: int = DEFAULT_ROLLOUTS_PER_QUERY
    prefix_lengths: tuple[int, ...] | None = None  # None: derived per dialogue
    simulator: SimulatorConfig = field(default_factory=SimulatorConfig)

    def __post_init__(self):
        if self.rollouts_per_query < 1:
            raise UsageError("rollouts per query must be positive")
        if self.prefix_lengths is not None:
            for k in self.prefix_lengths:
                if k < 0 or k >= self.simulator.max_turns:
                    raise UsageError(
                        "prefix lengths must be non-negative and below max_turns"
                    )


@dataclass(frozen=True)
class RolloutTurn:
    question: str
    status: str
    response: str
    reward: RewardBreakdown | None
    origin: str  # "forced" | "policy"


@dataclass(frozen=True)
class RolloutTrajectory:
    task_id: str
    prefix_length: int
    turns: tuple[RolloutTurn, ...]
    complete: bool = True


@dataclass(frozen=True)
class RolloutInput:
    dialogue: Dialogue
    graph: CDag
    trajectory: Trajectory


def make_prefixed_context(dialogue: Dialogue, k: int) -> list[tuple[str, str]]:
    """The first k expert turns, as (question, answer) pairs for seeding."""
    if not (0 <= k <= len(dialogue.turns)):
        raise UsageError(
            f"prefix length {k} out of range for a {len(dialogue.turns)}-turn dialogue"
        )
    return [(t.question, t.answer) for t in dialogue.turns[:k]]


def default_prefix_lengths(dialogue: Dialogue) -> list[int]:
    """0 .. expert length - 1, capped at a handful of distinct values."""
    lengths = list(range(len(dialogue.turns)))
    if len(lengths) > MAX_PREFIX_LENGTHS:
        stride = len(lengths) / MAX_PREFIX_LENGTHS
        lengths = sorted({int(i * stride) for i in range(MAX_PREFIX_LENGTHS)})
    return lengths


def _policy_messages(episode: Episode) -> tuple[ChatMessage, ...]:
    messages = [ChatMessage("user", episode.simple_query)]
    for record in episode.history:
        messages.append(ChatMessage("assistant", record.question))
        messages.append(ChatMessage("user", record.response))
    return tuple(messages)


def run_one_rollout(
    spec: RolloutSpec,
    item: RolloutInput,
    prefix_length: int,
    embedder,
    user_chat,
    judge_chat=None,
) -> RolloutTrajectory:
    """Seed one episode with a forced prefix and let the policy run it out.

    The latent intent set is the ground-truth intent sequence of the expert
    trajectory. Policy prompts never contain the intent texts; the policy sees
    only the dialogue so far under its clarification system prompt.
    """
    intents = list(item.trajectory.intent_sequence)
    episode = create_episode(
        item.dialogue.simple_query,
        intents,
        spec.simulator,
        embedder,
        user_chat=user_chat,
        judge_chat=judge_chat,
    )
    forced = make_prefixed_context(item.dialogue, prefix_length)
    seed_forced_turns(episode, forced)
    turns: list[RolloutTurn] = [
        RolloutTurn(q, "answered", a, None, "forced") for q, a in forced
    ]

    tracker = TargetTracker(item.graph, item.trajectory, prefix_length, embedder,
                            spec.simulator.tau_rel)
    complete = True
    while not is_done(episode):
        request = ChatRequest(AGENT_SYSTEM_PROMPT, _policy_messages(episode))
        try:
            question = spec.policy.chat(request)
            outcome = step(
                episode, question,
                target_intents_for_reward=tracker.current(),
            )
        except UsageError:
            raise
        except ClarienvError:
            complete = False
            break
        turns.append(RolloutTurn(
            question=question,
            status=outcome.status,
            response=outcome.response,
            reward=outcome.reward,
            origin="policy",
        ))
        if outcome.status == "answered":
            tracker.advance(question)
    return RolloutTrajectory(
        task_id=item.dialogue.task_id,
        prefix_length=prefix_length,
        turns=tuple(turns),
        complete=complete,
    )


def run_rollouts(
    spec: RolloutSpec,
    inputs: list[RolloutInput],
    embedder,
    user_chat,
    judge_chat=None,
) -> list[RolloutTrajectory]:
    """All rollouts: |inputs| x |prefix lengths| x rollouts-per-query."""
    out: list[RolloutTrajectory] = []
    for item in inputs:
        lengths = (
            list(spec.prefix_lengths)
            if spec.prefix_lengths is not None
            else default_prefix_lengths(item.dialogue)
        )
        for k in lengths:
            for _ in range(spec.rollouts_per_query):
                out.append(run_one_rollout(
                    spec, item, k, embedder, user_chat, judge_chat
                ))
    return out


class TargetTracker:
    """Target intent set during policy turns.

    The traversal state is the one induced by replaying the forced expert
    prefix. During policy turns the frame is held fixed, except that a policy
    question matching a top-frame intent at or above the relevance threshold
    visits that node (taking its first option, since option choice is not
    observable from the question alone).
    """

    def __init__(self, graph: CDag, expert: Trajectory, prefix_length: int,
                 embedder, match_threshold: float):
        self.graph = graph
        self.embedder = embedder
        self.match_threshold = match_threshold
        state = init_traversal(graph)
        for step_ in expert.steps[:prefix_length]:
            try:
                state = visit(state, graph, step_.node_id, step_.option_index)
            except UsageError as exc:
                raise ConsistencyError(
                    f"expert prefix does not replay against the graph: {exc}"
                )
        self.state = state

    def current(self) -> IntentSet | None:
        if self.state.exhausted:
            return None
        return target_intents(self.state, self.graph)

    def advance(self, question: str) -> None:
        if self.state.exhausted:
            return
        frame = self.state.top_frame()
        q_vec = self.embedder.embed_one(question)
        best_id, best_score = None, -2.0
        for nid in frame:
            vec = self.embedder.embed_one(intent_text(self.graph.node(nid)))
            score = cosine(q_vec, vec)
            if score > best_score:
                best_id, best_score = nid, score
        if best_id is not None and best_score >= self.match_threshold:
            self.state = visit(self.state, self.graph, best_id, 0)


def decompose(
    rollout: RolloutTrajectory,
    graph: CDag,
    expert: Trajectory,
    embedder,
    match_threshold: float = 0.8,
    simple_query: str = "",
) -> list[TurnSample]:
    """One stage-II turn sample per policy-origin turn.

    The forced prefix is replayed through the traversal to fix the initial
    target set; target advancement during policy turns mirrors the rollout's
    own tracker.
    """
    from .pipeline import DialogueTurn  # local import to avoid a cycle at load

    tracker = TargetTracker(graph, expert, rollout.prefix_length, embedder,
                            match_threshold)
    samples: list[TurnSample] = []
    seen: list[DialogueTurn] = [
        DialogueTurn(t.question, t.response) for t in rollout.turns[:rollout.prefix_length]
    ]
    for i, turn in enumerate(rollout.turns[rollout.prefix_length:]):
        if turn.origin != "policy":
            raise ConsistencyError(
                f"turn {rollout.prefix_length + i} after the prefix is not policy-origin"
            )
        targets = tracker.current()
        samples.append(TurnSample(
            sample_id=f"{rollout.task_id}:p{rollout.prefix_length}:{i}",
            task_id=rollout.task_id,
            history=history_prefix(simple_query, seen),
            target_intents=targets.intents if targets else (),
            stage=STAGE_II,
            origin="policy",
            question=turn.question,
            reward=turn.reward,
        ))
        seen.append(DialogueTurn(turn.question, turn.response))
        if turn.status == "answered":
            tracker.advance(turn.question)
    return samples


def mix(
    stage1: list[TurnSample], stage2: list[TurnSample], seed: int
) -> list[TurnSample]:
    """Seeded shuffle of the concatenation; stable across runs for equal seeds."""
    combined = list(stage1) + list(stage2)
    random.Random(seed).shuffle(combined)
    return combined
