"""Rubric-to-clarification data construction pipeline.

Stages: fuzzify an original query into a simple query plus shallow intents,
derive deep intents from rubrics, build and expand the clarification graph,
synthesize offline dialogues along enumerated trajectories, and emit turn-level
training samples with their target intent sets.

LLM replies are accepted as bare JSON or JSON wrapped in code fences. Each
graph-producing step gets exactly one validation-guided repair retry.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .cdag import CDag, parse_cdag, serialize_cdag, validate_cdag
from .errors import (
    ClarienvError,
    ConsistencyError,
    PipelineError,
    UsageError,
)
from .prompts import (
    BASE_GRAPH_PROMPT,
    DEEP_INTENT_PROMPT,
    EXPAND_GRAPH_PROMPT,
    FUZZIFY_PROMPT,
    USER_SIMULATOR_PROMPT,
    render,
)
from .providers import ChatMessage, ChatRequest, chat_request, cosine
from .reward import (
    PenaltyBreakdown,
    RewardBreakdown,
    RewardConfig,
    content_score,
    format_score,
    turn_reward,
)
from .traversal import (
    IntentSet,
    Trajectory,
    init_traversal,
    target_intents,
    visit,
)

STAGE_I = "I"
STAGE_II = "II"


def infer_language(text: str) -> str:
    """Coarse language tag: zh when CJK characters appear, en for Latin text."""
    for ch in text:
        if "一" <= ch <= "鿿":
            return "zh"
    if any(ch.isascii() and ch.isalpha() for ch in text):
        return "en"
    return "other"


@dataclass(frozen=True)
class SeedTask:
    task_id: str
    original_query: str
    rubrics: str = ""

    def __post_init__(self):
        if not self.original_query.strip():
            raise UsageError("original_query must be non-empty")

    @property
    def language(self) -> str:
        return infer_language(self.original_query)


@dataclass(frozen=True)
class IntentRecord:
    kind: str  # "shallow" | "deep"
    text: str
    category: str | None = None

    def __post_init__(self):
        if not self.text:
            raise UsageError("intent text must be non-empty")
        if self.kind == "deep" and not self.category:
            raise UsageError("deep intent records must carry a category")


@dataclass(frozen=True)
class DialogueTurn:
    question: str
    answer: str


@dataclass(frozen=True)
class Dialogue:
    task_id: str
    trajectory_id: str
    simple_query: str
    turns: tuple[DialogueTurn, ...]


@dataclass(frozen=True)
class TurnSample:
    sample_id: str
    task_id: str
    history: tuple[dict, ...]  # [{"role", "text"}, ...] starting with q_s
    target_intents: tuple[str, ...]
    stage: str
    origin: str = "expert"  # "expert" | "forced" | "policy"
    question: str | None = None  # the scored turn's question, for re-scoring
    reward: RewardBreakdown | None = None

    def to_json(self) -> dict:
        row = {
            "sample_id": self.sample_id,
            "task_id": self.task_id,
            "history": list(self.history),
            "target_intents": list(self.target_intents),
            "stage": self.stage,
        }
        if self.origin != "expert":
            row["origin"] = self.origin
        if self.question is not None:
            row["question"] = self.question
        if self.reward is not None:
            row["reward"] = self.reward.to_json()
        return row

    @classmethod
    def from_json(cls, data: dict) -> "TurnSample":
        reward = data.get("reward")
        return cls(
            sample_id=data["sample_id"],
            task_id=data["task_id"],
            history=tuple(data["history"]),
            target_intents=tuple(data["target_intents"]),
            stage=data["stage"],
            origin=data.get("origin", "expert"),
            question=data.get("question"),
            reward=RewardBreakdown.from_json(reward) if reward else None,
        )


_FENCE = re.compile(r"^```[a-zA-Z0-9_-]*\s*\n(.*)\n```\s*$", re.DOTALL)


def strip_fences(reply: str) -> str:
    """Remove a single wrapping code fence, if present."""
    text = reply.strip()
    match = _FENCE.match(text)
    return match.group(1) if match else text


def _chat_json(chat, prompt: str) -> dict:
    """Issue a prompt expecting a JSON object, with one re-prompt retry."""
    last_reply = ""
    for _ in range(2):
        last_reply = chat.chat(chat_request("", prompt))
        try:
            data = json.loads(strip_fences(last_reply))
        except json.JSONDecodeError:
            continue
        if isinstance(data, dict):
            return data
    raise PipelineError(
        "reply was not a parseable JSON object", raw_reply=last_reply
    )


@dataclass(frozen=True)
class FuzzifyResult:
    simple_query: str
    shallow_intents: tuple[IntentRecord, ...]


def fuzzify(task: SeedTask, chat) -> FuzzifyResult:
    """Simplify the original query; removed constraints become shallow intents.

    An empty simple_query with an empty intent list is the valid
    "already minimal" outcome for queries with nothing to simplify.
    """
    prompt = render(FUZZIFY_PROMPT, task=task.original_query)
    data = _chat_json(chat, prompt)
    if "simple_query" not in data or "missing_intent" not in data:
        raise PipelineError(
            "fuzzify reply missing simple_query or missing_intent",
            raw_reply=json.dumps(data, ensure_ascii=False),
        )
    intents = tuple(
        IntentRecord(kind="shallow", text=t) for t in data["missing_intent"]
    )
    return FuzzifyResult(simple_query=data["simple_query"], shallow_intents=intents)


DEEP_CATEGORIES = ("comprehensiveness", "insight")


def derive_deep_intents(task: SeedTask, chat) -> list[IntentRecord]:
    """Turn rubric criteria into first-person deep intents, grouped by category."""
    if not task.rubrics.strip():
        raise UsageError("task has no rubrics to derive deep intents from")
    prompt = render(DEEP_INTENT_PROMPT, rubrics=task.rubrics)
    data = _chat_json(chat, prompt)
    records = []
    for category in DEEP_CATEGORIES:
        if category not in data:
            raise PipelineError(
                f"deep-intent reply missing the {category!r} key",
                raw_reply=json.dumps(data, ensure_ascii=False),
            )
        for text in data[category]:
            records.append(IntentRecord(kind="deep", text=text, category=category))
    return records


def format_intent_list(intents: list[IntentRecord]) -> str:
    return "\n".join(f"- {rec.text}" for rec in intents)


def _chat_graph(chat, prompt: str, check) -> CDag:
    """Issue a graph-producing prompt with one validation-guided repair retry.

    `check(graph)` returns a list of violation strings (empty means accepted).
    """
    reports = []
    current_prompt = prompt
    for _ in range(2):
        reply = chat.chat(chat_request("", current_prompt))
        try:
            graph = parse_cdag(strip_fences(reply))
        except ClarienvError as exc:
            reports.append(str(exc))
            current_prompt = (
                prompt + "\n\n# Previous attempt was rejected\n"
                + "The previous reply could not be parsed: " + str(exc)
            )
            continue
        violations = check(graph)
        if not violations:
            return graph
        reports.append("; ".join(violations))
        current_prompt = (
            prompt + "\n\n# Previous attempt was rejected\n"
            + "Fix these violations and output the corrected JSON object only:\n"
            + "\n".join(f"- {v}" for v in violations)
        )
    raise PipelineError(
        "graph construction failed after the repair retry: "
        + " | ".join(reports)
    )


def build_base_graph(
    simple_query: str, shallow_intents: list[IntentRecord], chat
) -> CDag:
    if not shallow_intents:
        raise UsageError("shallow intent list must be non-empty")
    prompt = render(
        BASE_GRAPH_PROMPT,
        task=simple_query,
        intent_list=format_intent_list(shallow_intents),
    )

    def check(graph: CDag) -> list[str]:
        return [f.message for f in validate_cdag(graph).errors]

    return _chat_graph(chat, prompt, check)


def expand_graph(graph: CDag, all_intents: list[IntentRecord], chat) -> CDag:
    """Deepen a validated base graph; the result must keep every existing node."""
    base_report = validate_cdag(graph)
    if not base_report.ok:
        raise UsageError(
            "base graph fails validation: "
            + "; ".join(f.message for f in base_report.errors)
        )
    prompt = render(
        EXPAND_GRAPH_PROMPT,
        graph_json=serialize_cdag(graph),
        intent_list=format_intent_list(all_intents),
    )

    def check(expanded: CDag) -> list[str]:
        violations = [f.message for f in validate_cdag(expanded).errors]
        dropped = [nid for nid in graph.nodes if nid not in expanded.nodes]
        if dropped:
            violations.append(
                "expanded graph dropped existing nodes: " + ", ".join(dropped)
            )
        return violations

    return _chat_graph(chat, prompt, check)


def _dialogue_messages(
    simple_query: str, turns: list[DialogueTurn], question: str
) -> tuple[ChatMessage, ...]:
    messages = [ChatMessage("user", simple_query)]
    for turn in turns:
        messages.append(ChatMessage("assistant", turn.question))
        messages.append(ChatMessage("user", turn.answer))
    messages.append(ChatMessage("assistant", question))
    return tuple(messages)


def synthesize_dialogue(
    simple_query: str,
    trajectory: Trajectory,
    chat,
    task_id: str = "",
    trajectory_id: str = "",
) -> Dialogue:
    """Generate one (question, answer) turn per trajectory step.

    The question is the step's node question verbatim; the answer is generated
    by one chat call per turn, grounded in the step's chosen option so every
    answer is verifiably tied to its option.
    """
    if not trajectory.steps:
        raise UsageError("trajectory must be non-empty")
    turns: list[DialogueTurn] = []
    for index, step_ in enumerate(trajectory.steps):
        system = render(
            USER_SIMULATOR_PROMPT,
            intent_list=f"- {step_.option}",
        )
        request = ChatRequest(
            system, _dialogue_messages(simple_query, turns, step_.question)
        )
        answer = ""
        for _ in range(2):
            answer = chat.chat(request).strip()
            if answer:
                break
        if not answer:
            raise PipelineError(f"empty user answer at dialogue step {index}")
        turns.append(DialogueTurn(question=step_.question, answer=answer))
    return Dialogue(
        task_id=task_id,
        trajectory_id=trajectory_id,
        simple_query=simple_query,
        turns=tuple(turns),
    )


def history_prefix(simple_query: str, turns: list[DialogueTurn]) -> tuple[dict, ...]:
    """Dialogue history as role/text rows: the simple query, then each
    question/answer pair in order."""
    rows = [{"role": "user", "text": simple_query}]
    for turn in turns:
        rows.append({"role": "assistant", "text": turn.question})
        rows.append({"role": "user", "text": turn.answer})
    return tuple(rows)


def emit_turn_samples(
    dialogue: Dialogue,
    graph: CDag,
    trajectory: Trajectory,
    embedder=None,
    reward_config: RewardConfig | None = None,
) -> list[TurnSample]:
    """One stage-I training sample per dialogue turn.

    Turn t pairs the history prefix before t with the target intent set induced
    by replaying the first t-1 trajectory visits. When an embedder is supplied,
    each sample also stores its turn reward (content against the targets,
    heuristic format, no penalties in stage I).
    """
    if len(dialogue.turns) != len(trajectory.steps):
        raise ConsistencyError(
            f"dialogue has {len(dialogue.turns)} turns but trajectory has "
            f"{len(trajectory.steps)} steps"
        )
    reward_config = reward_config or RewardConfig(stage=STAGE_I)
    samples: list[TurnSample] = []
    state = init_traversal(graph)
    for t, (turn, step_) in enumerate(zip(dialogue.turns, trajectory.steps)):
        if turn.question != step_.question:
            raise ConsistencyError(
                f"step {t}: dialogue question diverges from trajectory question"
            )
        targets = target_intents(state, graph)
        reward = None
        if embedder is not None:
            reward = turn_reward(
                content_score(turn.question, targets, embedder),
                format_score(turn.question),
                PenaltyBreakdown(),
                reward_config,
            )
        samples.append(TurnSample(
            sample_id=f"{dialogue.task_id}:{dialogue.trajectory_id}:{t}",
            task_id=dialogue.task_id,
            history=history_prefix(dialogue.simple_query, list(dialogue.turns[:t])),
            target_intents=targets.intents,
            stage=STAGE_I,
            question=turn.question,
            reward=reward,
        ))
        try:
            state = visit(state, graph, step_.node_id, step_.option_index)
        except UsageError as exc:
            raise ConsistencyError(
                f"trajectory step {t} does not replay against the graph: {exc}"
            )
    return samples


def map_intent_provenance(
    graph: CDag, intents: list[IntentRecord], embedder
) -> dict[str, str]:
    """Side-map from intent text to its best-matching graph node.

    Each intent is assigned to exactly one node (the embedding nearest
    neighbour), so no intent is covered by two nodes.
    """
    if not intents:
        return {}
    node_ids = list(graph.nodes)
    node_texts = [
        graph.nodes[nid].text
        + " "
        + " ".join(opt.text for opt in graph.nodes[nid].options)
        for nid in node_ids
    ]
    node_vectors = embedder.embed(node_texts)
    out: dict[str, str] = {}
    for record in intents:
        vec = embedder.embed_one(record.text)
        scores = [cosine(vec, nv) for nv in node_vectors]
        out[record.text] = node_ids[scores.index(max(scores))]
    return out
