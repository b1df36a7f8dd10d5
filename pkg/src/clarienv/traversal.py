"""Stack-based C-DAG traversal and exhaustive trajectory enumeration.

The traversal stack holds frames: the start-node list is one frame, and every
non-empty child list pushed on a visit is one frame. The topmost frame is the
set of currently accessible questions, which defines the target intent set for
the next turn. Trajectories branch on option choices during a depth-first
enumeration; in structural mode branching happens only where option choices
actually change the reachable children.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cdag import CDag, QuestionNode, validate_cdag
from .errors import TraversalComplete, UsageError


@dataclass(frozen=True)
class TraversalState:
    frames: tuple[tuple[str, ...], ...]
    visited: frozenset[str]
    choices: tuple[tuple[str, int], ...]

    @property
    def exhausted(self) -> bool:
        return not self.frames

    def top_frame(self) -> tuple[str, ...]:
        if not self.frames:
            raise TraversalComplete("traversal stack is exhausted")
        return self.frames[-1]


@dataclass(frozen=True)
class TrajectoryStep:
    node_id: str
    question: str
    option_index: int
    option: str


@dataclass(frozen=True)
class Trajectory:
    graph_id: str
    steps: tuple[TrajectoryStep, ...]
    intent_sequence: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class IntentSet:
    intents: tuple[str, ...]
    node_ids: tuple[str, ...]


def intent_text(node: QuestionNode) -> str:
    """The intent carried by a question node: its question joined with its
    option texts, specific enough to discriminate sibling questions."""
    return " / ".join([node.text] + [opt.text for opt in node.options])


def _require_valid(graph: CDag) -> None:
    report = validate_cdag(graph)
    if not report.ok:
        raise UsageError(
            "graph fails validation: " + "; ".join(f.message for f in report.errors)
        )


def init_traversal(graph: CDag) -> TraversalState:
    _require_valid(graph)
    return TraversalState(
        frames=(tuple(graph.start_node_ids),),
        visited=frozenset(),
        choices=(),
    )


def target_intents(state: TraversalState, graph: CDag) -> IntentSet:
    """Intents of the topmost frame, in frame order."""
    frame = state.top_frame()
    return IntentSet(
        intents=tuple(intent_text(graph.node(nid)) for nid in frame),
        node_ids=frame,
    )


def visit(state: TraversalState, graph: CDag, node_id: str, option_index: int) -> TraversalState:
    """Visit a node from the top frame, choosing one of its options.

    The chosen option's children (minus already-visited ids and ids already
    waiting in a frame) are pushed as a new topmost frame; empty frames are
    popped eagerly.
    """
    frame = state.top_frame()
    if node_id not in frame:
        raise UsageError(f"node {node_id!r} is not in the top frame {list(frame)}")
    node = graph.node(node_id)
    if not (0 <= option_index < len(node.options)):
        raise UsageError(
            f"option index {option_index} out of bounds for node {node_id!r} "
            f"({len(node.options)} options)"
        )

    frames = [list(f) for f in state.frames]
    frames[-1].remove(node_id)
    visited = state.visited | {node_id}

    pending = {nid for f in frames for nid in f}
    push = [
        nid
        for nid in node.options[option_index].next_node_ids
        if nid not in visited and nid not in pending
    ]
    while frames and not frames[-1]:
        frames.pop()
    if push:
        frames.append(push)

    return TraversalState(
        frames=tuple(tuple(f) for f in frames),
        visited=visited,
        choices=state.choices + ((node_id, option_index),),
    )


def _branch_indices(node: QuestionNode, mode: str) -> list[int]:
    if mode == "full":
        return list(range(len(node.options)))
    # structural: one representative per distinct child set, first index wins
    seen: set[frozenset[str]] = set()
    indices = []
    for i, opt in enumerate(node.options):
        key = frozenset(opt.next_node_ids)
        if key not in seen:
            seen.add(key)
            indices.append(i)
    return indices


def enumerate_trajectories(
    graph: CDag,
    cap: int = 45,
    mode: str = "structural",
    graph_id: str = "",
) -> list[Trajectory]:
    """Deterministic depth-first enumeration of complete trajectories.

    Visits top-frame nodes in frame order; branches lexicographically in option
    index; truncates at `cap` trajectories. `mode` is "structural" (branch only
    where option child sets differ) or "full" (every option branches).
    """
    if cap < 1:
        raise UsageError("cap must be at least 1")
    if mode not in ("structural", "full"):
        raise UsageError(f"unknown enumeration mode {mode!r}")
    _require_valid(graph)

    results: list[Trajectory] = []

    def recurse(state: TraversalState, steps: list[TrajectoryStep]) -> None:
        if len(results) >= cap:
            return
        if state.exhausted:
            results.append(Trajectory(
                graph_id=graph_id,
                steps=tuple(steps),
                intent_sequence=tuple(
                    intent_text(graph.node(s.node_id)) for s in steps
                ),
            ))
            return
        node_id = state.top_frame()[0]
        node = graph.node(node_id)
        for option_index in _branch_indices(node, mode):
            if len(results) >= cap:
                return
            next_state = visit(state, graph, node_id, option_index)
            steps.append(TrajectoryStep(
                node_id=node_id,
                question=node.text,
                option_index=option_index,
                option=node.options[option_index].text,
            ))
            recurse(next_state, steps)
            steps.pop()

    recurse(init_traversal(graph), [])
    return results


def replay_trajectory(graph: CDag, trajectory: Trajectory) -> list[TraversalState]:
    """Replay a trajectory's visit sequence; returns the state after each step
    (index 0 is the initial state). Raises UsageError on an invalid sequence."""
    states = [init_traversal(graph)]
    for step in trajectory.steps:
        states.append(visit(states[-1], graph, step.node_id, step.option_index))
    return states


def trajectory_to_json(trajectory: Trajectory) -> dict:
    return {
        "graph_id": trajectory.graph_id,
        "steps": [
            {
                "node_id": s.node_id,
                "question": s.question,
                "option_index": s.option_index,
                "option": s.option,
            }
            for s in trajectory.steps
        ],
        "intent_sequence": list(trajectory.intent_sequence),
    }


def trajectory_from_json(data: dict) -> Trajectory:
    return Trajectory(
        graph_id=data.get("graph_id", ""),
        steps=tuple(
            TrajectoryStep(
                node_id=s["node_id"],
                question=s["question"],
                option_index=s["option_index"],
                option=s["option"],
            )
            for s in data["steps"]
        ),
        intent_sequence=tuple(data["intent_sequence"]),
    )
