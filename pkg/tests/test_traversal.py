import random

import pytest

from clarienv.cdag import CDag, CDagOption, QuestionNode
from clarienv.errors import TraversalComplete, UsageError
from clarienv.traversal import (
    enumerate_trajectories,
    init_traversal,
    intent_text,
    replay_trajectory,
    target_intents,
    trajectory_from_json,
    trajectory_to_json,
    visit,
)

from conftest import random_graph


def brute_force_enumerate(graph: CDag, mode: str) -> set:
    """Independent re-implementation of the frame traversal for oracle use.

    Operates directly on lists of lists; returns the set of complete
    (node_id, option_index) choice sequences.
    """
    results = set()

    def branch_indices(node):
        if mode == "full":
            return range(len(node.options))
        seen, out = set(), []
        for i, opt in enumerate(node.options):
            key = frozenset(opt.next_node_ids)
            if key not in seen:
                seen.add(key)
                out.append(i)
        return out

    def go(frames, visited, choices):
        while frames and not frames[-1]:
            frames = frames[:-1]
        if not frames:
            results.add(tuple(choices))
            return
        nid = frames[-1][0]
        node = graph.nodes[nid]
        for idx in branch_indices(node):
            new_frames = [list(f) for f in frames]
            new_frames[-1].remove(nid)
            new_visited = visited | {nid}
            pending = {x for f in new_frames for x in f}
            push = [
                c for c in node.options[idx].next_node_ids
                if c not in new_visited and c not in pending
            ]
            while new_frames and not new_frames[-1]:
                new_frames.pop()
            if push:
                new_frames.append(push)
            go(new_frames, new_visited, choices + [(nid, idx)])

    go([list(graph.start_node_ids)], set(), [])
    return results


class TestFrames:
    def test_initial_top_frame_is_start_list(self, consulting_graph):
        state = init_traversal(consulting_graph)
        assert state.top_frame() == ("q1", "q2")

    def test_visit_pushes_children_as_new_frame(self, consulting_graph):
        state = init_traversal(consulting_graph)
        state = visit(state, consulting_graph, "q1", 0)
        assert state.top_frame() == ("q2",)
        state = visit(state, consulting_graph, "q2", 0)
        assert state.top_frame() == ("q3", "q11")

    def test_empty_frames_pop_until_exhausted(self, consulting_graph):
        g = consulting_graph
        state = init_traversal(g)
        state = visit(state, g, "q1", 0)
        state = visit(state, g, "q2", 0)  # pushes [q3, q11]
        state = visit(state, g, "q3", 0)  # pushes [q5, q12]
        for nid in ("q5", "q12", "q11"):
            state = visit(state, g, nid, 0)
        assert state.exhausted
        with pytest.raises(TraversalComplete):
            state.top_frame()

    def test_visited_children_are_not_repushed(self):
        # diamond: a and b both feed c; c must appear in only one frame
        nodes = {
            "a": QuestionNode("a", "a?", (CDagOption("x", ("c",)), CDagOption("y", ("c",)))),
            "b": QuestionNode("b", "b?", (CDagOption("x", ("c",)), CDagOption("y"))),
            "c": QuestionNode("c", "c?", (CDagOption("x"), CDagOption("y"))),
        }
        g = CDag("r", ("a", "b"), nodes)
        state = init_traversal(g)
        state = visit(state, g, "a", 0)
        assert state.frames == (("b",), ("c",))
        state = visit(state, g, "c", 0)
        state = visit(state, g, "b", 0)  # c is already visited, nothing to push
        assert state.exhausted

    def test_visit_outside_top_frame_rejected(self, consulting_graph):
        state = init_traversal(consulting_graph)
        with pytest.raises(UsageError):
            visit(state, consulting_graph, "q3", 0)

    def test_option_index_bounds(self, consulting_graph):
        state = init_traversal(consulting_graph)
        with pytest.raises(UsageError):
            visit(state, consulting_graph, "q1", 3)


class TestIntentText:
    def test_joins_question_and_options(self, consulting_graph):
        text = intent_text(consulting_graph.node("q12"))
        assert text.startswith("What should be the concluding focus")
        assert text.count(" / ") == 2

    def test_target_intents_follow_top_frame(self, consulting_graph):
        state = init_traversal(consulting_graph)
        targets = target_intents(state, consulting_graph)
        assert targets.node_ids == ("q1", "q2")
        assert len(targets.intents) == 2


class TestEnumeration:
    def test_reference_graph_structural_count(self, consulting_graph):
        trajectories = enumerate_trajectories(consulting_graph, mode="structural")
        assert len(trajectories) == 4
        # every trajectory resolves each visited question exactly once
        for t in trajectories:
            ids = [s.node_id for s in t.steps]
            assert len(ids) == len(set(ids))

    def test_reference_graph_visit_sets(self, consulting_graph):
        trajectories = enumerate_trajectories(consulting_graph, mode="structural")
        visit_sets = sorted(frozenset(s.node_id for s in t.steps) for t in trajectories)
        expected = sorted([
            frozenset({"q1", "q2", "q3", "q5", "q12", "q11"}),
            frozenset({"q1", "q2", "q3", "q6", "q7", "q12", "q11"}),
            frozenset({"q1", "q2", "q4", "q8", "q12", "q11"}),
            frozenset({"q1", "q2", "q4", "q9", "q12", "q11"}),
        ])
        assert visit_sets == expected

    def test_cap_truncates(self, consulting_graph):
        assert len(enumerate_trajectories(consulting_graph, cap=2)) == 2

    def test_intent_sequence_matches_steps(self, consulting_graph):
        for t in enumerate_trajectories(consulting_graph):
            assert len(t.intent_sequence) == len(t.steps)
            for step, intent in zip(t.steps, t.intent_sequence):
                assert intent.startswith(step.question)

    def test_unknown_mode_rejected(self, consulting_graph):
        with pytest.raises(UsageError):
            enumerate_trajectories(consulting_graph, mode="mystery")

    @pytest.mark.parametrize("mode", ["structural", "full"])
    def test_against_brute_force_oracle(self, mode):
        rng = random.Random(123)
        for _ in range(200):
            graph = random_graph(rng, max_nodes=7)
            got = {
                tuple((s.node_id, s.option_index) for s in t.steps)
                for t in enumerate_trajectories(graph, cap=10 ** 6, mode=mode)
            }
            assert got == brute_force_enumerate(graph, mode)


class TestReplayAndJson:
    def test_replay_reproduces_states(self, consulting_graph):
        t = enumerate_trajectories(consulting_graph)[0]
        states = replay_trajectory(consulting_graph, t)
        assert len(states) == len(t.steps) + 1
        assert states[-1].exhausted

    def test_replay_rejects_corrupt_sequence(self, consulting_graph):
        t = enumerate_trajectories(consulting_graph)[0]
        corrupt = trajectory_to_json(t)
        corrupt["steps"][0]["node_id"] = "q9"
        with pytest.raises(UsageError):
            replay_trajectory(consulting_graph, trajectory_from_json(corrupt))

    def test_json_roundtrip(self, consulting_graph):
        for t in enumerate_trajectories(consulting_graph):
            assert trajectory_from_json(trajectory_to_json(t)) == t
