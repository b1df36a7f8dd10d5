import json

import pytest

from clarienv.cdag import parse_cdag
from clarienv.errors import ConsistencyError, UsageError
from clarienv.pipeline import Dialogue, DialogueTurn
from clarienv.providers import (
    CannedChatProvider,
    EchoUserProvider,
    HashedTokenEmbedder,
    ScriptedChatProvider,
)
from clarienv.rollout import (
    RolloutInput,
    RolloutSpec,
    RolloutTrajectory,
    RolloutTurn,
    TargetTracker,
    decompose,
    default_prefix_lengths,
    make_prefixed_context,
    mix,
    run_one_rollout,
    run_rollouts,
)
from clarienv.simulator import SimulatorConfig
from clarienv.traversal import enumerate_trajectories, intent_text

from test_pipeline import SMALL_GRAPH


def build_input():
    graph = parse_cdag(json.dumps(SMALL_GRAPH))
    trajectory = enumerate_trajectories(graph, graph_id="t1")[0]
    dialogue = Dialogue(
        task_id="t1",
        trajectory_id="t1-t0",
        simple_query="research the topic",
        turns=tuple(
            DialogueTurn(s.question, f"my answer about {s.option}")
            for s in trajectory.steps
        ),
    )
    return RolloutInput(dialogue=dialogue, graph=graph, trajectory=trajectory)


def intent_question(graph, node_id):
    """A policy question that matches the node's intent text exactly."""
    return intent_text(graph.node(node_id))


class TestSpec:
    def test_validation(self):
        with pytest.raises(UsageError):
            RolloutSpec(policy=CannedChatProvider("q"), rollouts_per_query=0)
        with pytest.raises(UsageError):
            RolloutSpec(policy=CannedChatProvider("q"), prefix_lengths=(9,))

    def test_default_prefix_lengths_capped(self):
        dialogue = Dialogue("t", "t-0", "q", tuple(
            DialogueTurn(f"q{i}?", "a") for i in range(6)
        ))
        lengths = default_prefix_lengths(dialogue)
        assert len(lengths) <= 4
        assert lengths[0] == 0
        assert all(k < 6 for k in lengths)

    def test_prefixed_context_bounds(self):
        item = build_input()
        assert make_prefixed_context(item.dialogue, 0) == []
        assert len(make_prefixed_context(item.dialogue, 2)) == 2
        with pytest.raises(UsageError):
            make_prefixed_context(item.dialogue, 3)


class TestRunOneRollout:
    def test_policy_continues_after_forced_prefix(self):
        item = build_input()
        policy = ScriptedChatProvider()
        policy.add(intent_question(item.graph, "q2"))
        policy.add("Do penguins migrate seasonally across colonies?")
        spec = RolloutSpec(
            policy=policy,
            simulator=SimulatorConfig(max_turns=3),
        )
        result = run_one_rollout(
            spec, item, 1, HashedTokenEmbedder(), EchoUserProvider()
        )
        assert result.complete
        assert [t.origin for t in result.turns] == ["forced", "policy", "policy"]
        assert result.turns[0].reward is None
        assert result.turns[1].status == "answered"
        assert result.turns[2].status == "irrelevant"
        assert result.turns[1].reward.content == pytest.approx(1.0)

    def test_policy_never_sees_latent_intents(self):
        item = build_input()
        policy = CannedChatProvider(intent_question(item.graph, "q1"))
        spec = RolloutSpec(policy=policy, simulator=SimulatorConfig(max_turns=2))
        run_one_rollout(spec, item, 0, HashedTokenEmbedder(), EchoUserProvider())
        for call in policy.calls:
            for intent in item.trajectory.intent_sequence:
                assert intent not in call.system_prompt
            assert call.messages[0].text == item.dialogue.simple_query

    def test_provider_failure_marks_incomplete(self):
        item = build_input()
        policy = ScriptedChatProvider()  # empty script: first call fails
        spec = RolloutSpec(policy=policy, simulator=SimulatorConfig(max_turns=2))
        result = run_one_rollout(
            spec, item, 0, HashedTokenEmbedder(), EchoUserProvider()
        )
        assert not result.complete
        assert result.turns == ()


class TestRunRollouts:
    def test_arity(self):
        item = build_input()
        policy = CannedChatProvider(intent_question(item.graph, "q1"))
        spec = RolloutSpec(
            policy=policy,
            rollouts_per_query=3,
            prefix_lengths=(0, 1),
            simulator=SimulatorConfig(max_turns=2),
        )
        results = run_rollouts(
            spec, [item], HashedTokenEmbedder(), EchoUserProvider()
        )
        assert len(results) == 1 * 2 * 3
        assert {r.prefix_length for r in results} == {0, 1}


class TestTargetTracker:
    def test_prefix_replay_fixes_frame(self):
        item = build_input()
        tracker = TargetTracker(
            item.graph, item.trajectory, 1, HashedTokenEmbedder(), 0.8
        )
        targets = tracker.current()
        assert targets.node_ids == ("q2",)

    def test_advance_on_matching_question(self):
        item = build_input()
        tracker = TargetTracker(
            item.graph, item.trajectory, 0, HashedTokenEmbedder(), 0.8
        )
        tracker.advance(intent_question(item.graph, "q1"))
        assert tracker.current().node_ids == ("q2",)

    def test_no_advance_below_threshold(self):
        item = build_input()
        tracker = TargetTracker(
            item.graph, item.trajectory, 0, HashedTokenEmbedder(), 0.8
        )
        tracker.advance("Do penguins migrate seasonally?")
        assert tracker.current().node_ids == ("q1",)

    def test_corrupt_prefix_rejected(self):
        item = build_input()
        bad = item.trajectory
        from clarienv.traversal import Trajectory, TrajectoryStep

        corrupt = Trajectory(
            graph_id=bad.graph_id,
            steps=(TrajectoryStep("q2", "x?", 0, "opt"),) + bad.steps[1:],
            intent_sequence=bad.intent_sequence,
        )
        with pytest.raises(ConsistencyError):
            TargetTracker(item.graph, corrupt, 1, HashedTokenEmbedder(), 0.8)


class TestDecompose:
    def run_rollout(self, prefix_length=1):
        item = build_input()
        policy = ScriptedChatProvider()
        policy.add(intent_question(item.graph, "q2"))
        policy.add("Do penguins migrate seasonally across colonies?")
        spec = RolloutSpec(policy=policy, simulator=SimulatorConfig(max_turns=3))
        result = run_one_rollout(
            spec, item, prefix_length, HashedTokenEmbedder(), EchoUserProvider()
        )
        return item, result

    def test_one_sample_per_policy_turn(self):
        item, result = self.run_rollout()
        samples = decompose(
            result, item.graph, item.trajectory, HashedTokenEmbedder(),
            simple_query=item.dialogue.simple_query,
        )
        assert len(samples) == 2
        for sample in samples:
            assert sample.stage == "II"
            assert sample.origin == "policy"
            assert sample.reward is not None
            assert sample.question is not None
        # first policy sample sees the forced prefix in its history
        assert len(samples[0].history) == 3
        assert samples[0].target_intents == (intent_question(item.graph, "q2"),)
        # after the q2 match the traversal is exhausted: no targets remain
        assert samples[1].target_intents == ()

    def test_rewards_carried_verbatim(self):
        item, result = self.run_rollout()
        samples = decompose(
            result, item.graph, item.trajectory, HashedTokenEmbedder()
        )
        policy_turns = [t for t in result.turns if t.origin == "policy"]
        for sample, turn in zip(samples, policy_turns):
            assert sample.reward == turn.reward

    def test_forced_turn_after_prefix_rejected(self):
        item, result = self.run_rollout()
        tampered = RolloutTrajectory(
            task_id=result.task_id,
            prefix_length=0,
            turns=result.turns,  # turn 0 is forced but prefix says 0
            complete=True,
        )
        with pytest.raises(ConsistencyError):
            decompose(tampered, item.graph, item.trajectory, HashedTokenEmbedder())


class TestMix:
    def make_samples(self, n, stage):
        item = build_input()
        from clarienv.pipeline import TurnSample

        return [
            TurnSample(
                sample_id=f"{stage}-{i}", task_id="t1", history=(),
                target_intents=(), stage=stage,
            )
            for i in range(n)
        ]

    def test_seeded_shuffle_is_stable(self):
        a = self.make_samples(5, "I")
        b = self.make_samples(4, "II")
        first = mix(a, b, seed=42)
        second = mix(a, b, seed=42)
        assert first == second
        assert sorted(s.sample_id for s in first) == sorted(
            s.sample_id for s in a + b
        )

    def test_different_seeds_differ(self):
        a = self.make_samples(10, "I")
        b = self.make_samples(10, "II")
        assert mix(a, b, seed=1) != mix(a, b, seed=2)
