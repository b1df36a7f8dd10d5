import json

import pytest

from clarienv.cdag import parse_cdag, serialize_cdag
from clarienv.errors import ConsistencyError, PipelineError, UsageError
from clarienv.pipeline import (
    Dialogue,
    DialogueTurn,
    FuzzifyResult,
    IntentRecord,
    SeedTask,
    TurnSample,
    build_base_graph,
    derive_deep_intents,
    emit_turn_samples,
    expand_graph,
    format_intent_list,
    fuzzify,
    history_prefix,
    infer_language,
    map_intent_provenance,
    strip_fences,
    synthesize_dialogue,
)
from clarienv.providers import CannedChatProvider, ScriptedChatProvider
from clarienv.reward import RewardConfig
from clarienv.traversal import enumerate_trajectories

SMALL_GRAPH = {
    "root_node": "research the topic",
    "start_node_ids": ["q1"],
    "nodes": {
        "q1": {
            "id": "q1",
            "text": "What scope do you want?",
            "options": [
                {"text": "global coverage", "next_node_id": ["q2"]},
                {"text": "regional coverage", "next_node_id": []},
            ],
        },
        "q2": {
            "id": "q2",
            "text": "Which region matters most?",
            "options": [
                {"text": "europe", "next_node_id": []},
                {"text": "asia", "next_node_id": []},
            ],
        },
    },
}


class TestLanguage:
    def test_english(self):
        assert infer_language("Research the market.") == "en"

    def test_chinese(self):
        assert infer_language("研究市场趋势") == "zh"

    def test_passthrough_on_task(self):
        assert SeedTask("t1", "调研咨询公司的人工智能布局").language == "zh"


class TestStripFences:
    def test_plain_text_untouched(self):
        assert strip_fences('{"a": 1}') == '{"a": 1}'

    def test_fenced_json(self):
        assert strip_fences('```json\n{"a": 1}\n```') == '{"a": 1}'

    def test_bare_fence(self):
        assert strip_fences('```\n{"a": 1}\n```\n') == '{"a": 1}'


class TestFuzzify:
    def reply(self, simple, intents):
        return json.dumps({"simple_query": simple, "missing_intent": intents})

    def test_happy_path(self):
        chat = CannedChatProvider(self.reply("Research firms", ["I want budgets"]))
        task = SeedTask("t1", "Research firms with detailed budgets")
        result = fuzzify(task, chat)
        assert result.simple_query == "Research firms"
        assert [r.text for r in result.shallow_intents] == ["I want budgets"]
        assert all(r.kind == "shallow" for r in result.shallow_intents)
        # the prompt embeds the original query verbatim
        assert task.original_query in chat.calls[0].messages[0].text

    def test_already_minimal(self):
        chat = CannedChatProvider(self.reply("", []))
        result = fuzzify(SeedTask("t1", "What is the boiling point of water?"), chat)
        assert result.simple_query == "" and result.shallow_intents == ()

    def test_missing_keys_rejected(self):
        chat = CannedChatProvider('{"simple_query": "x"}')
        with pytest.raises(PipelineError):
            fuzzify(SeedTask("t1", "anything"), chat)

    def test_retry_on_malformed_json(self):
        chat = ScriptedChatProvider()
        chat.add("not json")
        chat.add(self.reply("Research firms", []))
        result = fuzzify(SeedTask("t1", "Research firms today"), chat)
        assert result.simple_query == "Research firms"
        assert len(chat.calls) == 2


class TestDeepIntents:
    def test_happy_path(self):
        reply = json.dumps({
            "comprehensiveness": ["I want all regions covered"],
            "insight": ["The report needs to explain why trends emerge"],
        })
        chat = CannedChatProvider(reply)
        task = SeedTask("t1", "Research firms", rubrics='{"criteria": []}')
        records = derive_deep_intents(task, chat)
        assert [r.category for r in records] == ["comprehensiveness", "insight"]
        assert all(r.kind == "deep" for r in records)

    def test_requires_rubrics(self):
        with pytest.raises(UsageError):
            derive_deep_intents(SeedTask("t1", "q"), CannedChatProvider("{}"))

    def test_missing_category_named(self):
        chat = CannedChatProvider(json.dumps({"comprehensiveness": []}))
        task = SeedTask("t1", "q", rubrics="r")
        with pytest.raises(PipelineError) as exc_info:
            derive_deep_intents(task, chat)
        assert "insight" in str(exc_info.value)


class TestGraphConstruction:
    def test_build_base_graph(self):
        chat = CannedChatProvider(json.dumps(SMALL_GRAPH))
        graph = build_base_graph(
            "research the topic", [IntentRecord("shallow", "I want global scope")], chat
        )
        assert set(graph.nodes) == {"q1", "q2"}

    def test_repair_retry_with_violations(self):
        bad = dict(SMALL_GRAPH)
        bad_nodes = json.loads(json.dumps(SMALL_GRAPH["nodes"]))
        bad_nodes["q1"]["options"] = bad_nodes["q1"]["options"][:1]
        bad = {**SMALL_GRAPH, "nodes": bad_nodes}
        chat = ScriptedChatProvider()
        chat.add(json.dumps(bad))
        chat.add(json.dumps(SMALL_GRAPH))
        graph = build_base_graph(
            "research the topic", [IntentRecord("shallow", "x")], chat
        )
        assert set(graph.nodes) == {"q1", "q2"}
        # the repair prompt names the violation
        assert "rejected" in chat.calls[1].messages[0].text

    def test_gives_up_after_retry(self):
        chat = CannedChatProvider("still not json")
        with pytest.raises(PipelineError):
            build_base_graph("t", [IntentRecord("shallow", "x")], chat)
        assert len(chat.calls) == 2

    def test_expand_keeps_existing_nodes(self):
        base = parse_cdag(json.dumps(SMALL_GRAPH))
        dropped = {
            "root_node": SMALL_GRAPH["root_node"],
            "start_node_ids": ["q1"],
            "nodes": {"q1": SMALL_GRAPH["nodes"]["q1"] | {"options": [
                {"text": "global coverage", "next_node_id": []},
                {"text": "regional coverage", "next_node_id": []},
            ]}},
        }
        chat = ScriptedChatProvider()
        chat.add(json.dumps(dropped))  # drops q2: must be rejected
        chat.add(serialize_cdag(base))
        expanded = expand_graph(base, [IntentRecord("shallow", "x")], chat)
        assert set(expanded.nodes) == {"q1", "q2"}


class TestDialogueSynthesis:
    def trajectory(self):
        graph = parse_cdag(json.dumps(SMALL_GRAPH))
        return graph, enumerate_trajectories(graph, graph_id="t1")[0]

    def test_one_chat_call_per_turn(self):
        graph, trajectory = self.trajectory()
        chat = CannedChatProvider("I care about global coverage mostly.")
        dialogue = synthesize_dialogue(
            "research the topic", trajectory, chat,
            task_id="t1", trajectory_id="t1-t0",
        )
        assert len(dialogue.turns) == len(trajectory.steps)
        assert len(chat.calls) == len(trajectory.steps)
        # each call's system prompt carries exactly the chosen option as intent
        for call, step in zip(chat.calls, trajectory.steps):
            assert f"- {step.option}" in call.system_prompt

    def test_empty_answer_retried_then_fatal(self):
        graph, trajectory = self.trajectory()
        chat = CannedChatProvider("")
        with pytest.raises(PipelineError) as exc_info:
            synthesize_dialogue("q", trajectory, chat)
        assert "step 0" in str(exc_info.value)


class TestTurnSamples:
    def build(self):
        graph = parse_cdag(json.dumps(SMALL_GRAPH))
        trajectory = enumerate_trajectories(graph, graph_id="t1")[0]
        dialogue = Dialogue(
            task_id="t1",
            trajectory_id="t1-t0",
            simple_query="research the topic",
            turns=tuple(
                DialogueTurn(s.question, f"answer about {s.option}")
                for s in trajectory.steps
            ),
        )
        return graph, trajectory, dialogue

    def test_sample_per_turn_with_targets(self, embedder):
        graph, trajectory, dialogue = self.build()
        samples = emit_turn_samples(dialogue, graph, trajectory, embedder=embedder)
        assert len(samples) == len(dialogue.turns)
        # first sample: history is just the query, targets are the start frame
        assert samples[0].history == ({"role": "user", "text": "research the topic"},)
        assert len(samples[0].target_intents) == 1
        for sample in samples:
            assert sample.stage == "I"
            assert sample.reward is not None
            assert sample.reward.penalties.total == 0.0

    def test_history_grows_by_turn(self, embedder):
        graph, trajectory, dialogue = self.build()
        samples = emit_turn_samples(dialogue, graph, trajectory)
        for t, sample in enumerate(samples):
            assert len(sample.history) == 1 + 2 * t

    def test_length_mismatch_rejected(self):
        graph, trajectory, dialogue = self.build()
        short = Dialogue(
            dialogue.task_id, dialogue.trajectory_id,
            dialogue.simple_query, dialogue.turns[:-1],
        )
        with pytest.raises(ConsistencyError):
            emit_turn_samples(short, graph, trajectory)

    def test_question_divergence_rejected(self):
        graph, trajectory, dialogue = self.build()
        mutated = Dialogue(
            dialogue.task_id, dialogue.trajectory_id, dialogue.simple_query,
            (DialogueTurn("something else?", "a"),) + dialogue.turns[1:],
        )
        with pytest.raises(ConsistencyError):
            emit_turn_samples(mutated, graph, trajectory)

    def test_json_roundtrip(self, embedder):
        graph, trajectory, dialogue = self.build()
        for sample in emit_turn_samples(dialogue, graph, trajectory, embedder=embedder):
            assert TurnSample.from_json(sample.to_json()) == sample


class TestProvenance:
    def test_each_intent_maps_to_one_node(self, embedder):
        graph = parse_cdag(json.dumps(SMALL_GRAPH))
        intents = [
            IntentRecord("shallow", "I want global coverage of the scope"),
            IntentRecord("shallow", "I care most about the europe region"),
        ]
        mapping = map_intent_provenance(graph, intents, embedder)
        assert mapping[intents[0].text] == "q1"
        assert mapping[intents[1].text] == "q2"

    def test_intent_list_formatting(self):
        text = format_intent_list([IntentRecord("shallow", "a"), IntentRecord("shallow", "b")])
        assert text == "- a\n- b"
