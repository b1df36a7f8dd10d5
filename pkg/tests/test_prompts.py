import pytest

from clarienv.errors import UsageError
from clarienv.prompts import (
    AGENT_SYSTEM_PROMPT,
    BASE_GRAPH_PROMPT,
    DEEP_INTENT_PROMPT,
    EXPAND_GRAPH_PROMPT,
    FORMAT_JUDGE_PROMPT,
    FUZZIFY_PROMPT,
    INSIGNIFICANCE_JUDGE_PROMPT,
    SUMMARY_PROMPT,
    USER_SIMULATOR_PROMPT,
    render,
)

SLOTS = {
    "FUZZIFY_PROMPT": (FUZZIFY_PROMPT, ["task"]),
    "DEEP_INTENT_PROMPT": (DEEP_INTENT_PROMPT, ["rubrics"]),
    "BASE_GRAPH_PROMPT": (BASE_GRAPH_PROMPT, ["task", "intent_list"]),
    "EXPAND_GRAPH_PROMPT": (EXPAND_GRAPH_PROMPT, ["graph_json", "intent_list"]),
    "FORMAT_JUDGE_PROMPT": (FORMAT_JUDGE_PROMPT, ["question"]),
    "INSIGNIFICANCE_JUDGE_PROMPT": (
        INSIGNIFICANCE_JUDGE_PROMPT, ["original_query", "question"]
    ),
    "USER_SIMULATOR_PROMPT": (USER_SIMULATOR_PROMPT, ["intent_list"]),
    "SUMMARY_PROMPT": (SUMMARY_PROMPT, ["original_query", "history"]),
}


class TestRender:
    def test_literal_substitution(self):
        assert render("ask about {topic} now", topic="budget") == "ask about budget now"

    def test_unknown_slot_rejected(self):
        with pytest.raises(UsageError):
            render("no slots", topic="x")

    def test_json_braces_survive(self):
        template = '{"key": "VALUE"} with {slot}'
        assert render(template, slot="x") == '{"key": "VALUE"} with x'

    @pytest.mark.parametrize("name", sorted(SLOTS))
    def test_each_template_declares_its_slots(self, name):
        template, slots = SLOTS[name]
        for slot in slots:
            assert "{" + slot + "}" in template

    @pytest.mark.parametrize("name", sorted(SLOTS))
    def test_render_fidelity(self, name):
        """Rendering changes the slot tokens and nothing else."""
        template, slots = SLOTS[name]
        fillers = {s: f"<<{s}-value>>" for s in slots}
        rendered = render(template, **fillers)
        reverted = rendered
        for slot, value in fillers.items():
            assert value in rendered
            reverted = reverted.replace(value, "{" + slot + "}")
        assert reverted == template


class TestAgentPrompt:
    def test_is_static(self):
        # the agent prompt has no slots; rendering with any must fail
        with pytest.raises(UsageError):
            render(AGENT_SYSTEM_PROMPT, task="x")
