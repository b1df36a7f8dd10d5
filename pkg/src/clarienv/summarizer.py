"""Summary agent: compress a finished clarification episode into one refined,
single-paragraph query for a downstream research agent.

Flagged turns are kept in the prompt but annotated, so the summarizer itself
can apply its exclusion rule for dismissed exchanges.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import PipelineError, UsageError
from .prompts import SUMMARY_PROMPT, render
from .providers import chat_request
from .simulator import Episode, STATUS_ANSWERED


@dataclass(frozen=True)
class RefinedQuery:
    text: str
    episode_id: str


_STATUS_NOTES = {
    "redundant": " [the user dismissed this question as repetitive]",
    "irrelevant": " [the user dismissed this question as not important]",
    "insignificant": " [the user dismissed this question as restating the request]",
}


def format_history(episode: Episode) -> str:
    lines = []
    for i, record in enumerate(episode.history, start=1):
        note = _STATUS_NOTES.get(record.status, "")
        lines.append(f"Turn {i} Question: {record.question}{note}")
        lines.append(f"Turn {i} Answer: {record.response}")
    return "\n".join(lines)


def normalize_paragraph(text: str) -> str:
    """Collapse all whitespace runs (including line breaks) to single spaces."""
    return re.sub(r"\s+", " ", text).strip()


def summarize(episode: Episode, chat) -> RefinedQuery:
    if not episode.history:
        raise UsageError("episode has no turns to summarize")
    prompt = render(
        SUMMARY_PROMPT,
        original_query=episode.simple_query,
        history=format_history(episode),
    )
    text = ""
    for _ in range(2):
        text = normalize_paragraph(chat.chat(chat_request("", prompt)))
        if text:
            break
    if not text:
        raise PipelineError("summary reply was empty after the retry")
    return RefinedQuery(text=text, episode_id=episode.episode_id)
